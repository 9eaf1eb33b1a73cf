#include "qsdcert/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qsdcert/error.hpp"

namespace qsdcert {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

GridScheme::GridScheme(const ProcessSpec& spec, std::vector<std::size_t> cells, double t0_cont,
                       std::size_t angle_bins)
    : bounds_(bounding_box(spec)), t0_cont_(t0_cont) {
    const std::size_t d = bounds_.dim();
    if (cells.size() == 1 && d > 1) cells.assign(d, cells.front());
    if (cells.size() != d)
        throw Error(ErrorCode::InvalidSpec,
                    "grid has " + std::to_string(cells.size()) + " axes, domain has " + std::to_string(d));
    for (std::size_t c : cells)
        if (c == 0) throw Error(ErrorCode::InvalidSpec, "grid axes need at least one cell");
    if (!(t0_cont > 0.0)) throw Error(ErrorCode::InvalidSpec, "t0_cont must be positive");
    cells_ = std::move(cells);

    if (const auto* p = std::get_if<PdmpSpec>(&spec)) {
        labels_ = p->regimes.size();
    } else {
        if (angle_bins == 0) throw Error(ErrorCode::InvalidSpec, "need at least one angle bin");
        labels_ = angle_bins;
        angular_ = true;
    }

    std::size_t total = 1;
    for (std::size_t c : cells_) total *= c;
    active_of_flat_.assign(total, kNone);
    const Disk* disk = nullptr;
    if (const auto* n = std::get_if<NeutronSpec>(&spec)) disk = std::get_if<Disk>(&n->domain);

    for (std::size_t flat = 0; flat < total; ++flat) {
        bool keep = true;
        if (disk) {
            // Keep the cell iff its closest point lies strictly inside the disk.
            std::size_t rest = flat;
            double dist2 = 0.0;
            for (std::size_t k = 0; k < 2; ++k) {
                const std::size_t idx = rest % cells_[k];
                rest /= cells_[k];
                const double w = (bounds_.hi[k] - bounds_.lo[k]) / static_cast<double>(cells_[k]);
                const double lo = bounds_.lo[k] + w * static_cast<double>(idx);
                const double c = std::clamp(disk->center[k], lo, lo + w);
                dist2 += (c - disk->center[k]) * (c - disk->center[k]);
            }
            keep = dist2 < disk->radius * disk->radius;
        }
        if (keep) {
            active_of_flat_[flat] = active_.size();
            active_.push_back(flat);
        }
    }
}

double GridScheme::cell_volume() const {
    double v = 1.0;
    for (std::size_t k = 0; k < cells_.size(); ++k)
        v *= (bounds_.hi[k] - bounds_.lo[k]) / static_cast<double>(cells_[k]);
    return v;
}

std::vector<std::size_t> GridScheme::coords(std::size_t active_cell) const {
    std::size_t rest = active_.at(active_cell);
    std::vector<std::size_t> out(cells_.size());
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        out[k] = rest % cells_[k];
        rest /= cells_[k];
    }
    return out;
}

Box GridScheme::cell_box(std::size_t active_cell) const {
    const auto c = coords(active_cell);
    Box b{std::vector<double>(c.size()), std::vector<double>(c.size())};
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double w = (bounds_.hi[k] - bounds_.lo[k]) / static_cast<double>(cells_[k]);
        b.lo[k] = bounds_.lo[k] + w * static_cast<double>(c[k]);
        b.hi[k] = c[k] + 1 == cells_[k] ? bounds_.hi[k] : b.lo[k] + w;
    }
    return b;
}

std::optional<std::size_t> GridScheme::locate(const ProcessState& state) const {
    std::size_t flat = 0;
    std::size_t stride = 1;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        const double u = (state.x[k] - bounds_.lo[k]) / (bounds_.hi[k] - bounds_.lo[k]);
        if (!(u >= 0.0 && u <= 1.0)) return std::nullopt;
        const auto idx = std::min(cells_[k] - 1, static_cast<std::size_t>(u * static_cast<double>(cells_[k])));
        flat += idx * stride;
        stride *= cells_[k];
    }
    const std::size_t active = active_of_flat_[flat];
    if (active == kNone) return std::nullopt;
    std::size_t label = state.regime;
    if (angular_) {
        const double u = state.angle / kTwoPi;
        label = std::min(labels_ - 1, static_cast<std::size_t>(std::max(u, 0.0) * static_cast<double>(labels_)));
    }
    if (label >= labels_) return std::nullopt;
    return active * labels_ + label;
}

std::pair<double, double> GridScheme::angle_bin(std::size_t label) const {
    const double w = kTwoPi / static_cast<double>(labels_);
    return {w * static_cast<double>(label), w * static_cast<double>(label + 1)};
}

}  // namespace qsdcert

namespace qsdcert {

ProcessState sample_in_state(const ProcessSpec& spec, const GridScheme& grid, std::size_t state,
                             Stream& rng) {
    const std::size_t cell = state / grid.labels();
    const std::size_t label = state % grid.labels();
    const Box box = grid.cell_box(cell);
    ProcessState st;
    for (int attempt = 0; attempt < 1'000'000; ++attempt) {
        for (std::size_t k = 0; k < box.dim(); ++k) st.x[k] = rng.uniform(box.lo[k], box.hi[k]);
        if (inside(spec, st.x)) break;
    }
    if (!inside(spec, st.x))
        throw Error(ErrorCode::InvalidSpec, "cell " + std::to_string(cell) + " does not meet the domain", {cell});
    if (grid.angular()) {
        const auto [lo, hi] = grid.angle_bin(label);
        st.angle = rng.uniform(lo, hi);
    } else {
        st.regime = label;
    }
    return st;
}

}  // namespace qsdcert
