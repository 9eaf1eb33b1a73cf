#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "qsdcert/pdmp.hpp"

namespace qsdcert {

/// Uniform tiling of a process domain times a finite label set: PDMP regimes,
/// or heading-angle bins for neutron transport. For a disk, only cells that
/// meet the disk are kept. State id = active cell * labels + label.
class GridScheme {
public:
    GridScheme() = default;
    GridScheme(const ProcessSpec& spec, std::vector<std::size_t> cells, double t0_cont,
               std::size_t angle_bins = 8);

    const std::vector<std::size_t>& cells() const noexcept { return cells_; }
    const Box& bounds() const noexcept { return bounds_; }
    std::size_t labels() const noexcept { return labels_; }
    bool angular() const noexcept { return angular_; }
    double t0_cont() const noexcept { return t0_cont_; }
    void set_t0_cont(double t) { t0_cont_ = t; }

    std::size_t active_cells() const noexcept { return active_.size(); }
    std::size_t n_states() const noexcept { return active_.size() * labels_; }
    double cell_volume() const;

    /// Per-axis cell coordinates of an active cell.
    std::vector<std::size_t> coords(std::size_t active_cell) const;
    Box cell_box(std::size_t active_cell) const;
    std::optional<std::size_t> locate(const ProcessState& state) const;
    /// Label interval [lo, hi) of an angle bin.
    std::pair<double, double> angle_bin(std::size_t label) const;

private:
    std::vector<std::size_t> cells_;
    Box bounds_;
    std::size_t labels_ = 1;
    bool angular_ = false;
    double t0_cont_ = 1.0;
    std::vector<std::size_t> active_;         // active index -> flat cell
    std::vector<std::size_t> active_of_flat_; // flat cell -> active index or npos
};

}  // namespace qsdcert

namespace qsdcert {

/// Uniform draw from grid state `state` (cell and label) restricted to the
/// process domain.
ProcessState sample_in_state(const ProcessSpec& spec, const GridScheme& grid, std::size_t state,
                             Stream& rng);

}  // namespace qsdcert
