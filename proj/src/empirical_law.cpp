#include "qsdcert/empirical_law.hpp"

#include <cmath>
#include <exception>
#include <numbers>

#include "qsdcert/io.hpp"

namespace qsdcert {

namespace {

constexpr std::uint64_t kResampleTag = ~0ull;

std::vector<double> checkpoint_times(double t, double spacing) {
    std::vector<double> times;
    if (t <= 0.0) return times;
    for (std::size_t k = 1;; ++k) {
        const double s = spacing * static_cast<double>(k);
        if (s >= t) break;
        times.push_back(s);
    }
    times.push_back(t);
    return times;
}

// Batch mean and standard error of the mean.
std::pair<double, double> mean_se(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    double m = 0.0;
    for (double x : xs) m += x;
    m /= n;
    if (xs.size() < 2) return {m, 0.0};
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return {m, std::sqrt(v / (n - 1.0) / n)};
}

}  // namespace

ProcessState StartSampler::draw(const ProcessSpec& spec, Stream& rng) const {
    if (point) return *point;
    const Box box = bounding_box(spec);
    ProcessState st;
    do {
        for (std::size_t k = 0; k < box.dim(); ++k) st.x[k] = rng.uniform(box.lo[k], box.hi[k]);
    } while (!inside(spec, st.x));
    if (const auto* p = std::get_if<PdmpSpec>(&spec)) st.regime = rng.index(p->regimes.size());
    else st.angle = 2.0 * std::numbers::pi * rng.uniform();
    return st;
}

EmpiricalLaw estimate_conditioned_law(const ProcessSpec& spec, const StartSampler& start,
                                      const GridScheme& grid, const LawOptions& opt) {
    if (opt.n_paths == 0) throw Error(ErrorCode::InvalidSpec, "need at least one path");
    if (!(opt.t >= 0.0)) throw Error(ErrorCode::InvalidSpec, "t must be nonnegative");
    if (opt.resample_every && !(*opt.resample_every > 0.0))
        throw Error(ErrorCode::InvalidSpec, "resample_every must be positive");
    if (start.point && !inside(spec, start.point->x))
        throw Error(ErrorCode::StartOutsideDomain, "start is not inside the open domain");

    const bool resample = opt.resample_every.has_value();
    const std::vector<double> times = checkpoint_times(opt.t, resample ? *opt.resample_every : 1.0);
    const std::size_t batches = std::max<std::size_t>(1, std::min(opt.batches, opt.n_paths));
    const std::size_t n_states = grid.n_states();

    std::vector<Vector> batch_law(batches, Vector(n_states, 0.0));
    std::vector<double> batch_survival(batches, 1.0);
    std::vector<std::size_t> batch_alive(batches, 0);
    std::vector<std::vector<double>> curve_survival(times.size(), std::vector<double>(batches));
    std::vector<std::size_t> curve_alive(times.size(), 0);

    for (std::size_t b = 0; b < batches; ++b) {
        const std::size_t size = opt.n_paths / batches + (b < opt.n_paths % batches ? 1 : 0);
        std::vector<ProcessState> particles(size);
        std::vector<char> alive(size, 1);
        for (std::size_t slot = 0; slot < size; ++slot) {
            Stream rng(opt.seed, {b, 0, slot});
            particles[slot] = start.draw(spec, rng);
        }

        double survival = 1.0;
        double prev = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double dt = times[k] - prev;
            prev = times[k];
            std::vector<std::exception_ptr> errors(size);
            const auto isize = static_cast<std::int64_t>(size);
#pragma omp parallel for schedule(dynamic, 256)
            for (std::int64_t s = 0; s < isize; ++s) {
                const auto slot = static_cast<std::size_t>(s);
                if (!alive[slot]) continue;
                try {
                    Stream rng(opt.seed, {b, k + 1, slot});
                    alive[slot] = advance(spec, particles[slot], dt, rng) ? 1 : 0;
                } catch (...) {
                    errors[slot] = std::current_exception();
                }
            }
            for (const auto& e : errors)
                if (e) std::rethrow_exception(e);

            std::vector<std::size_t> survivors;
            for (std::size_t slot = 0; slot < size; ++slot)
                if (alive[slot]) survivors.push_back(slot);
            const std::size_t m = survivors.size();
            const double fraction = static_cast<double>(m) / static_cast<double>(size);
            survival = resample ? survival * fraction : fraction;
            curve_survival[k][b] = survival;
            curve_alive[k] += m;

            if (m == 0) {
                std::vector<AttritionPoint> curve;
                for (std::size_t j = 0; j <= k; ++j) curve.push_back({times[j], curve_survival[j][b], 0});
                throw AllAbsorbedError("no survivors in batch " + std::to_string(b) + " at t = " +
                                           fmt(times[k]),
                                       std::move(curve));
            }
            if (resample && k + 1 < times.size() && m < size) {
                Stream rng(opt.seed, {b, k + 1, kResampleTag});
                for (std::size_t slot = 0; slot < size; ++slot) {
                    if (alive[slot]) continue;
                    particles[slot] = particles[survivors[rng.index(m)]];
                    alive[slot] = 1;
                }
            }
        }

        std::size_t count = 0;
        for (std::size_t slot = 0; slot < size; ++slot) {
            if (!alive[slot]) continue;
            const auto state = grid.locate(particles[slot]);
            if (!state) throw Error(ErrorCode::InvalidSpec, "grid does not cover a surviving path");
            batch_law[b][*state] += 1.0;
            ++count;
        }
        for (double& w : batch_law[b]) w /= static_cast<double>(count);
        batch_alive[b] = count;
        batch_survival[b] = survival;
    }

    EmpiricalLaw law;
    law.grid = grid;
    law.total_launched = opt.n_paths;
    law.weights.assign(n_states, 0.0);
    law.std_error.assign(n_states, 0.0);
    for (std::size_t b = 0; b < batches; ++b) law.survivors += batch_alive[b];
    std::vector<double> xs(batches);
    for (std::size_t s = 0; s < n_states; ++s) {
        double pooled = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            xs[b] = batch_law[b][s];
            pooled += batch_law[b][s] * static_cast<double>(batch_alive[b]);
        }
        law.weights[s] = pooled / static_cast<double>(law.survivors);
        law.std_error[s] = mean_se(xs).second;
    }
    std::tie(law.survival_probability, law.survival_std_error) = mean_se(batch_survival);
    for (std::size_t k = 0; k < times.size(); ++k)
        law.attrition.push_back({times[k], mean_se(curve_survival[k]).first, curve_alive[k]});
    return law;
}

std::string law_csv(const EmpiricalLaw& law) {
    const GridScheme& g = law.grid;
    std::string out = "# states=" + std::to_string(g.n_states()) +
                      " survivors=" + std::to_string(law.survivors) +
                      " launched=" + std::to_string(law.total_launched) +
                      " survival=" + fmt(law.survival_probability) +
                      " survival_stderr=" + fmt(law.survival_std_error) + "\n";
    for (std::size_t k = 0; k < g.cells().size(); ++k) out += "i" + std::to_string(k) + ",";
    out += g.angular() ? "angle_bin" : "regime";
    out += ",weight,stderr\n";
    for (std::size_t s = 0; s < g.n_states(); ++s) {
        for (std::size_t c : g.coords(s / g.labels())) out += std::to_string(c) + ",";
        out += std::to_string(s % g.labels()) + "," + fmt(law.weights[s]) + "," + fmt(law.std_error[s]) + "\n";
    }
    return out;
}

std::string attrition_csv(std::span<const AttritionPoint> curve) {
    std::string out = "time,survival,alive\n";
    for (const auto& p : curve) out += fmt(p.time) + "," + fmt(p.survival) + "," + std::to_string(p.alive) + "\n";
    return out;
}

}  // namespace qsdcert
