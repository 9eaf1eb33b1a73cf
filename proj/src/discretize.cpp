#include "qsdcert/discretize.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "qsdcert/error.hpp"
#include "qsdcert/io.hpp"

namespace qsdcert {

SubMarkovKernel DiscretizedKernel::to_kernel() const { return validate_kernel(p); }

DiscretizedKernel discretize_process(const ProcessSpec& spec, const GridScheme& grid,
                                     std::size_t samples_per_cell, std::uint64_t seed,
                                     Execution exec) {
    if (samples_per_cell == 0) throw Error(ErrorCode::InvalidSpec, "samples_per_cell must be positive");
    const std::size_t n = grid.n_states();
    DiscretizedKernel dk;
    dk.grid = grid;
    dk.p = Matrix(n, n);
    dk.std_error = Matrix(n, n);
    dk.samples_per_cell = samples_per_cell;
    dk.seed = seed;
    const double total = static_cast<double>(samples_per_cell);
    std::vector<std::exception_ptr> errors(n);
    const auto rows = static_cast<std::int64_t>(n);

#pragma omp parallel for schedule(dynamic, 1) if (exec == Execution::Parallel)
    for (std::int64_t r = 0; r < rows; ++r) {
        const auto s = static_cast<std::size_t>(r);
        try {
            Stream rng(seed, {s});
            std::vector<std::size_t> hits(n, 0);
            for (std::size_t k = 0; k < samples_per_cell; ++k) {
                ProcessState st = sample_in_state(spec, grid, s, rng);
                if (!advance(spec, st, grid.t0_cont(), rng)) continue;
                const auto to = grid.locate(st);
                if (!to) throw Error(ErrorCode::InvalidSpec, "grid does not cover a surviving path");
                ++hits[*to];
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double p = static_cast<double>(hits[j]) / total;
                dk.p(s, j) = p;
                dk.std_error(s, j) = std::sqrt(p * (1.0 - p) / total);
            }
        } catch (...) {
            errors[s] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return dk;
}

std::string kernel_metadata_json(const DiscretizedKernel& dk, const std::string& spec_hash) {
    const GridScheme& g = dk.grid;
    nlohmann::ordered_json j;
    j["cells"] = g.cells();
    j["lo"] = g.bounds().lo;
    j["hi"] = g.bounds().hi;
    j["labels"] = g.labels();
    j["label_kind"] = g.angular() ? "angle_bin" : "regime";
    j["active_cells"] = g.active_cells();
    j["states"] = g.n_states();
    j["cell_volume"] = g.cell_volume();
    j["t0_cont"] = g.t0_cont();
    j["samples_per_cell"] = dk.samples_per_cell;
    j["seed"] = dk.seed;
    j["spec_hash"] = spec_hash;
    j["kernel_hash"] = hex(content_hash(dk.p));
    return j.dump(2) + "\n";
}

AdjointReport adjoint_relation_check(const PdmpSpec& spec, const GridScheme& grid,
                                     std::size_t samples_per_cell, std::uint64_t seed) {
    if (spec.mode != PdmpMode::Pcmp)
        throw Error(ErrorCode::InvalidSpec, "the adjoint relation is checked for constant drifts only");
    const DiscretizedKernel fwd = discretize_process(spec, grid, samples_per_cell, seed);
    const DiscretizedKernel rev =
        discretize_process(reversed_spec(spec), grid, samples_per_cell, stream_key(seed, {1}));
    const Vector& omega = spec.rates.omega();
    const std::size_t labels = grid.labels();
    const std::size_t n = grid.n_states();
    const double samples = static_cast<double>(samples_per_cell);

    AdjointReport rep;
    rep.worst.z = -1.0;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            const double p = fwd.p(s, t);
            const double ph = rev.p(t, s);
            if (0.5 * samples * (p + ph) < 20.0) continue;
            const double wi = omega[s % labels];
            const double wj = omega[t % labels];
            AdjointPair pair{s, t, wi * p, wj * ph, 0.0};
            const double var = wi * wi * p * (1.0 - p) / samples + wj * wj * ph * (1.0 - ph) / samples;
            const double diff = std::fabs(pair.forward - pair.reverse);
            if (var > 0.0) pair.z = diff / std::sqrt(var);
            else if (diff > 0.0) pair.z = std::numeric_limits<double>::infinity();
            ++rep.massive_pairs;
            if (pair.z <= 4.0) ++rep.within;
            if (pair.z > rep.worst.z) rep.worst = pair;
            rep.table.push_back(pair);
        }
    }
    if (rep.massive_pairs > 0)
        rep.fraction_within = static_cast<double>(rep.within) / static_cast<double>(rep.massive_pairs);
    else
        rep.worst.z = 0.0;
    rep.passed = rep.fraction_within >= 0.99;
    return rep;
}

void require_adjoint(const AdjointReport& report) {
    if (report.passed) return;
    throw Error(ErrorCode::AdjointViolated,
                std::to_string(report.massive_pairs - report.within) + " of " +
                    std::to_string(report.massive_pairs) + " massive pairs beyond 4 SE; worst (" +
                    std::to_string(report.worst.from) + "," + std::to_string(report.worst.to) +
                    ") z = " + fmt(report.worst.z),
                {report.worst.from, report.worst.to});
}

std::string adjoint_csv(const AdjointReport& report) {
    std::string out = "# massive_pairs=" + std::to_string(report.massive_pairs) +
                      " within_4se=" + std::to_string(report.within) +
                      " fraction=" + fmt(report.fraction_within) +
                      " verdict=" + (report.passed ? "PASS" : "FAIL") + "\n";
    out += "from,to,forward,reverse,z\n";
    for (const auto& p : report.table)
        out += std::to_string(p.from) + "," + std::to_string(p.to) + "," + fmt(p.forward) + "," +
               fmt(p.reverse) + "," + fmt(p.z) + "\n";
    return out;
}

namespace {

bool primitive_kernel(const DiscretizedKernel& dk, std::uint64_t max_horizon, std::uint64_t& t0) {
    try {
        const SubMarkovKernel k = dk.to_kernel();
        if (!is_irreducible(k) || period(k) != 1) return false;
        t0 = minimal_positive_horizon(k, max_horizon);
        return true;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DeadRow || e.code() == ErrorCode::HorizonNotFound) return false;
        throw;
    }
}

}  // namespace

PipelineReport pipeline_certify(const ProcessSpec& spec, GridScheme grid, std::size_t samples_per_cell,
                                std::uint64_t seed, const PipelineOptions& options) {
    PipelineReport rep;
    std::uint64_t t0 = 0;
    for (std::size_t attempt = 0;; ++attempt) {
        rep.discretized = discretize_process(spec, grid, samples_per_cell, seed);
        if (primitive_kernel(rep.discretized, options.max_horizon, t0)) break;
        if (attempt == options.max_doublings)
            throw Error(ErrorCode::HorizonNotFound,
                        "grid kernel not primitive up to t0_cont = " + fmt(grid.t0_cont()));
        grid.set_t0_cont(2.0 * grid.t0_cont());
    }

    const SubMarkovKernel k = rep.discretized.to_kernel();
    const std::size_t n = k.n();
    rep.qsd = compute_qsd(k);
    rep.cert = dobrushin_constants(k, rep.qsd.pi, t0);
    const ConditionedFlow flow = ConditionedFlow::from_qsd(k, rep.qsd);

    SweepOptions sweep;
    sweep.t_max = options.t_max;
    if (n > 128) {
        // Large grids: a spread of Dirac starts and a coarser matrix stride.
        sweep.starts.push_back(flow.pi());
        sweep.starts.push_back(Distribution::uniform(n));
        for (std::size_t x = 0; x < n; x += n / 32) sweep.starts.push_back(Distribution::dirac(n, x));
        sweep.matrix_stride = std::max<std::uint64_t>(t0, options.t_max / 10);
    }
    rep.sweep = certify_sweep(flow, rep.cert, sweep);
    if (rep.sweep.fail > 0)
        rep.failures.push_back("bound sweep: " + std::to_string(rep.sweep.fail) + " FAIL verdicts");

    const QProcess qp = build_qprocess(flow, rep.qsd.phi);
    rep.stochasticity_defect = stochasticity_defect(qp);
    rep.stationarity_defect = stationarity_defect(qp);
    if (rep.stochasticity_defect > 1e-12)
        rep.failures.push_back("Q-process row sums off by " + fmt(rep.stochasticity_defect));
    if (rep.stationarity_defect > 1e-10)
        rep.failures.push_back("beta q differs from beta by " + fmt(rep.stationarity_defect));
    try {
        const SubMarkovKernel r = reverse_kernel(kernel_power(k, t0), rep.qsd.pi);
        rep.reversal = qprocess_reversal_check(qp, r, flow.lambda(), t0);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::IdentityViolated) throw;
        rep.failures.push_back(e.what());
    }

    std::size_t low = 0;
    for (std::size_t x = 1; x < n; ++x)
        if (qp.beta[x] < qp.beta[low]) low = x;
    const std::vector<Distribution> starts = {Distribution::uniform(n), Distribution::dirac(n, low)};
    for (std::uint64_t t : {0, 1, 2, 5, 10, 20, 50, 100}) {
        if (t > options.t_max) break;
        for (const Distribution& mu : starts) {
            rep.qprocess_reports.push_back(qprocess_convergence_check(qp, mu, t, rep.cert));
            if (rep.qprocess_reports.back().verdict == Verdict::Fail)
                rep.failures.push_back("Q-process bound fails at t = " + std::to_string(t));
        }
    }

    try {
        rep.audit = contraction_audit(flow, t0, rep.cert.c0, options.audit_trials, seed);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ContractionViolated) throw;
        rep.failures.push_back(e.what());
    }
    return rep;
}

}  // namespace qsdcert
