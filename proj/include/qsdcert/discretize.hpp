#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsdcert/bounds.hpp"
#include "qsdcert/conditioned_semigroup.hpp"
#include "qsdcert/empirical_law.hpp"
#include "qsdcert/grid.hpp"
#include "qsdcert/qprocess.hpp"

namespace qsdcert {

/// Monte Carlo grid kernel. Kept raw: a grid row may lose all of its mass
/// (e.g. the last cell under pure transport), which SubMarkovKernel rejects.
struct DiscretizedKernel {
    GridScheme grid;
    Matrix p;
    /// Binomial standard error sqrt(p (1 - p) / samples) per entry.
    Matrix std_error;
    std::size_t samples_per_cell = 0;
    std::uint64_t seed = 0;

    /// Throws DeadRow and the other kernel validation errors.
    SubMarkovKernel to_kernel() const;
};

DiscretizedKernel discretize_process(const ProcessSpec& spec, const GridScheme& grid,
                                     std::size_t samples_per_cell, std::uint64_t seed,
                                     Execution exec = Execution::Parallel);

/// Grid geometry, horizon, sampling parameters and kernel hash as JSON text.
std::string kernel_metadata_json(const DiscretizedKernel& dk, const std::string& spec_hash);

struct AdjointPair {
    std::size_t from = 0;
    std::size_t to = 0;
    double forward = 0.0;  // omega_i P[(c,i)][(c',j)]
    double reverse = 0.0;  // omega_j Phat[(c',j)][(c,i)]
    double z = 0.0;
};

struct AdjointReport {
    std::size_t massive_pairs = 0;
    std::size_t within = 0;
    double fraction_within = 1.0;
    AdjointPair worst;
    /// Every massive pair, in state order.
    std::vector<AdjointPair> table;
    bool passed = true;
};

/// Estimates P from `spec` and Phat from reversed_spec(spec) on the same grid
/// and compares omega_i vol P[(c,i)][(c',j)] with omega_j vol Phat[(c',j)][(c,i)].
/// A pair is massive when its mean expected hit count reaches 20; the check
/// passes when 99% of massive pairs lie within 4 combined standard errors.
AdjointReport adjoint_relation_check(const PdmpSpec& spec, const GridScheme& grid,
                                     std::size_t samples_per_cell, std::uint64_t seed);
/// Throws AdjointViolated with the worst pair when the report did not pass.
void require_adjoint(const AdjointReport& report);
std::string adjoint_csv(const AdjointReport& report);

struct PipelineOptions {
    std::uint64_t t_max = 100;
    std::uint64_t max_horizon = 1000;
    /// t0_cont is doubled at most this many times looking for a primitive kernel.
    std::size_t max_doublings = 6;
    std::size_t audit_trials = 20;
};

struct PipelineReport {
    DiscretizedKernel discretized;
    QsdSolution qsd;
    DobrushinCertificate cert;
    SweepResult sweep;
    ReversalReport reversal;
    double stochasticity_defect = 0.0;
    double stationarity_defect = 0.0;
    std::vector<BoundReport> qprocess_reports;
    ContractionAudit audit;
    std::vector<std::string> failures;
    bool passed() const { return failures.empty(); }
};

/// Discretize, then run the QSD solver, certificate, bound sweep, Q-process
/// checks and contraction audit on the grid kernel.
PipelineReport pipeline_certify(const ProcessSpec& spec, GridScheme grid, std::size_t samples_per_cell,
                                std::uint64_t seed, const PipelineOptions& options = {});

}  // namespace qsdcert
