#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsdcert/error.hpp"
#include "qsdcert/grid.hpp"

namespace qsdcert {

/// Initial law of the simulated paths: a fixed state, or uniform over the
/// domain with a uniform regime (or heading angle).
struct StartSampler {
    std::optional<ProcessState> point;
    ProcessState draw(const ProcessSpec& spec, Stream& rng) const;
};

struct AttritionPoint {
    double time = 0.0;
    double survival = 0.0;
    std::size_t alive = 0;
};

struct EmpiricalLaw {
    GridScheme grid;
    /// Conditioned law over grid states, summing to 1.
    Vector weights;
    /// Between-batch standard error of each weight.
    Vector std_error;
    std::size_t survivors = 0;
    std::size_t total_launched = 0;
    double survival_probability = 0.0;
    double survival_std_error = 0.0;
    std::vector<AttritionPoint> attrition;
};

struct LawOptions {
    double t = 1.0;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    /// Checkpoint spacing for survivor resampling; unset disables resampling.
    std::optional<double> resample_every;
    std::size_t batches = 10;
};

/// Throws AllAbsorbed (attrition curve in the message) when a batch dies out.
EmpiricalLaw estimate_conditioned_law(const ProcessSpec& spec, const StartSampler& start,
                                      const GridScheme& grid, const LawOptions& options);

/// Columns: one per axis, regime (or angle bin), weight, stderr.
std::string law_csv(const EmpiricalLaw& law);
std::string attrition_csv(std::span<const AttritionPoint> curve);

/// Attrition curve of the last failed estimate, kept by the AllAbsorbed error.
class AllAbsorbedError : public Error {
public:
    AllAbsorbedError(const std::string& what, std::vector<AttritionPoint> curve)
        : Error(ErrorCode::AllAbsorbed, what), curve_(std::move(curve)) {}
    const std::vector<AttritionPoint>& curve() const noexcept { return curve_; }

private:
    std::vector<AttritionPoint> curve_;
};

}  // namespace qsdcert
