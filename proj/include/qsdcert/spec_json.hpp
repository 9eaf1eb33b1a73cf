#pragma once

#include <string>
#include <string_view>

#include "qsdcert/pdmp.hpp"

namespace qsdcert {

/// Process spec from JSON text. Keys: mode ("pcmp" | "pdmp1d" | "neutron"),
/// dim, domain.{lo, hi} or domain.{shape: "disk", center, radius},
/// regimes[].{v | poly | table.{x, v}}, rates[][], step, step_tolerance,
/// scatter_rate. Throws ParseError naming the JSON pointer of the bad key.
/// The result is not validated; see validate_spec.
ProcessSpec parse_spec(std::string_view text);

std::string spec_to_json(const ProcessSpec& spec);

}  // namespace qsdcert
