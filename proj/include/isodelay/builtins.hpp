#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isodelay/model.hpp"

namespace isodelay {

/// Problems shipped with the library, addressable by name.
std::vector<std::string> builtin_names();

/// Problem file text of a built-in; throws ValidationError for unknown names.
std::string builtin_problem_json(std::string_view name);
DelayedProblem builtin_problem(std::string_view name);

/// Known closed-form extremal sampled on N intervals, when the built-in has
/// one (example33 needs N divisible by 3).
std::optional<Trajectory> builtin_extremal(std::string_view name, int intervals);

/// Multiplier belonging to the closed-form extremal, when it is unique.
std::optional<std::vector<double>> builtin_multiplier(std::string_view name);

}  // namespace isodelay
