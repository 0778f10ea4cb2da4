#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "isodelay/conditions.hpp"
#include "isodelay/ocp.hpp"
#include "isodelay/solver.hpp"

namespace isodelay {

/// NaN entries serialise as null.
nlohmann::json to_json(const ConditionReport& report);
nlohmann::json to_json(const NoetherProfile& profile);
nlohmann::json to_json(const AbnormalityResult& result);
nlohmann::json to_json(const HamiltonianDbr& result);
/// Everything except the trajectory samples, plus the EL report.
nlohmann::json to_json(const SolveResult& result);

/// Fixed-width table: condition, nodes, sup, l2, tolerance, verdict.
std::string summary_table(const std::vector<ConditionReport>& reports);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace isodelay
