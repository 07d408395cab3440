#pragma once

#include "fbctl/convexity.hpp"
#include "fbctl/fbsde.hpp"
#include "fbctl/hjb.hpp"
#include "fbctl/problem.hpp"

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <string>

namespace fbctl {

/// Shortest round-trip decimal form; identical across runs.
std::string format_number(double v);

nlohmann::json to_json(const Grid& g);
nlohmann::json to_json(const CostEstimate& c);
nlohmann::json to_json(const AssumptionReport& r);
nlohmann::json to_json(const ConvexityReport& r);
nlohmann::json to_json(const IdentityReport& r);

/// Columns t,x1..xd,V,dV1..dVd.  Every `stride`-th kept level plus the last.
void write_value_csv(std::ostream& os, const ValueField& field, int stride = 1);
/// Columns t,x1..xd,control_index.
void write_policy_csv(std::ostream& os, const FeedbackPolicy& policy, int stride = 1);
/// Columns path_id,step,t,x1..xd,y,control_index (y empty when not simulated;
/// control of the final step repeats the last applied atom).
void write_paths_csv(std::ostream& os, const PathBundle& bundle);

nlohmann::json field_sidecar(const ValueField& field);
nlohmann::json policy_sidecar(const FeedbackPolicy& policy);
nlohmann::json paths_sidecar(const PathBundle& bundle);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace fbctl
