// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "xici/ablation.hpp"
#include "xici/identify.hpp"
#include "xici/synth.hpp"
#include "xici/trace_model.hpp"

namespace xici {

using nlohmann::json;

json meta_to_json(const TraceMeta& meta);
TraceMeta meta_from_json(const json& j);

json experts_to_json(const std::set<ExpertRef>& experts);
std::set<ExpertRef> experts_from_json(const json& j);

json result_to_json(const IdentificationResult& r);
IdentificationResult result_from_json(const json& j);

json plan_to_json(const AblationPlan& plan);
AblationPlan plan_from_json(const json& j);

/// Undefined rates serialize as null.
json metrics_to_json(const MetricsReport& m);

json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const json& j);

json synth_config_to_json(const SynthConfig& cfg);

/// Pretty-printed with a trailing newline. Throws DataError on I/O failure.
void write_json_file(const std::filesystem::path& path, const json& j);
json read_json_file(const std::filesystem::path& path);

} // namespace xici
