#pragma once

#include "ragprune/gmm.hpp"
#include "ragprune/outliers.hpp"
#include "ragprune/pipeline.hpp"

#include <json.hpp>

namespace ragprune {

using json = nlohmann::json;

/// Weights, means and row-major flattened covariances.
json to_json(const GmmModeld& model);
json to_json(const OutlierDecision& decision);
json to_json(const VoteTally& tally);
/// kept_ids, dropped_ids, original_ids, tally, per-cell decisions.
json to_json(const FilterResult& result);

json to_json(const SweepConfig& config);
/// Missing keys keep the values of `base`; unknown keys are ignored. Throws
/// ConfigError on wrongly typed values. Does not validate.
SweepConfig sweep_config_from_json(const json& j, SweepConfig base = {});

}  // namespace ragprune
