// Copyright 2026 The spr-annotate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spr/analysis.hpp"
#include "spr/corpus.hpp"

namespace spr {

/// Where a simulated respondent settles on a category.
struct TriggerPlacement {
    enum class Mode { Fixed, Uniform, Fraction };
    Mode mode = Mode::Fixed;
    std::size_t position = 1;  // Fixed: 1-based word, clamped to the text length
    double fraction = 1.0;     // Fraction: share of the text length
    std::size_t spread = 0;    // Fraction: uniform jitter of +-spread words

    bool operator==(const TriggerPlacement&) const = default;
};

struct SimulationPolicy {
    TriggerPlacement trigger;
    /// Overrides keyed by the assigned category.
    std::map<std::string, TriggerPlacement> trigger_by_category;
    /// Probability of first choosing another category and revising it later.
    double change_probability = 0.0;
    /// Extra reading time per word on top of the minimum delay.
    std::int64_t extra_reading_min_ms = 0;
    std::int64_t extra_reading_max_ms = 600;
    /// truth label ("none" for texts without a category) -> assigned label -> rate.
    std::map<std::string, std::map<std::string, double>> misassignment;
    /// Exact: round(rate * count) texts of each truth label are misassigned per
    /// respondent. Bernoulli: independent draws per text.
    enum class MisassignmentMode { Bernoulli, Exact };
    MisassignmentMode misassignment_mode = MisassignmentMode::Bernoulli;
    /// Chance of an early key press before each reveal (produces input_suppressed).
    double impatience_probability = 0.0;
    /// Chance of backing out of the no-category prompt once before confirming.
    double cancel_probability = 0.0;

    bool operator==(const SimulationPolicy&) const = default;
};

/// Reads a policy document. Unknown keys and bad values throw SchemaError.
SimulationPolicy parse_policy(const nlohmann::json& doc);
SimulationPolicy load_policy_file(const std::string& path);
nlohmann::json to_json(const SimulationPolicy& policy);

/// Ground truth planted by the simulator for one annotation text.
struct PlantedDecision {
    std::string text_id;
    Category truth;
    Category assigned;
    std::optional<std::size_t> trigger;
    std::size_t selections = 0;
};

struct SimulatedSession {
    std::string session_id;
    std::string respondent_id;
    EventList events;
    std::vector<PlantedDecision> planted;  // in presentation order
};

/// Server clock used for simulated events: a fixed epoch plus the client clock.
inline constexpr std::int64_t kSimulatedEpochMs = 1'600'000'000'000;

/// Drives one respondent through the real session machine. The behaviour is a
/// pure function of (def, policy, respondent_id, seed).
SimulatedSession simulate_session(const ExperimentDef& def, const SimulationPolicy& policy,
                                  const std::string& respondent_id, std::uint64_t seed);

/// Respondent ids used by the CLI simulator: R01, R02, ...
std::string simulated_respondent_id(std::size_t index, std::size_t total);

}  // namespace spr
