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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spr/analysis.hpp"
#include "spr/event_log.hpp"

namespace spr {

struct AnalysisOptions {
    bool include_practice = false;
    /// Also aggregate sessions that failed validation.
    bool include_flagged = false;
    /// Tolerance curves are reported for k = 0..max_window.
    std::size_t max_window = 10;
};

struct SessionInput {
    std::string source;  // file name, for reporting
    ParsedLog log;
};

struct SessionSummary {
    std::string source;
    std::string session_id;
    std::string respondent_id;
    bool included = false;
    std::vector<Violation> violations;
};

/// Agreement statistics over one set of texts ("all" or one series).
struct GroupAgreement {
    std::string scope;
    std::size_t items = 0;
    std::size_t raters = 0;
    std::optional<double> kappa_categories;
    std::optional<double> kappa_triggers;
    std::optional<double> observed_categories;
    std::optional<double> observed_triggers;
    std::vector<std::optional<double>> tolerance_curve;  // index = k
    std::vector<std::optional<double>> mode_coverage;    // index = k
    std::vector<std::string> notes;                      // why a value is undefined
};

struct ReadingTimeRow {
    std::string session_id;
    std::string respondent_id;
    std::string text_id;
    std::size_t word_index = 0;
    std::string token;
    std::int64_t duration_ms = 0;
};

struct ProfileRow {
    std::string session_id;
    RespondentProfile profile;
};

struct AgreementReport {
    std::string experiment_id;
    AnalysisOptions options;
    std::vector<SessionSummary> sessions;
    GroupAgreement overall;
    std::vector<GroupAgreement> per_series;
    ConfusionMatrix confusion;
    std::map<std::string, FunninessSummary> funniness;
    int funniness_min = 1;
    int funniness_max = 6;
    std::vector<std::pair<std::string, TriggerRecord>> triggers;  // (session_id, record)
    std::vector<ReadingTimeRow> reading_times;
    std::vector<ProfileRow> profiles;
};

/// Validates every session, then aggregates the included ones in session-id
/// order so results do not depend on input order.
AgreementReport analyze_sessions(std::span<const SessionInput> sessions, const ExperimentDef& def,
                                 const AnalysisOptions& options = {});

/// Reads every *.spr.jsonl file in `dir`.
std::vector<SessionInput> load_session_dir(const std::filesystem::path& dir);

nlohmann::ordered_json to_json(const AgreementReport& report);

/// report.json plus one CSV per table.
void write_report(const AgreementReport& report, const std::filesystem::path& out_dir);

/// Human-readable summary of a report.json document.
std::string render_summary(const nlohmann::json& report);

/// RFC 4180 quoting when needed.
std::string csv_field(std::string_view value);

}  // namespace spr
