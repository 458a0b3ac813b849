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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace spr {

/// A category label, or nullopt for "none of the above".
using Category = std::optional<std::string>;

/// Label used for the empty category in exported tables. Reserved: no
/// experiment category may use it.
inline constexpr std::string_view kNoneLabel = "none";

inline std::string label_of(const Category& c) { return c ? *c : std::string(kNoneLabel); }

struct SessionConfig {
    std::int64_t min_word_delay_ms = 1000;
    int funniness_min = 1;
    int funniness_max = 6;

    bool operator==(const SessionConfig&) const = default;
};

struct TextItem {
    std::string text_id;
    Category truth_category;
    std::string text;  // verbatim from the experiment file
    std::vector<std::string> tokens;

    bool operator==(const TextItem&) const = default;
};

struct Series {
    std::string series_id;
    std::vector<TextItem> texts;

    bool operator==(const Series&) const = default;
};

/// Immutable description of a whole experiment. Build it with load_experiment.
class ExperimentDef {
public:
    std::string experiment_id;
    std::vector<std::string> categories;
    std::vector<std::string> humorous_categories;
    std::vector<Series> series;
    std::vector<TextItem> practice_texts;
    SessionConfig config;

    /// Rebuilds the text index. load_experiment calls this; call it again after
    /// editing fields by hand.
    void reindex();

    const TextItem* find_text(std::string_view text_id) const;
    /// Series id for an annotation text; empty for practice texts.
    std::string_view series_of(std::string_view text_id) const;
    bool is_practice(std::string_view text_id) const;

    bool has_category(std::string_view c) const;
    bool is_humorous(const Category& c) const;

    /// Annotation (non-practice) text ids in file order.
    std::vector<std::string> annotation_text_ids() const;
    std::size_t annotation_text_count() const;

private:
    struct Location {
        std::size_t series_index;  // npos for practice texts
        std::size_t text_index;
    };
    std::unordered_map<std::string, Location> index_;
};

/// Splits on maximal runs of ASCII whitespace; punctuation stays attached.
/// Throws EmptyText when there are no tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Parses and validates an experiment document (JSON text).
/// Throws SchemaError or ValidationError with a path to the offending field.
ExperimentDef load_experiment(std::string_view document);
ExperimentDef load_experiment_json(const nlohmann::json& document);
ExperimentDef load_experiment_file(const std::string& path);

/// Serializes back to the file schema (raw text preserved).
nlohmann::json to_json(const ExperimentDef& def);

}  // namespace spr
