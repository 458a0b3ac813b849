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

#include "spr/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "spr/errors.hpp"

namespace spr {

namespace {

using nlohmann::json;

constexpr std::size_t kNoSeries = static_cast<std::size_t>(-1);

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
    throw SchemaError(path.empty() ? "$" : path, what);
}

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
    throw ValidationError(path.empty() ? "$" : path, what);
}

void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<std::string_view> required,
                 std::initializer_list<std::string_view> optional = {}) {
    if (!obj.is_object()) schema_fail(path, "expected an object");
    for (auto key : required) {
        if (!obj.contains(key)) schema_fail(path + "." + std::string(key), "missing field");
    }
    for (const auto& [key, _] : obj.items()) {
        auto matches = [&](std::string_view k) { return k == key; };
        if (std::none_of(required.begin(), required.end(), matches) &&
            std::none_of(optional.begin(), optional.end(), matches)) {
            schema_fail(path + "." + key, "unknown field");
        }
    }
}

std::string get_string(const json& obj, std::string_view key, const std::string& path) {
    const auto& v = obj.at(key);
    if (!v.is_string()) schema_fail(path, "expected a string");
    return v.get<std::string>();
}

std::vector<std::string> get_string_list(const json& obj, std::string_view key,
                                         const std::string& path) {
    const auto& v = obj.at(key);
    if (!v.is_array()) schema_fail(path, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) schema_fail(path + "[" + std::to_string(i) + "]", "expected a string");
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

std::int64_t get_integer(const json& obj, std::string_view key, const std::string& path) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) schema_fail(path, "expected an integer");
    if (v.is_number_unsigned() &&
        v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        schema_fail(path, "integer out of range");
    }
    return v.get<std::int64_t>();
}

TextItem parse_text(const json& obj, const std::string& path) {
    expect_keys(obj, path, {"text_id", "truth_category", "text"});
    TextItem item;
    item.text_id = get_string(obj, "text_id", path + ".text_id");
    const auto& truth = obj.at("truth_category");
    if (truth.is_string()) {
        item.truth_category = truth.get<std::string>();
    } else if (!truth.is_null()) {
        schema_fail(path + ".truth_category", "expected a string or null");
    }
    item.text = get_string(obj, "text", path + ".text");
    try {
        item.tokens = tokenize(item.text);
    } catch (const EmptyText&) {
        invalid(path + ".text", "text is empty");
    }
    return item;
}

SessionConfig parse_config(const json& obj, const std::string& path) {
    expect_keys(obj, path, {}, {"min_word_delay_ms", "funniness_min", "funniness_max"});
    SessionConfig cfg;
    if (obj.contains("min_word_delay_ms")) {
        cfg.min_word_delay_ms = get_integer(obj, "min_word_delay_ms", path + ".min_word_delay_ms");
    }
    auto small_int = [&](std::string_view key) {
        const auto p = path + "." + std::string(key);
        const auto v = get_integer(obj, key, p);
        if (v < INT32_MIN || v > INT32_MAX) schema_fail(p, "integer out of range");
        return static_cast<int>(v);
    };
    if (obj.contains("funniness_min")) cfg.funniness_min = small_int("funniness_min");
    if (obj.contains("funniness_max")) cfg.funniness_max = small_int("funniness_max");
    return cfg;
}

void validate(const ExperimentDef& def) {
    if (def.experiment_id.empty()) invalid("$.experiment_id", "must not be empty");
    if (def.categories.empty()) invalid("$.categories", "at least one category is required");
    std::set<std::string, std::less<>> seen;
    for (std::size_t i = 0; i < def.categories.size(); ++i) {
        const auto& c = def.categories[i];
        const auto path = "$.categories[" + std::to_string(i) + "]";
        if (c.empty()) invalid(path, "category name must not be empty");
        if (c == kNoneLabel) invalid(path, "'none' is reserved for texts without a category");
        if (!seen.insert(c).second) invalid(path, "duplicate category '" + c + "'");
    }
    std::set<std::string, std::less<>> humorous;
    for (std::size_t i = 0; i < def.humorous_categories.size(); ++i) {
        const auto& c = def.humorous_categories[i];
        const auto path = "$.humorous_categories[" + std::to_string(i) + "]";
        if (!seen.contains(c)) invalid(path, "unknown category '" + c + "'");
        if (!humorous.insert(c).second) invalid(path, "duplicate category '" + c + "'");
    }

    const auto& cfg = def.config;
    if (cfg.min_word_delay_ms < 0) invalid("$.config.min_word_delay_ms", "must be >= 0");
    if (cfg.funniness_min >= cfg.funniness_max) {
        invalid("$.config.funniness_max", "must be greater than funniness_min");
    }

    std::set<std::string, std::less<>> text_ids;
    auto check_text = [&](const TextItem& t, const std::string& path) {
        if (t.text_id.empty()) invalid(path + ".text_id", "must not be empty");
        if (!text_ids.insert(t.text_id).second) {
            invalid(path + ".text_id", "duplicate text id '" + t.text_id + "'");
        }
        if (t.truth_category && !seen.contains(*t.truth_category)) {
            invalid(path + ".truth_category", "unknown category '" + *t.truth_category + "'");
        }
    };
    if (def.practice_texts.empty()) invalid("$.practice_texts", "at least one practice text is required");
    for (std::size_t i = 0; i < def.practice_texts.size(); ++i) {
        check_text(def.practice_texts[i], "$.practice_texts[" + std::to_string(i) + "]");
    }
    if (def.series.empty()) invalid("$.series", "at least one series is required");
    std::set<std::string, std::less<>> series_ids;
    for (std::size_t s = 0; s < def.series.size(); ++s) {
        const auto& series = def.series[s];
        const auto path = "$.series[" + std::to_string(s) + "]";
        if (series.series_id.empty()) invalid(path + ".series_id", "must not be empty");
        if (!series_ids.insert(series.series_id).second) {
            invalid(path + ".series_id", "duplicate series id '" + series.series_id + "'");
        }
        if (series.texts.empty()) invalid(path + ".texts", "series must contain texts");
        for (std::size_t i = 0; i < series.texts.size(); ++i) {
            check_text(series.texts[i], path + ".texts[" + std::to_string(i) + "]");
        }
    }
}

json text_to_json(const TextItem& t) {
    json out = json::object();
    out["text_id"] = t.text_id;
    out["truth_category"] = t.truth_category ? json(*t.truth_category) : json(nullptr);
    out["text"] = t.text;
    return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const auto start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) tokens.emplace_back(text.substr(start, i - start));
    }
    if (tokens.empty()) throw EmptyText();
    return tokens;
}

void ExperimentDef::reindex() {
    index_.clear();
    for (std::size_t i = 0; i < practice_texts.size(); ++i) {
        index_.emplace(practice_texts[i].text_id, Location{kNoSeries, i});
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        for (std::size_t i = 0; i < series[s].texts.size(); ++i) {
            index_.emplace(series[s].texts[i].text_id, Location{s, i});
        }
    }
}

const TextItem* ExperimentDef::find_text(std::string_view text_id) const {
    auto it = index_.find(std::string(text_id));
    if (it == index_.end()) return nullptr;
    const auto [s, i] = it->second;
    return s == kNoSeries ? &practice_texts[i] : &series[s].texts[i];
}

std::string_view ExperimentDef::series_of(std::string_view text_id) const {
    auto it = index_.find(std::string(text_id));
    if (it == index_.end() || it->second.series_index == kNoSeries) return {};
    return series[it->second.series_index].series_id;
}

bool ExperimentDef::is_practice(std::string_view text_id) const {
    auto it = index_.find(std::string(text_id));
    return it != index_.end() && it->second.series_index == kNoSeries;
}

bool ExperimentDef::has_category(std::string_view c) const {
    return std::find(categories.begin(), categories.end(), c) != categories.end();
}

bool ExperimentDef::is_humorous(const Category& c) const {
    return c && std::find(humorous_categories.begin(), humorous_categories.end(), *c) !=
                    humorous_categories.end();
}

std::vector<std::string> ExperimentDef::annotation_text_ids() const {
    std::vector<std::string> ids;
    ids.reserve(annotation_text_count());
    for (const auto& s : series) {
        for (const auto& t : s.texts) ids.push_back(t.text_id);
    }
    return ids;
}

std::size_t ExperimentDef::annotation_text_count() const {
    std::size_t n = 0;
    for (const auto& s : series) n += s.texts.size();
    return n;
}

ExperimentDef load_experiment_json(const json& doc) {
    expect_keys(doc, "$",
                {"experiment_id", "categories", "humorous_categories", "practice_texts", "series"},
                {"config"});
    ExperimentDef def;
    def.experiment_id = get_string(doc, "experiment_id", "$.experiment_id");
    def.categories = get_string_list(doc, "categories", "$.categories");
    def.humorous_categories = get_string_list(doc, "humorous_categories", "$.humorous_categories");
    if (doc.contains("config")) def.config = parse_config(doc.at("config"), "$.config");

    const auto& practice = doc.at("practice_texts");
    if (!practice.is_array()) schema_fail("$.practice_texts", "expected an array");
    for (std::size_t i = 0; i < practice.size(); ++i) {
        def.practice_texts.push_back(
            parse_text(practice[i], "$.practice_texts[" + std::to_string(i) + "]"));
    }

    const auto& series = doc.at("series");
    if (!series.is_array()) schema_fail("$.series", "expected an array");
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto path = "$.series[" + std::to_string(s) + "]";
        expect_keys(series[s], path, {"series_id", "texts"});
        Series out;
        out.series_id = get_string(series[s], "series_id", path + ".series_id");
        const auto& texts = series[s].at("texts");
        if (!texts.is_array()) schema_fail(path + ".texts", "expected an array");
        for (std::size_t i = 0; i < texts.size(); ++i) {
            out.texts.push_back(parse_text(texts[i], path + ".texts[" + std::to_string(i) + "]"));
        }
        def.series.push_back(std::move(out));
    }

    validate(def);
    def.reindex();
    return def;
}

ExperimentDef load_experiment(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw SchemaError("$", std::string("not valid JSON: ") + e.what());
    }
    return load_experiment_json(doc);
}

ExperimentDef load_experiment_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open experiment file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_experiment(buf.str());
}

json to_json(const ExperimentDef& def) {
    json out = json::object();
    out["experiment_id"] = def.experiment_id;
    out["categories"] = def.categories;
    out["humorous_categories"] = def.humorous_categories;
    out["config"] = {{"min_word_delay_ms", def.config.min_word_delay_ms},
                     {"funniness_min", def.config.funniness_min},
                     {"funniness_max", def.config.funniness_max}};
    out["practice_texts"] = json::array();
    for (const auto& t : def.practice_texts) out["practice_texts"].push_back(text_to_json(t));
    out["series"] = json::array();
    for (const auto& s : def.series) {
        json texts = json::array();
        for (const auto& t : s.texts) texts.push_back(text_to_json(t));
        out["series"].push_back({{"series_id", s.series_id}, {"texts", std::move(texts)}});
    }
    return out;
}

}  // namespace spr
