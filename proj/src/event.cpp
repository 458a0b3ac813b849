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

#include "spr/event.hpp"

#include <algorithm>
#include <limits>

#include "spr/errors.hpp"

namespace spr {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using F = PayloadField;

constexpr std::array<std::string_view, kAllEventKinds.size()> kKindNames = {
    "session_started",     "profile_recorded",      "instructions_shown",
    "instructions_acknowledged", "practice_started", "practice_completed",
    "text_started",        "word_revealed",         "input_suppressed",
    "category_selected",   "no_category_prompted",  "no_category_cancelled",
    "no_category_confirmed", "text_confirmed",      "rating_prompted",
    "funniness_rated",     "session_completed",
};

constexpr std::array<std::string_view, 22> kFieldNames = {
    "age",   "attitude",   "category",   "education",   "experiment_id", "final_category",
    "full_text_visible", "input_method", "mood", "native_language", "order", "order_index",
    "practice", "reason", "respondent_id", "score", "seed", "sex", "text_id", "token",
    "word_index", "words_revealed",
};

constexpr std::array kSessionStarted = {F::ExperimentId, F::Order, F::RespondentId, F::Seed};
constexpr std::array kProfileRecorded = {F::Age,  F::Attitude,       F::Education,   F::Mood,
                                         F::NativeLanguage, F::RespondentId, F::Sex};
constexpr std::array kTextStarted = {F::OrderIndex, F::Practice, F::TextId};
constexpr std::array kWordRevealed = {F::Practice, F::TextId, F::Token, F::WordIndex};
constexpr std::array kInputSuppressed = {F::Practice, F::Reason, F::TextId};
constexpr std::array kCategorySelected = {F::Category, F::FullTextVisible, F::Practice, F::TextId,
                                          F::WordsRevealed};
constexpr std::array kNoCategoryPrompted = {F::Practice, F::TextId, F::WordsRevealed};
constexpr std::array kPracticeText = {F::Practice, F::TextId};
constexpr std::array kTextConfirmed = {F::FinalCategory, F::Practice, F::TextId, F::WordsRevealed};
constexpr std::array kRatingPrompted = {F::OrderIndex, F::TextId};
constexpr std::array kFunninessRated = {F::InputMethod, F::Score, F::TextId};

constexpr std::array<std::string_view, 5> kHeaderKeys = {"seq", "session_id", "t_client_ms",
                                                         "t_server_ms", "kind"};

void write_field(ordered_json& out, PayloadField f, const EventPayload& p) {
    const auto key = std::string(to_string(f));
    switch (f) {
        case F::Age: out[key] = p.age; break;
        case F::Attitude: out[key] = p.attitude; break;
        case F::Category: out[key] = p.category; break;
        case F::Education: out[key] = p.education; break;
        case F::ExperimentId: out[key] = p.experiment_id; break;
        case F::FinalCategory:
            out[key] = p.final_category ? ordered_json(*p.final_category) : ordered_json(nullptr);
            break;
        case F::FullTextVisible: out[key] = p.full_text_visible; break;
        case F::InputMethod: out[key] = p.input_method; break;
        case F::Mood: out[key] = p.mood; break;
        case F::NativeLanguage: out[key] = p.native_language; break;
        case F::Order: out[key] = p.order; break;
        case F::OrderIndex: out[key] = p.order_index; break;
        case F::Practice: out[key] = p.practice; break;
        case F::Reason: out[key] = p.reason; break;
        case F::RespondentId: out[key] = p.respondent_id; break;
        case F::Score: out[key] = p.score; break;
        case F::Seed: out[key] = p.seed; break;
        case F::Sex: out[key] = p.sex; break;
        case F::TextId: out[key] = p.text_id; break;
        case F::Token: out[key] = p.token; break;
        case F::WordIndex: out[key] = p.word_index; break;
        case F::WordsRevealed: out[key] = p.words_revealed; break;
    }
}

void copy_field(PayloadField f, const EventPayload& from, EventPayload& to) {
    switch (f) {
        case F::Age: to.age = from.age; break;
        case F::Attitude: to.attitude = from.attitude; break;
        case F::Category: to.category = from.category; break;
        case F::Education: to.education = from.education; break;
        case F::ExperimentId: to.experiment_id = from.experiment_id; break;
        case F::FinalCategory: to.final_category = from.final_category; break;
        case F::FullTextVisible: to.full_text_visible = from.full_text_visible; break;
        case F::InputMethod: to.input_method = from.input_method; break;
        case F::Mood: to.mood = from.mood; break;
        case F::NativeLanguage: to.native_language = from.native_language; break;
        case F::Order: to.order = from.order; break;
        case F::OrderIndex: to.order_index = from.order_index; break;
        case F::Practice: to.practice = from.practice; break;
        case F::Reason: to.reason = from.reason; break;
        case F::RespondentId: to.respondent_id = from.respondent_id; break;
        case F::Score: to.score = from.score; break;
        case F::Seed: to.seed = from.seed; break;
        case F::Sex: to.sex = from.sex; break;
        case F::TextId: to.text_id = from.text_id; break;
        case F::Token: to.token = from.token; break;
        case F::WordIndex: to.word_index = from.word_index; break;
        case F::WordsRevealed: to.words_revealed = from.words_revealed; break;
    }
}

struct FieldReader {
    std::string_view kind;
    std::string_view field;

    [[noreturn]] void fail(const std::string& why) const {
        throw SchemaMismatch(std::string(kind), std::string(field), why);
    }
    std::string str(const json& v) const {
        if (!v.is_string()) fail("expected a string");
        return v.get<std::string>();
    }
    bool boolean(const json& v) const {
        if (!v.is_boolean()) fail("expected a boolean");
        return v.get<bool>();
    }
    std::uint64_t unsigned_int(const json& v) const {
        if (!v.is_number_unsigned()) fail("expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::int64_t signed_int(const json& v) const {
        if (!v.is_number_integer()) fail("expected an integer");
        if (v.is_number_unsigned() &&
            v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
            fail("integer out of range");
        }
        return v.get<std::int64_t>();
    }
};

void read_field(const json& v, PayloadField f, EventPayload& p, const FieldReader& r) {
    switch (f) {
        case F::Age: p.age = r.str(v); break;
        case F::Attitude: p.attitude = r.str(v); break;
        case F::Category: p.category = r.str(v); break;
        case F::Education: p.education = r.str(v); break;
        case F::ExperimentId: p.experiment_id = r.str(v); break;
        case F::FinalCategory:
            if (v.is_null()) {
                p.final_category.reset();
            } else if (v.is_string()) {
                p.final_category = v.get<std::string>();
            } else {
                r.fail("expected a string or null");
            }
            break;
        case F::FullTextVisible: p.full_text_visible = r.boolean(v); break;
        case F::InputMethod: p.input_method = r.str(v); break;
        case F::Mood: p.mood = r.str(v); break;
        case F::NativeLanguage: p.native_language = r.str(v); break;
        case F::Order:
            if (!v.is_array()) r.fail("expected an array of strings");
            p.order.clear();
            for (const auto& item : v) p.order.push_back(r.str(item));
            break;
        case F::OrderIndex: p.order_index = r.unsigned_int(v); break;
        case F::Practice: p.practice = r.boolean(v); break;
        case F::Reason: p.reason = r.str(v); break;
        case F::RespondentId: p.respondent_id = r.str(v); break;
        case F::Score: p.score = r.signed_int(v); break;
        case F::Seed: p.seed = r.unsigned_int(v); break;
        case F::Sex: p.sex = r.str(v); break;
        case F::TextId: p.text_id = r.str(v); break;
        case F::Token: p.token = r.str(v); break;
        case F::WordIndex: p.word_index = r.unsigned_int(v); break;
        case F::WordsRevealed: p.words_revealed = r.unsigned_int(v); break;
    }
}

}  // namespace

std::string_view to_string(EventKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == name) return kAllEventKinds[i];
    }
    return std::nullopt;
}

std::string_view to_string(PayloadField field) {
    return kFieldNames[static_cast<std::size_t>(field)];
}

std::span<const PayloadField> payload_schema(EventKind kind) {
    switch (kind) {
        case EventKind::SessionStarted: return kSessionStarted;
        case EventKind::ProfileRecorded: return kProfileRecorded;
        case EventKind::TextStarted: return kTextStarted;
        case EventKind::WordRevealed: return kWordRevealed;
        case EventKind::InputSuppressed: return kInputSuppressed;
        case EventKind::CategorySelected: return kCategorySelected;
        case EventKind::NoCategoryPrompted: return kNoCategoryPrompted;
        case EventKind::NoCategoryCancelled:
        case EventKind::NoCategoryConfirmed: return kPracticeText;
        case EventKind::TextConfirmed: return kTextConfirmed;
        case EventKind::RatingPrompted: return kRatingPrompted;
        case EventKind::FunninessRated: return kFunninessRated;
        case EventKind::InstructionsShown:
        case EventKind::InstructionsAcknowledged:
        case EventKind::PracticeStarted:
        case EventKind::PracticeCompleted:
        case EventKind::SessionCompleted: return {};
    }
    return {};
}

RespondentProfile profile_of(const AnnotationEvent& e) {
    const auto& p = e.payload;
    return {p.respondent_id, p.sex, p.age, p.education, p.native_language, p.mood, p.attitude};
}

bool conforms_to_schema(const AnnotationEvent& e) {
    EventPayload projected;
    for (auto f : payload_schema(e.kind)) copy_field(f, e.payload, projected);
    return projected == e.payload;
}

std::string serialize_event(const AnnotationEvent& e) {
    ordered_json out = ordered_json::object();
    out["seq"] = e.seq;
    out["session_id"] = e.session_id;
    out["t_client_ms"] = e.t_client_ms;
    out["t_server_ms"] = e.t_server_ms;
    out["kind"] = std::string(to_string(e.kind));
    for (auto f : payload_schema(e.kind)) write_field(out, f, e.payload);
    return out.dump(-1, ' ', false, json::error_handler_t::strict);
}

AnnotationEvent parse_line(std::string_view line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw MalformedLine(e.what());
    }
    if (!doc.is_object()) throw MalformedLine("expected a JSON object");

    auto kind_it = doc.find("kind");
    if (kind_it == doc.end()) throw SchemaMismatch("?", "kind", "missing field");
    if (!kind_it->is_string()) throw SchemaMismatch("?", "kind", "expected a string");
    const auto kind_name = kind_it->get<std::string>();
    const auto kind = parse_event_kind(kind_name);
    if (!kind) throw UnknownKind(kind_name);

    AnnotationEvent e;
    e.kind = *kind;
    const auto schema = payload_schema(e.kind);

    for (const auto& [key, _] : doc.items()) {
        const bool known =
            std::find(kHeaderKeys.begin(), kHeaderKeys.end(), key) != kHeaderKeys.end() ||
            std::any_of(schema.begin(), schema.end(),
                        [&](PayloadField f) { return to_string(f) == key; });
        if (!known) throw SchemaMismatch(kind_name, key, "field not allowed for this kind");
    }

    auto require = [&](std::string_view key) -> const json& {
        auto it = doc.find(key);
        if (it == doc.end()) throw SchemaMismatch(kind_name, std::string(key), "missing field");
        return *it;
    };
    auto reader = [&](std::string_view field) { return FieldReader{kind_name, field}; };

    e.seq = reader("seq").unsigned_int(require("seq"));
    e.session_id = reader("session_id").str(require("session_id"));
    e.t_client_ms = reader("t_client_ms").signed_int(require("t_client_ms"));
    e.t_server_ms = reader("t_server_ms").signed_int(require("t_server_ms"));
    for (auto f : schema) {
        const auto key = to_string(f);
        read_field(require(key), f, e.payload, reader(key));
    }
    return e;
}

}  // namespace spr
