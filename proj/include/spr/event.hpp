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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spr/corpus.hpp"

namespace spr {

enum class EventKind : std::uint8_t {
    SessionStarted,
    ProfileRecorded,
    InstructionsShown,
    InstructionsAcknowledged,
    PracticeStarted,
    PracticeCompleted,
    TextStarted,
    WordRevealed,
    InputSuppressed,
    CategorySelected,
    NoCategoryPrompted,
    NoCategoryCancelled,
    NoCategoryConfirmed,
    TextConfirmed,
    RatingPrompted,
    FunninessRated,
    SessionCompleted,
};

inline constexpr std::array kAllEventKinds = {
    EventKind::SessionStarted,      EventKind::ProfileRecorded,
    EventKind::InstructionsShown,   EventKind::InstructionsAcknowledged,
    EventKind::PracticeStarted,     EventKind::PracticeCompleted,
    EventKind::TextStarted,         EventKind::WordRevealed,
    EventKind::InputSuppressed,     EventKind::CategorySelected,
    EventKind::NoCategoryPrompted,  EventKind::NoCategoryCancelled,
    EventKind::NoCategoryConfirmed, EventKind::TextConfirmed,
    EventKind::RatingPrompted,      EventKind::FunninessRated,
    EventKind::SessionCompleted,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view name);

/// Payload keys. Each event kind carries exactly the fields listed by
/// payload_schema(kind); all other members of EventPayload stay at their
/// defaults.
enum class PayloadField : std::uint8_t {
    Age,
    Attitude,
    Category,
    Education,
    ExperimentId,
    FinalCategory,
    FullTextVisible,
    InputMethod,
    Mood,
    NativeLanguage,
    Order,
    OrderIndex,
    Practice,
    Reason,
    RespondentId,
    Score,
    Seed,
    Sex,
    TextId,
    Token,
    WordIndex,
    WordsRevealed,
};

std::string_view to_string(PayloadField field);

/// Fields of `kind`, sorted by key name.
std::span<const PayloadField> payload_schema(EventKind kind);

/// Intake questionnaire. Everything but respondent_id is free text and may be
/// empty.
struct RespondentProfile {
    std::string respondent_id;
    std::string sex;
    std::string age;
    std::string education;
    std::string native_language;
    std::string mood;
    std::string attitude;

    bool operator==(const RespondentProfile&) const = default;
};

struct EventPayload {
    std::string text_id;
    std::uint64_t word_index = 0;
    std::string token;
    std::string category;
    std::uint64_t words_revealed = 0;
    bool full_text_visible = false;
    std::string reason;
    Category final_category;
    std::int64_t score = 0;
    std::string input_method;
    std::uint64_t order_index = 0;
    bool practice = false;

    std::string respondent_id;
    std::string experiment_id;
    std::uint64_t seed = 0;
    std::vector<std::string> order;

    std::string sex;
    std::string age;
    std::string education;
    std::string native_language;
    std::string mood;
    std::string attitude;

    bool operator==(const EventPayload&) const = default;
};

struct AnnotationEvent {
    std::uint64_t seq = 0;
    std::string session_id;
    std::int64_t t_client_ms = 0;
    std::int64_t t_server_ms = 0;
    EventKind kind = EventKind::SessionStarted;
    EventPayload payload;

    bool operator==(const AnnotationEvent&) const = default;
};

RespondentProfile profile_of(const AnnotationEvent& e);

/// True when every payload member outside the kind's schema is at its default.
bool conforms_to_schema(const AnnotationEvent& e);

/// One JSON object on one line (no trailing newline). Keys: seq, session_id,
/// t_client_ms, t_server_ms, kind, then payload keys in alphabetical order.
std::string serialize_event(const AnnotationEvent& e);

/// Accepts any key order; requires exactly the kind's fields with the right
/// types. Throws MalformedLine, UnknownKind or SchemaMismatch.
AnnotationEvent parse_line(std::string_view line);

}  // namespace spr
