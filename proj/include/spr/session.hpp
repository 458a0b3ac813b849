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
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spr/corpus.hpp"
#include "spr/event.hpp"

namespace spr {

enum class Phase : std::uint8_t { Intake, Instructions, Practice, Annotation, Rating, Completed };

std::string_view to_string(Phase phase);

/// How a funniness score was entered: number keys, arrow keys, or the mouse.
enum class InputMethod : std::uint8_t { Digit, Arrow, Pointer };

std::string_view to_string(InputMethod method);
std::optional<InputMethod> parse_input_method(std::string_view name);

namespace cmd {
struct AckInstructions {
    bool operator==(const AckInstructions&) const = default;
};
struct SubmitProfile {
    RespondentProfile profile;
    bool operator==(const SubmitProfile&) const = default;
};
struct AdvanceWord {
    bool operator==(const AdvanceWord&) const = default;
};
struct SelectCategory {
    std::string category;
    bool operator==(const SelectCategory&) const = default;
};
struct ConfirmText {
    bool operator==(const ConfirmText&) const = default;
};
struct ConfirmNoCategory {
    bool operator==(const ConfirmNoCategory&) const = default;
};
struct CancelNoCategory {
    bool operator==(const CancelNoCategory&) const = default;
};
struct Rate {
    int score = 0;
    InputMethod method = InputMethod::Digit;
    bool operator==(const Rate&) const = default;
};
}  // namespace cmd

using Action = std::variant<cmd::AckInstructions, cmd::SubmitProfile, cmd::AdvanceWord,
                            cmd::SelectCategory, cmd::ConfirmText, cmd::ConfirmNoCategory,
                            cmd::CancelNoCategory, cmd::Rate>;

struct Command {
    Action action;
    /// Monotonic client clock, relative to the start of the session.
    std::int64_t t_client_ms = 0;

    bool operator==(const Command&) const = default;
};

enum class Rejection : std::uint8_t {
    WrongPhase,
    ClockRegression,
    MinDelay,
    AlreadyComplete,
    NothingRevealed,
    UnknownCategory,
    TextIncomplete,
    AwaitingConfirmation,
    NotAwaitingConfirmation,
    InvalidScore,
    ProfileMismatch,
};

std::string_view to_string(Rejection r);

/// Log bookkeeping. Advances only when events are emitted.
struct LogCursor {
    std::uint64_t next_seq = 0;
    std::int64_t last_client_ms = 0;
    std::int64_t last_server_ms = 0;

    bool operator==(const LogCursor&) const = default;
};

struct SessionState {
    std::string session_id;
    std::string respondent_id;
    std::uint64_t seed = 0;  // experiment seed; the order uses respondent_seed(seed, id)
    Phase phase = Phase::Intake;
    std::vector<std::string> order;
    /// Index into practice texts during Practice, into `order` during Annotation.
    std::size_t current_text_index = 0;
    std::size_t revealed = 0;
    Category selected_category;
    bool awaiting_no_category_confirm = false;
    std::optional<std::int64_t> last_reveal_at_ms;
    std::vector<std::string> pending_ratings;
    std::size_t ratings_done = 0;
    LogCursor cursor;

    bool operator==(const SessionState&) const = default;

    /// Everything except the log cursor. Rejections never change this part.
    bool same_annotation_state(const SessionState& other) const;
};

struct TransitionResult {
    SessionState state;
    std::vector<AnnotationEvent> events;
    std::optional<Rejection> rejection;
};

struct SessionStart {
    std::string session_id;
    std::string respondent_id;
    std::uint64_t seed = 0;
    std::int64_t t_client_ms = 0;
    std::int64_t t_server_ms = 0;
};

/// Creates a session in the Intake phase with a per-respondent shuffle of all
/// annotation texts. The result carries the session_started event.
TransitionResult new_session(const ExperimentDef& def, const SessionStart& start);

/// Pure transition. `t_server_ms` stamps the emitted events (clamped so it
/// never runs backwards within the session).
TransitionResult apply(const ExperimentDef& def, const SessionState& state, const Command& command,
                       std::int64_t t_server_ms);

/// The text the respondent is reading right now, if any.
const TextItem* current_text(const ExperimentDef& def, const SessionState& state);
bool in_practice(const SessionState& state);

/// Rebuilds a state purely from its event stream, without running apply.
/// Throws Error when the stream does not start with session_started.
SessionState fold_events(const ExperimentDef& def, std::span<const AnnotationEvent> events);

enum class Prompt : std::uint8_t { Intake, Instructions, Reading, NoCategoryConfirm, Rating, Complete };

std::string_view to_string(Prompt prompt);

/// What the respondent may see. Never contains unrevealed tokens or the
/// ground-truth category.
struct DisplayState {
    Phase phase = Phase::Intake;
    Prompt prompt = Prompt::Intake;
    bool practice = false;
    std::vector<std::string> tokens;
    Category selected_category;
    bool text_complete = false;
    std::size_t text_position = 0;  // 1-based; 0 outside reading
    std::size_t text_count = 0;
    std::size_t rating_position = 0;  // 1-based; 0 outside rating
    std::size_t rating_count = 0;
    int funniness_min = 1;
    int funniness_max = 6;
    std::int64_t min_word_delay_ms = 0;
    std::vector<std::string> categories;

    bool operator==(const DisplayState&) const = default;
};

DisplayState view(const ExperimentDef& def, const SessionState& state);

nlohmann::json to_json(const DisplayState& d);

}  // namespace spr
