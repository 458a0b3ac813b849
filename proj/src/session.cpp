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

#include "spr/session.hpp"

#include <algorithm>

#include "spr/errors.hpp"
#include "spr/prng.hpp"

namespace spr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

/// Accumulates the events of one transition against a working copy of the state.
class Transition {
public:
    Transition(const SessionState& before, std::int64_t t_client, std::int64_t t_server)
        : result_{before, {}, std::nullopt},
          t_client_(t_client),
          t_server_(std::max(t_server, before.cursor.last_server_ms)) {}

    SessionState& state() { return result_.state; }

    EventPayload& emit(EventKind kind) {
        auto& cursor = result_.state.cursor;
        AnnotationEvent e;
        e.seq = cursor.next_seq++;
        e.session_id = result_.state.session_id;
        e.t_client_ms = t_client_;
        e.t_server_ms = t_server_;
        e.kind = kind;
        cursor.last_client_ms = t_client_;
        cursor.last_server_ms = t_server_;
        result_.events.push_back(std::move(e));
        return result_.events.back().payload;
    }

    TransitionResult finish() && { return std::move(result_); }

private:
    TransitionResult result_;
    std::int64_t t_client_;
    std::int64_t t_server_;
};

TransitionResult reject(const SessionState& state, Rejection r) {
    return {state, {}, r};
}

bool reading_phase(Phase p) { return p == Phase::Practice || p == Phase::Annotation; }

void emit_text_started(Transition& tx, const ExperimentDef& def) {
    auto& s = tx.state();
    const auto* text = current_text(def, s);
    auto& p = tx.emit(EventKind::TextStarted);
    p.text_id = text->text_id;
    p.order_index = s.current_text_index;
    p.practice = in_practice(s);
}

void reset_text(SessionState& s) {
    s.revealed = 0;
    s.selected_category.reset();
    s.awaiting_no_category_confirm = false;
    s.last_reveal_at_ms.reset();
}

void emit_rating_prompt(Transition& tx) {
    auto& s = tx.state();
    auto& p = tx.emit(EventKind::RatingPrompted);
    p.text_id = s.pending_ratings.front();
    p.order_index = s.ratings_done;
}

/// Records the final decision for the current text and moves on.
void finalize_text(Transition& tx, const ExperimentDef& def, const Category& final_category) {
    auto& s = tx.state();
    const auto* text = current_text(def, s);
    const bool practice = in_practice(s);
    {
        auto& p = tx.emit(EventKind::TextConfirmed);
        p.text_id = text->text_id;
        p.final_category = final_category;
        p.words_revealed = s.revealed;
        p.practice = practice;
    }
    if (!practice && def.is_humorous(final_category)) s.pending_ratings.push_back(text->text_id);

    reset_text(s);
    ++s.current_text_index;
    if (practice) {
        if (s.current_text_index < def.practice_texts.size()) {
            emit_text_started(tx, def);
            return;
        }
        tx.emit(EventKind::PracticeCompleted);
        s.phase = Phase::Annotation;
        s.current_text_index = 0;
        emit_text_started(tx, def);
        return;
    }
    if (s.current_text_index < s.order.size()) {
        emit_text_started(tx, def);
        return;
    }
    if (!s.pending_ratings.empty()) {
        s.phase = Phase::Rating;
        emit_rating_prompt(tx);
    } else {
        s.phase = Phase::Completed;
        tx.emit(EventKind::SessionCompleted);
    }
}

TransitionResult confirm_none(Transition tx, const ExperimentDef& def) {
    auto& s = tx.state();
    auto& p = tx.emit(EventKind::NoCategoryConfirmed);
    p.text_id = current_text(def, s)->text_id;
    p.practice = in_practice(s);
    finalize_text(tx, def, std::nullopt);
    return std::move(tx).finish();
}

}  // namespace

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Intake: return "intake";
        case Phase::Instructions: return "instructions";
        case Phase::Practice: return "practice";
        case Phase::Annotation: return "annotation";
        case Phase::Rating: return "rating";
        case Phase::Completed: return "completed";
    }
    return "?";
}

std::string_view to_string(InputMethod method) {
    switch (method) {
        case InputMethod::Digit: return "digit";
        case InputMethod::Arrow: return "arrow";
        case InputMethod::Pointer: return "pointer";
    }
    return "?";
}

std::optional<InputMethod> parse_input_method(std::string_view name) {
    if (name == "digit") return InputMethod::Digit;
    if (name == "arrow") return InputMethod::Arrow;
    if (name == "pointer") return InputMethod::Pointer;
    return std::nullopt;
}

std::string_view to_string(Rejection r) {
    switch (r) {
        case Rejection::WrongPhase: return "wrong_phase";
        case Rejection::ClockRegression: return "clock_regression";
        case Rejection::MinDelay: return "min_delay";
        case Rejection::AlreadyComplete: return "already_complete";
        case Rejection::NothingRevealed: return "nothing_revealed";
        case Rejection::UnknownCategory: return "unknown_category";
        case Rejection::TextIncomplete: return "text_incomplete";
        case Rejection::AwaitingConfirmation: return "awaiting_confirmation";
        case Rejection::NotAwaitingConfirmation: return "not_awaiting_confirmation";
        case Rejection::InvalidScore: return "invalid_score";
        case Rejection::ProfileMismatch: return "profile_mismatch";
    }
    return "?";
}

std::string_view to_string(Prompt prompt) {
    switch (prompt) {
        case Prompt::Intake: return "intake";
        case Prompt::Instructions: return "instructions";
        case Prompt::Reading: return "reading";
        case Prompt::NoCategoryConfirm: return "no_category_confirm";
        case Prompt::Rating: return "rating";
        case Prompt::Complete: return "complete";
    }
    return "?";
}

bool SessionState::same_annotation_state(const SessionState& other) const {
    SessionState a = *this;
    SessionState b = other;
    a.cursor = {};
    b.cursor = {};
    return a == b;
}

bool in_practice(const SessionState& state) { return state.phase == Phase::Practice; }

const TextItem* current_text(const ExperimentDef& def, const SessionState& state) {
    if (state.phase == Phase::Practice) {
        if (state.current_text_index < def.practice_texts.size()) {
            return &def.practice_texts[state.current_text_index];
        }
        return nullptr;
    }
    if (state.phase == Phase::Annotation && state.current_text_index < state.order.size()) {
        return def.find_text(state.order[state.current_text_index]);
    }
    return nullptr;
}

TransitionResult new_session(const ExperimentDef& def, const SessionStart& start) {
    SessionState s;
    s.session_id = start.session_id;
    s.respondent_id = start.respondent_id;
    s.seed = start.seed;
    s.phase = Phase::Intake;
    s.order = shuffle_order(respondent_seed(start.seed, start.respondent_id),
                            def.annotation_text_ids());
    s.cursor.last_client_ms = start.t_client_ms;
    s.cursor.last_server_ms = start.t_server_ms;

    Transition tx(s, start.t_client_ms, start.t_server_ms);
    auto& p = tx.emit(EventKind::SessionStarted);
    p.experiment_id = def.experiment_id;
    p.respondent_id = start.respondent_id;
    p.seed = start.seed;
    p.order = tx.state().order;
    return std::move(tx).finish();
}

TransitionResult apply(const ExperimentDef& def, const SessionState& state, const Command& command,
                       std::int64_t t_server_ms) {
    if (state.phase == Phase::Completed) return reject(state, Rejection::WrongPhase);
    if (command.t_client_ms < state.cursor.last_client_ms) {
        return reject(state, Rejection::ClockRegression);
    }
    const auto t = command.t_client_ms;
    Transition tx(state, t, t_server_ms);
    auto& s = tx.state();

    return std::visit(
        overloaded{
            [&](const cmd::SubmitProfile& c) -> TransitionResult {
                if (s.phase != Phase::Intake) return reject(state, Rejection::WrongPhase);
                if (!c.profile.respondent_id.empty() && c.profile.respondent_id != s.respondent_id) {
                    return reject(state, Rejection::ProfileMismatch);
                }
                auto& p = tx.emit(EventKind::ProfileRecorded);
                p.respondent_id = s.respondent_id;
                p.sex = c.profile.sex;
                p.age = c.profile.age;
                p.education = c.profile.education;
                p.native_language = c.profile.native_language;
                p.mood = c.profile.mood;
                p.attitude = c.profile.attitude;
                s.phase = Phase::Instructions;
                tx.emit(EventKind::InstructionsShown);
                return std::move(tx).finish();
            },
            [&](const cmd::AckInstructions&) -> TransitionResult {
                if (s.phase != Phase::Instructions) return reject(state, Rejection::WrongPhase);
                tx.emit(EventKind::InstructionsAcknowledged);
                s.phase = Phase::Practice;
                s.current_text_index = 0;
                reset_text(s);
                tx.emit(EventKind::PracticeStarted);
                emit_text_started(tx, def);
                return std::move(tx).finish();
            },
            [&](const cmd::AdvanceWord&) -> TransitionResult {
                if (!reading_phase(s.phase)) return reject(state, Rejection::WrongPhase);
                if (s.awaiting_no_category_confirm) {
                    return reject(state, Rejection::AwaitingConfirmation);
                }
                const auto* text = current_text(def, s);
                if (s.last_reveal_at_ms && t - *s.last_reveal_at_ms < def.config.min_word_delay_ms) {
                    auto& p = tx.emit(EventKind::InputSuppressed);
                    p.text_id = text->text_id;
                    p.reason = std::string(to_string(Rejection::MinDelay));
                    p.practice = in_practice(s);
                    auto out = std::move(tx).finish();
                    out.rejection = Rejection::MinDelay;
                    return out;
                }
                if (s.revealed >= text->tokens.size()) {
                    return reject(state, Rejection::AlreadyComplete);
                }
                auto& p = tx.emit(EventKind::WordRevealed);
                p.text_id = text->text_id;
                p.word_index = s.revealed;
                p.token = text->tokens[s.revealed];
                p.practice = in_practice(s);
                ++s.revealed;
                s.last_reveal_at_ms = t;
                return std::move(tx).finish();
            },
            [&](const cmd::SelectCategory& c) -> TransitionResult {
                if (!reading_phase(s.phase)) return reject(state, Rejection::WrongPhase);
                if (s.awaiting_no_category_confirm) {
                    return reject(state, Rejection::AwaitingConfirmation);
                }
                if (s.revealed == 0) return reject(state, Rejection::NothingRevealed);
                if (!def.has_category(c.category)) return reject(state, Rejection::UnknownCategory);
                const auto* text = current_text(def, s);
                auto& p = tx.emit(EventKind::CategorySelected);
                p.text_id = text->text_id;
                p.category = c.category;
                p.words_revealed = s.revealed;
                p.full_text_visible = s.revealed == text->tokens.size();
                p.practice = in_practice(s);
                s.selected_category = c.category;
                return std::move(tx).finish();
            },
            [&](const cmd::ConfirmText&) -> TransitionResult {
                if (!reading_phase(s.phase)) return reject(state, Rejection::WrongPhase);
                const auto* text = current_text(def, s);
                if (s.revealed < text->tokens.size()) return reject(state, Rejection::TextIncomplete);
                if (s.selected_category) {
                    finalize_text(tx, def, s.selected_category);
                    return std::move(tx).finish();
                }
                if (s.awaiting_no_category_confirm) return confirm_none(std::move(tx), def);
                auto& p = tx.emit(EventKind::NoCategoryPrompted);
                p.text_id = text->text_id;
                p.words_revealed = s.revealed;
                p.practice = in_practice(s);
                s.awaiting_no_category_confirm = true;
                return std::move(tx).finish();
            },
            [&](const cmd::ConfirmNoCategory&) -> TransitionResult {
                if (!reading_phase(s.phase)) return reject(state, Rejection::WrongPhase);
                if (!s.awaiting_no_category_confirm) {
                    return reject(state, Rejection::NotAwaitingConfirmation);
                }
                return confirm_none(std::move(tx), def);
            },
            [&](const cmd::CancelNoCategory&) -> TransitionResult {
                if (!reading_phase(s.phase)) return reject(state, Rejection::WrongPhase);
                if (!s.awaiting_no_category_confirm) {
                    return reject(state, Rejection::NotAwaitingConfirmation);
                }
                auto& p = tx.emit(EventKind::NoCategoryCancelled);
                p.text_id = current_text(def, s)->text_id;
                p.practice = in_practice(s);
                s.awaiting_no_category_confirm = false;
                return std::move(tx).finish();
            },
            [&](const cmd::Rate& c) -> TransitionResult {
                if (s.phase != Phase::Rating) return reject(state, Rejection::WrongPhase);
                if (c.score < def.config.funniness_min || c.score > def.config.funniness_max) {
                    return reject(state, Rejection::InvalidScore);
                }
                auto& p = tx.emit(EventKind::FunninessRated);
                p.text_id = s.pending_ratings.front();
                p.score = c.score;
                p.input_method = std::string(to_string(c.method));
                s.pending_ratings.erase(s.pending_ratings.begin());
                ++s.ratings_done;
                if (!s.pending_ratings.empty()) {
                    emit_rating_prompt(tx);
                } else {
                    s.phase = Phase::Completed;
                    tx.emit(EventKind::SessionCompleted);
                }
                return std::move(tx).finish();
            },
        },
        command.action);
}

SessionState fold_events(const ExperimentDef& def, std::span<const AnnotationEvent> events) {
    if (events.empty() || events.front().kind != EventKind::SessionStarted) {
        throw Error("event stream must begin with session_started");
    }
    SessionState s;
    for (const auto& e : events) {
        const auto& p = e.payload;
        switch (e.kind) {
            case EventKind::SessionStarted:
                s = SessionState{};
                s.session_id = e.session_id;
                s.respondent_id = p.respondent_id;
                s.seed = p.seed;
                s.order = p.order;
                s.phase = Phase::Intake;
                break;
            case EventKind::ProfileRecorded:
                break;
            case EventKind::InstructionsShown:
                s.phase = Phase::Instructions;
                break;
            case EventKind::InstructionsAcknowledged:
                break;
            case EventKind::PracticeStarted:
                s.phase = Phase::Practice;
                break;
            case EventKind::PracticeCompleted:
                s.phase = Phase::Annotation;
                break;
            case EventKind::TextStarted:
                s.phase = p.practice ? Phase::Practice : Phase::Annotation;
                s.current_text_index = p.order_index;
                reset_text(s);
                break;
            case EventKind::WordRevealed:
                s.revealed = p.word_index + 1;
                s.last_reveal_at_ms = e.t_client_ms;
                break;
            case EventKind::InputSuppressed:
                break;
            case EventKind::CategorySelected:
                s.selected_category = p.category;
                break;
            case EventKind::NoCategoryPrompted:
                s.awaiting_no_category_confirm = true;
                break;
            case EventKind::NoCategoryCancelled:
            case EventKind::NoCategoryConfirmed:
                s.awaiting_no_category_confirm = false;
                break;
            case EventKind::TextConfirmed:
                if (!p.practice && def.is_humorous(p.final_category)) {
                    s.pending_ratings.push_back(p.text_id);
                }
                reset_text(s);
                ++s.current_text_index;
                break;
            case EventKind::RatingPrompted:
                s.phase = Phase::Rating;
                break;
            case EventKind::FunninessRated:
                if (!s.pending_ratings.empty()) s.pending_ratings.erase(s.pending_ratings.begin());
                ++s.ratings_done;
                break;
            case EventKind::SessionCompleted:
                s.phase = Phase::Completed;
                break;
        }
        s.cursor.next_seq = e.seq + 1;
        s.cursor.last_client_ms = e.t_client_ms;
        s.cursor.last_server_ms = e.t_server_ms;
    }
    return s;
}

DisplayState view(const ExperimentDef& def, const SessionState& state) {
    DisplayState d;
    d.phase = state.phase;
    d.categories = def.categories;
    d.funniness_min = def.config.funniness_min;
    d.funniness_max = def.config.funniness_max;
    d.min_word_delay_ms = def.config.min_word_delay_ms;
    switch (state.phase) {
        case Phase::Intake: d.prompt = Prompt::Intake; break;
        case Phase::Instructions: d.prompt = Prompt::Instructions; break;
        case Phase::Practice:
        case Phase::Annotation: {
            d.prompt = state.awaiting_no_category_confirm ? Prompt::NoCategoryConfirm : Prompt::Reading;
            d.practice = in_practice(state);
            const auto* text = current_text(def, state);
            if (text != nullptr) {
                d.tokens.assign(text->tokens.begin(),
                                text->tokens.begin() + static_cast<std::ptrdiff_t>(state.revealed));
                d.text_complete = state.revealed == text->tokens.size();
            }
            d.selected_category = state.selected_category;
            d.text_position = state.current_text_index + 1;
            d.text_count = d.practice ? def.practice_texts.size() : state.order.size();
            break;
        }
        case Phase::Rating: {
            d.prompt = Prompt::Rating;
            // Rated texts were confirmed, so every token has already been shown.
            if (const auto* text = def.find_text(state.pending_ratings.front())) d.tokens = text->tokens;
            d.text_complete = true;
            d.rating_position = state.ratings_done + 1;
            d.rating_count = state.ratings_done + state.pending_ratings.size();
            break;
        }
        case Phase::Completed: d.prompt = Prompt::Complete; break;
    }
    return d;
}

nlohmann::json to_json(const DisplayState& d) {
    nlohmann::json out = nlohmann::json::object();
    out["phase"] = std::string(to_string(d.phase));
    out["prompt"] = std::string(to_string(d.prompt));
    out["practice"] = d.practice;
    out["tokens"] = d.tokens;
    out["selected_category"] =
        d.selected_category ? nlohmann::json(*d.selected_category) : nlohmann::json(nullptr);
    out["text_complete"] = d.text_complete;
    out["text_position"] = d.text_position;
    out["text_count"] = d.text_count;
    out["rating_position"] = d.rating_position;
    out["rating_count"] = d.rating_count;
    out["funniness_min"] = d.funniness_min;
    out["funniness_max"] = d.funniness_max;
    out["min_word_delay_ms"] = d.min_word_delay_ms;
    out["categories"] = d.categories;
    return out;
}

}  // namespace spr
