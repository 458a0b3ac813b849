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

#include "support.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <fmt/format.h>

#include "spr/event_log.hpp"

#ifndef SPR_DATA_DIR
#error "SPR_DATA_DIR must point at the repository's data directory"
#endif

namespace spr::testing {

namespace fs = std::filesystem;

const char* const kSmallExperiment = R"({
  "experiment_id": "small",
  "categories": ["metaphor", "irony", "pun"],
  "humorous_categories": ["pun"],
  "config": {"min_word_delay_ms": 1000, "funniness_min": 1, "funniness_max": 6},
  "practice_texts": [
    {"text_id": "practice-1", "truth_category": "pun", "text": "one two three"}
  ],
  "series": [
    {"series_id": "s1", "texts": [
      {"text_id": "s1-a", "truth_category": "pun", "text": "a b c d"},
      {"text_id": "s1-b", "truth_category": null, "text": "e f g"}
    ]},
    {"series_id": "s2", "texts": [
      {"text_id": "s2-a", "truth_category": "irony", "text": "h i"},
      {"text_id": "s2-b", "truth_category": "metaphor", "text": "j k l m n"}
    ]}
  ]
})";

ExperimentDef small_experiment() { return load_experiment(kSmallExperiment); }

fs::path data_dir() { return SPR_DATA_DIR; }

ExperimentDef five_series_experiment() { return load_experiment_file((data_dir() / "five_series.json").string()); }

nlohmann::json layout_document(std::size_t series, std::uint64_t seed) {
    SplitMix64 rng(seed);
    nlohmann::json doc;
    doc["experiment_id"] = "layout";
    doc["categories"] = {"metaphor", "irony", "pun"};
    doc["humorous_categories"] = {"pun"};
    doc["config"] = {{"min_word_delay_ms", 1000}, {"funniness_min", 1}, {"funniness_max", 6}};
    auto words = [&](std::int64_t n) {
        std::string text;
        for (std::int64_t i = 0; i < n; ++i) {
            if (i) text += ' ';
            text += fmt::format("w{}", rng.uniform_int(0, 99));
        }
        return text;
    };
    doc["practice_texts"] = {{{"text_id", "p1"}, {"truth_category", "pun"}, {"text", words(5)}}};
    const std::pair<const char*, int> layout[] = {{"pun", 4}, {"irony", 4}, {"metaphor", 4}, {nullptr, 12}};
    doc["series"] = nlohmann::json::array();
    for (std::size_t s = 0; s < series; ++s) {
        nlohmann::json texts = nlohmann::json::array();
        for (const auto& [category, count] : layout) {
            for (int i = 0; i < count; ++i) {
                nlohmann::json t;
                t["text_id"] = fmt::format("s{}-{}", s + 1, texts.size() + 1);
                t["truth_category"] = category ? nlohmann::json(category) : nlohmann::json(nullptr);
                t["text"] = words(rng.uniform_int(6, 18));
                texts.push_back(std::move(t));
            }
        }
        doc["series"].push_back({{"series_id", fmt::format("series-{}", s + 1)}, {"texts", std::move(texts)}});
    }
    return doc;
}

TempDir::TempDir() {
    static std::mt19937_64 gen{std::random_device{}()};
    path_ = fs::temp_directory_path() / fmt::format("spr-test-{:016x}", gen());
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Driver::Driver(const ExperimentDef& def, std::string respondent_id, std::uint64_t seed) : def_(def) {
    auto r = new_session(def, {"sess-" + respondent_id, respondent_id, seed, 0, 1'000'000});
    state_ = std::move(r.state);
    events_ = std::move(r.events);
}

TransitionResult Driver::send(Action action, std::int64_t t_client_ms) {
    auto r = apply(def_, state_, Command{std::move(action), t_client_ms}, 1'000'000 + t_client_ms);
    state_ = r.state;
    events_.insert(events_.end(), r.events.begin(), r.events.end());
    return r;
}

void Driver::start(std::int64_t& t) {
    RespondentProfile profile;
    profile.respondent_id = state_.respondent_id;
    profile.sex = "female";
    profile.age = "20";
    send(cmd::SubmitProfile{profile}, t += 100);
    send(cmd::AckInstructions{}, t += 100);
}

void Driver::read_text(std::int64_t& t, const Category& category, std::size_t at) {
    const auto* text = current_text(def_, state_);
    for (std::size_t w = 1; w <= text->tokens.size(); ++w) {
        send(cmd::AdvanceWord{}, t += 1000);
        if (category && w == at) send(cmd::SelectCategory{*category}, t += 10);
    }
    send(cmd::ConfirmText{}, t += 10);
    if (!category) send(cmd::ConfirmNoCategory{}, t += 10);
}

namespace {

/// The action a cooperative respondent would take next.
Action sensible_action(const ExperimentDef& def, const SessionState& s, SplitMix64& rng) {
    switch (s.phase) {
        case Phase::Intake: {
            RespondentProfile p;
            p.respondent_id = s.respondent_id;
            return cmd::SubmitProfile{p};
        }
        case Phase::Instructions: return cmd::AckInstructions{};
        case Phase::Practice:
        case Phase::Annotation: {
            const auto* text = current_text(def, s);
            if (s.awaiting_no_category_confirm) {
                return rng.bernoulli(0.8) ? Action{cmd::ConfirmNoCategory{}} : Action{cmd::CancelNoCategory{}};
            }
            if (s.revealed < text->tokens.size()) {
                if (s.revealed > 0 && rng.bernoulli(0.15)) {
                    const auto& c = def.categories[static_cast<std::size_t>(
                        rng.uniform_int(0, static_cast<std::int64_t>(def.categories.size()) - 1))];
                    return cmd::SelectCategory{c};
                }
                return cmd::AdvanceWord{};
            }
            if (!s.selected_category && rng.bernoulli(0.5)) {
                return cmd::SelectCategory{def.categories[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(def.categories.size()) - 1))]};
            }
            return cmd::ConfirmText{};
        }
        case Phase::Rating:
        case Phase::Completed:
            return cmd::Rate{static_cast<int>(rng.uniform_int(def.config.funniness_min, def.config.funniness_max)),
                             static_cast<InputMethod>(rng.uniform_int(0, 2))};
    }
    return cmd::AdvanceWord{};
}

/// Any action at all, including malformed ones.
Action arbitrary_action(const ExperimentDef& def, const SessionState& s, SplitMix64& rng) {
    switch (rng.uniform_int(0, 7)) {
        case 0: return cmd::AckInstructions{};
        case 1: {
            RespondentProfile p;
            p.respondent_id = rng.bernoulli(0.5) ? s.respondent_id : "someone-else";
            return cmd::SubmitProfile{p};
        }
        case 2: return cmd::AdvanceWord{};
        case 3: {
            if (rng.bernoulli(0.2)) return cmd::SelectCategory{"sarcasm"};
            if (rng.bernoulli(0.1)) return cmd::SelectCategory{std::string(kNoneLabel)};
            return cmd::SelectCategory{def.categories[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(def.categories.size()) - 1))]};
        }
        case 4: return cmd::ConfirmText{};
        case 5: return cmd::ConfirmNoCategory{};
        case 6: return cmd::CancelNoCategory{};
        default:
            return cmd::Rate{static_cast<int>(rng.uniform_int(def.config.funniness_min - 2, def.config.funniness_max + 2)),
                             static_cast<InputMethod>(rng.uniform_int(0, 2))};
    }
}

std::int64_t next_time(std::int64_t t, std::int64_t delay, SplitMix64& rng) {
    const auto roll = rng.uniform_int(0, 99);
    if (roll < 5) return t - rng.uniform_int(1, 500);        // clock regression
    if (roll < 25) return t + rng.uniform_int(0, delay);     // inside the delay window
    return t + delay + rng.uniform_int(0, delay);
}

}  // namespace

TraceCheck check_random_trace(const ExperimentDef& def, std::uint64_t seed, std::size_t steps) {
    SplitMix64 rng(seed);
    TraceCheck out;
    auto fail = [&](std::size_t step, const std::string& what) {
        out.failures.push_back(fmt::format("seed {} step {}: {}", seed, step, what));
    };

    const auto respondent = fmt::format("R{}", rng.uniform_int(0, 999));
    auto started = new_session(def, {"trace", respondent, seed, 0, 5000});
    SessionState state = started.state;
    std::vector<AnnotationEvent> events = started.events;

    std::set<std::string> confirmed;
    std::vector<std::string> expected_ratings;
    std::size_t rated = 0;
    std::int64_t t = 0;
    std::int64_t server = 5000;
    const auto delay = def.config.min_word_delay_ms;

    for (std::size_t step = 0; step < steps && state.phase != Phase::Completed; ++step) {
        const auto action = rng.bernoulli(0.75) ? sensible_action(def, state, rng) : arbitrary_action(def, state, rng);
        t = next_time(t, delay, rng);
        server += rng.uniform_int(-50, 2000);
        const Command command{action, t};
        const auto* text_before = current_text(def, state);
        const auto r = apply(def, state, command, server);
        ++out.commands;
        const auto& next = r.state;

        // Event stream bookkeeping.
        for (std::size_t i = 0; i < r.events.size(); ++i) {
            const auto& e = r.events[i];
            if (e.seq != state.cursor.next_seq + i) fail(step, "seq gap");
            if (e.t_client_ms != t) fail(step, "event not stamped with the command's client time");
            if (!conforms_to_schema(e)) fail(step, "event outside its payload schema");
            const auto& id = e.payload.text_id;
            const bool touches_text = e.kind == EventKind::WordRevealed || e.kind == EventKind::CategorySelected ||
                                      e.kind == EventKind::TextConfirmed ||
                                      e.kind == EventKind::NoCategoryPrompted ||
                                      e.kind == EventKind::NoCategoryConfirmed || e.kind == EventKind::TextStarted;
            if (touches_text && confirmed.contains(id)) fail(step, "event for already confirmed text " + id);
            if (e.kind == EventKind::TextConfirmed) {
                confirmed.insert(id);
                if (!e.payload.practice && def.is_humorous(e.payload.final_category)) expected_ratings.push_back(id);
            }
            if (e.kind == EventKind::FunninessRated) {
                if (rated >= expected_ratings.size() || expected_ratings[rated] != id) {
                    fail(step, "rating for a text that is not next in the humorous set: " + id);
                }
                ++rated;
            }
        }

        if (r.rejection) {
            ++out.rejections;
            if (!next.same_annotation_state(state)) fail(step, "rejection changed annotation state");
            if (*r.rejection == Rejection::MinDelay) {
                if (r.events.size() != 1 || r.events[0].kind != EventKind::InputSuppressed) {
                    fail(step, "min_delay rejection without a single input_suppressed event");
                }
                if (!state.last_reveal_at_ms || t - *state.last_reveal_at_ms >= delay) {
                    fail(step, "min_delay rejection outside the delay window");
                }
            } else if (!r.events.empty()) {
                fail(step, "rejection emitted events");
            }
            if (*r.rejection == Rejection::ClockRegression && t >= state.cursor.last_client_ms) {
                fail(step, "clock regression reported for a non-decreasing clock");
            }
        } else {
            if (t < state.cursor.last_client_ms) fail(step, "accepted a command from the past");
            if (std::holds_alternative<cmd::AdvanceWord>(action)) {
                if (state.last_reveal_at_ms && t - *state.last_reveal_at_ms < delay) {
                    fail(step, "word revealed inside the delay window");
                }
                if (next.revealed != state.revealed + 1) fail(step, "reveal did not add exactly one word");
            }
        }

        // Reveal is monotone within a text and bounded by its length.
        const auto* text_after = current_text(def, next);
        if (text_before && text_after == text_before && next.phase == state.phase && next.revealed < state.revealed) {
            fail(step, "revealed count decreased within a text");
        }
        if (text_after && next.revealed > text_after->tokens.size()) fail(step, "revealed beyond the text");
        if (text_after && text_after != text_before && next.revealed != 0) fail(step, "new text starts revealed");
        if (next.selected_category && !def.has_category(*next.selected_category)) {
            fail(step, "selected category outside the experiment");
        }
        if (next.phase == Phase::Rating && state.phase != Phase::Rating &&
            next.pending_ratings != expected_ratings) {
            fail(step, "rating queue differs from the humorous confirmations");
        }

        const auto shown = view(def, next);
        if (text_after) {
            const std::vector<std::string> prefix(text_after->tokens.begin(),
                                                  text_after->tokens.begin() +
                                                      static_cast<std::ptrdiff_t>(std::min(next.revealed, text_after->tokens.size())));
            if (shown.tokens != prefix) fail(step, "display differs from the revealed prefix");
        } else if (next.phase == Phase::Rating) {
            const auto& rated_id = next.pending_ratings.front();
            if (!confirmed.contains(rated_id) || shown.tokens != def.find_text(rated_id)->tokens) {
                fail(step, "rating screen shows a text that was not confirmed");
            }
        } else if (!shown.tokens.empty()) {
            fail(step, "tokens displayed outside reading");
        }

        events.insert(events.end(), r.events.begin(), r.events.end());
        state = next;
    }

    out.completed = state.phase == Phase::Completed;
    if (out.completed && rated != expected_ratings.size()) fail(steps, "completed with unrated humorous texts");

    // Reveal indices per text are 0,1,2,... and reveals are at least the delay apart.
    std::map<std::string, std::pair<std::uint64_t, std::int64_t>> reveals;  // text -> (next index, last time)
    for (const auto& e : events) {
        if (e.kind != EventKind::WordRevealed) continue;
        auto [it, fresh] = reveals.try_emplace(e.payload.text_id, 0, 0);
        auto& [next_index, last_time] = it->second;
        if (e.payload.word_index != next_index) fail(steps, "word_revealed index gap in " + e.payload.text_id);
        if (!fresh && e.t_client_ms - last_time < delay) fail(steps, "reveals closer than the delay");
        const auto* text = def.find_text(e.payload.text_id);
        if (!text || e.payload.word_index >= text->tokens.size() || text->tokens[e.payload.word_index] != e.payload.token) {
            fail(steps, "revealed token does not match the text");
        }
        next_index = e.payload.word_index + 1;
        last_time = e.t_client_ms;
    }

    SessionState folded;
    try {
        folded = fold_events(def, events);
        if (!(folded == state)) fail(steps, "fold of the event stream differs from the live state");
    } catch (const std::exception& e) {
        fail(steps, std::string("fold failed: ") + e.what());
    }
    const auto report = validate_log(events, def);
    if (out.completed ? !report.clean() : !report.only_incomplete()) {
        for (const auto& v : report.violations) {
            if (out.completed || v.kind != ViolationKind::IncompleteSession) {
                fail(steps, fmt::format("validator: {} at {}: {}", to_string(v.kind), v.seq.value_or(0), v.detail));
            }
        }
    }
    out.events = std::move(events);
    return out;
}

std::string random_text(SplitMix64& rng, std::size_t max_len) {
    static const std::vector<std::string> pieces = {
        "a", "Z", "0", " ", "\"", "\\", "/", "\n", "\t", "\x01", "\x1f", "{", "}", ",", ":",
        "\xc3\xa9",              // é
        "\xd0\xba\xd0\xbe\xd1\x82",  // кот
        "\xe2\x80\x94",          // dash
        "\xf0\x9f\x98\x80",      // emoji
        "null", "true",
    };
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_len)));
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        s += pieces[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pieces.size()) - 1))];
    }
    return s;
}

AnnotationEvent random_event(EventKind kind, SplitMix64& rng) {
    AnnotationEvent e;
    e.kind = kind;
    e.seq = rng.bernoulli(0.1) ? rng() : static_cast<std::uint64_t>(rng.uniform_int(0, 100000));
    e.session_id = random_text(rng, 6);
    e.t_client_ms = rng.bernoulli(0.1) ? static_cast<std::int64_t>(rng()) : rng.uniform_int(0, 10'000'000);
    e.t_server_ms = rng.bernoulli(0.1) ? static_cast<std::int64_t>(rng()) : rng.uniform_int(0, 2'000'000'000'000);
    auto& p = e.payload;
    auto u64 = [&] { return rng.bernoulli(0.1) ? rng() : static_cast<std::uint64_t>(rng.uniform_int(0, 50)); };
    for (const auto field : payload_schema(kind)) {
        switch (field) {
            case PayloadField::Age: p.age = random_text(rng, 3); break;
            case PayloadField::Attitude: p.attitude = random_text(rng, 4); break;
            case PayloadField::Category: p.category = random_text(rng, 4); break;
            case PayloadField::Education: p.education = random_text(rng, 4); break;
            case PayloadField::ExperimentId: p.experiment_id = random_text(rng, 4); break;
            case PayloadField::FinalCategory:
                if (rng.bernoulli(0.6)) p.final_category = random_text(rng, 4);
                break;
            case PayloadField::FullTextVisible: p.full_text_visible = rng.bernoulli(0.5); break;
            case PayloadField::InputMethod: p.input_method = random_text(rng, 3); break;
            case PayloadField::Mood: p.mood = random_text(rng, 4); break;
            case PayloadField::NativeLanguage: p.native_language = random_text(rng, 4); break;
            case PayloadField::Order: {
                const auto n = rng.uniform_int(0, 6);
                for (std::int64_t i = 0; i < n; ++i) p.order.push_back(random_text(rng, 3));
                break;
            }
            case PayloadField::OrderIndex: p.order_index = u64(); break;
            case PayloadField::Practice: p.practice = rng.bernoulli(0.5); break;
            case PayloadField::Reason: p.reason = random_text(rng, 4); break;
            case PayloadField::RespondentId: p.respondent_id = random_text(rng, 4); break;
            case PayloadField::Score: p.score = rng.uniform_int(-3, 9); break;
            case PayloadField::Seed: p.seed = rng(); break;
            case PayloadField::Sex: p.sex = random_text(rng, 3); break;
            case PayloadField::TextId: p.text_id = random_text(rng, 5); break;
            case PayloadField::Token: p.token = random_text(rng, 5); break;
            case PayloadField::WordIndex: p.word_index = u64(); break;
            case PayloadField::WordsRevealed: p.words_revealed = u64(); break;
        }
    }
    return e;
}

}  // namespace spr::testing
