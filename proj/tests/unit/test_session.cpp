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

#include <doctest.h>

#include <set>

#include "spr/errors.hpp"
#include "spr/session.hpp"
#include "support.hpp"

using namespace spr;
using testing::Driver;

namespace {

/// Session at the first annotation text after finishing practice with `pun`.
Driver annotating(const ExperimentDef& def, std::int64_t& t) {
    Driver d(def);
    d.start(t);
    d.read_text(t, Category{"pun"}, 2);
    REQUIRE(d.state().phase == Phase::Annotation);
    return d;
}

std::vector<EventKind> kinds(const std::vector<AnnotationEvent>& events) {
    std::vector<EventKind> out;
    for (const auto& e : events) out.push_back(e.kind);
    return out;
}

}  // namespace

TEST_CASE("new session on the five-series layout") {
    const auto def = testing::five_series_experiment();
    const auto r = new_session(def, {"s", "R01", 0, 0, 1});
    CHECK(r.state.phase == Phase::Intake);
    CHECK(r.state.order.size() == 120);
    CHECK(r.state.revealed == 0);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == EventKind::SessionStarted);
    CHECK(r.events[0].payload.order == r.state.order);
    CHECK(r.events[0].seq == 0);

    std::set<std::string> ids(r.state.order.begin(), r.state.order.end());
    const auto all = def.annotation_text_ids();
    CHECK(ids == std::set<std::string>(all.begin(), all.end()));

    CHECK(new_session(def, {"s", "R01", 0, 0, 1}).state.order == r.state.order);
    CHECK(new_session(def, {"s", "R02", 0, 0, 1}).state.order != r.state.order);
    CHECK(new_session(def, {"s", "R01", 1, 0, 1}).state.order != r.state.order);
    CHECK(r.state.order == shuffle_order(respondent_seed(0, "R01"), all));
}

TEST_CASE("phases advance intake -> instructions -> practice -> annotation") {
    const auto def = testing::small_experiment();
    Driver d(def);
    std::int64_t t = 0;
    RespondentProfile p;
    p.respondent_id = "R01";
    auto r = d.send(cmd::SubmitProfile{p}, t += 10);
    CHECK(kinds(r.events) == std::vector{EventKind::ProfileRecorded, EventKind::InstructionsShown});
    CHECK(d.state().phase == Phase::Instructions);
    r = d.send(cmd::AckInstructions{}, t += 10);
    CHECK(kinds(r.events) ==
          std::vector{EventKind::InstructionsAcknowledged, EventKind::PracticeStarted, EventKind::TextStarted});
    CHECK(d.state().phase == Phase::Practice);
    CHECK(r.events.back().payload.practice);
    CHECK(current_text(def, d.state())->text_id == "practice-1");
    d.read_text(t, std::nullopt);
    CHECK(d.state().phase == Phase::Annotation);
    CHECK(current_text(def, d.state())->text_id == d.state().order[0]);
}

TEST_CASE("profile must match the session respondent") {
    const auto def = testing::small_experiment();
    Driver d(def);
    RespondentProfile p;
    p.respondent_id = "R99";
    const auto r = d.send(cmd::SubmitProfile{p}, 5);
    CHECK(r.rejection == Rejection::ProfileMismatch);
    CHECK(r.events.empty());
}

TEST_CASE("advance inside the delay window is suppressed") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    d.send(cmd::AdvanceWord{}, t += 1000);
    const auto before = d.state();
    const auto r = d.send(cmd::AdvanceWord{}, t + 500);
    CHECK(r.rejection == Rejection::MinDelay);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == EventKind::InputSuppressed);
    CHECK(r.events[0].payload.reason == "min_delay");
    CHECK(d.state().revealed == 1);
    CHECK(d.state().same_annotation_state(before));
    CHECK(d.state().cursor.next_seq == before.cursor.next_seq + 1);

    const auto ok = d.send(cmd::AdvanceWord{}, t + 1000);
    CHECK_FALSE(ok.rejection);
    CHECK(d.state().revealed == 2);
    CHECK(ok.events[0].payload.word_index == 1);
}

TEST_CASE("first word of a new text is not gated") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    CHECK_FALSE(d.state().last_reveal_at_ms);
    CHECK_FALSE(d.send(cmd::AdvanceWord{}, t + 1).rejection);
}

TEST_CASE("zero delay never suppresses") {
    auto doc = nlohmann::json::parse(testing::kSmallExperiment);
    doc["config"]["min_word_delay_ms"] = 0;
    const auto def = load_experiment_json(doc);
    Driver d(def);
    std::int64_t t = 0;
    d.start(t);
    for (int i = 0; i < 3; ++i) CHECK_FALSE(d.send(cmd::AdvanceWord{}, t).rejection);
}

TEST_CASE("changed decision keeps both selections") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    d.send(cmd::AdvanceWord{}, t += 1000);
    auto a = d.send(cmd::SelectCategory{"pun"}, t += 10);
    auto b = d.send(cmd::SelectCategory{"irony"}, t += 10);
    CHECK(d.state().selected_category == Category{"irony"});
    CHECK(a.events[0].kind == EventKind::CategorySelected);
    CHECK(a.events[0].payload.category == "pun");
    CHECK(b.events[0].payload.category == "irony");
    CHECK(b.events[0].payload.words_revealed == 1);
}

TEST_CASE("selection needs a revealed word and a known category") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    CHECK(d.send(cmd::SelectCategory{"pun"}, t += 10).rejection == Rejection::NothingRevealed);
    d.send(cmd::AdvanceWord{}, t += 1000);
    CHECK(d.send(cmd::SelectCategory{"sarcasm"}, t += 10).rejection == Rejection::UnknownCategory);
    CHECK(d.send(cmd::SelectCategory{"none"}, t += 10).rejection == Rejection::UnknownCategory);
}

TEST_CASE("full_text_visible marks selections made after the last word") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    const auto n = current_text(def, d.state())->tokens.size();
    for (std::size_t i = 0; i < n; ++i) d.send(cmd::AdvanceWord{}, t += 1000);
    const auto r = d.send(cmd::SelectCategory{"metaphor"}, t += 10);
    CHECK(r.events[0].payload.full_text_visible);
    CHECK(r.events[0].payload.words_revealed == n);
    CHECK(d.send(cmd::AdvanceWord{}, t += 1000).rejection == Rejection::AlreadyComplete);
}

TEST_CASE("confirm without a category prompts and stays on the text") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    const auto text = current_text(def, d.state())->text_id;
    const auto n = current_text(def, d.state())->tokens.size();
    for (std::size_t i = 0; i < n; ++i) d.send(cmd::AdvanceWord{}, t += 1000);

    auto r = d.send(cmd::ConfirmText{}, t += 10);
    CHECK(kinds(r.events) == std::vector{EventKind::NoCategoryPrompted});
    CHECK(d.state().awaiting_no_category_confirm);
    CHECK(current_text(def, d.state())->text_id == text);
    CHECK(view(def, d.state()).prompt == Prompt::NoCategoryConfirm);

    CHECK(d.send(cmd::AdvanceWord{}, t += 1000).rejection == Rejection::AwaitingConfirmation);
    CHECK(d.send(cmd::SelectCategory{"pun"}, t += 10).rejection == Rejection::AwaitingConfirmation);

    r = d.send(cmd::CancelNoCategory{}, t += 10);
    CHECK(kinds(r.events) == std::vector{EventKind::NoCategoryCancelled});
    CHECK_FALSE(d.state().awaiting_no_category_confirm);
    CHECK(d.send(cmd::ConfirmNoCategory{}, t += 10).rejection == Rejection::NotAwaitingConfirmation);

    d.send(cmd::ConfirmText{}, t += 10);
    r = d.send(cmd::ConfirmNoCategory{}, t += 10);
    REQUIRE(r.events.size() >= 2);
    CHECK(r.events[0].kind == EventKind::NoCategoryConfirmed);
    CHECK(r.events[1].kind == EventKind::TextConfirmed);
    CHECK_FALSE(r.events[1].payload.final_category);
    CHECK(current_text(def, d.state())->text_id != text);
}

TEST_CASE("confirm requires the whole text") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    d.send(cmd::AdvanceWord{}, t += 1000);
    d.send(cmd::SelectCategory{"pun"}, t += 10);
    CHECK(d.send(cmd::ConfirmText{}, t += 10).rejection == Rejection::TextIncomplete);
}

TEST_CASE("ratings follow humorous confirmations in order") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    std::vector<std::string> humorous;
    // pun, none, pun, irony in presentation order
    const std::vector<Category> choices = {Category{"pun"}, std::nullopt, Category{"pun"}, Category{"irony"}};
    for (const auto& c : choices) {
        const auto id = current_text(def, d.state())->text_id;
        if (c == Category{"pun"}) humorous.push_back(id);
        d.read_text(t, c, 1);
    }
    CHECK(d.state().phase == Phase::Rating);
    CHECK(d.state().pending_ratings == humorous);
    const auto shown = view(def, d.state());
    CHECK(shown.prompt == Prompt::Rating);
    CHECK(shown.rating_position == 1);
    CHECK(shown.rating_count == 2);

    CHECK(d.send(cmd::Rate{7, InputMethod::Digit}, t += 10).rejection == Rejection::InvalidScore);
    CHECK(d.send(cmd::Rate{0, InputMethod::Digit}, t += 10).rejection == Rejection::InvalidScore);
    auto r = d.send(cmd::Rate{3, InputMethod::Arrow}, t += 10);
    CHECK(r.events[0].kind == EventKind::FunninessRated);
    CHECK(r.events[0].payload.text_id == humorous[0]);
    CHECK(r.events[0].payload.input_method == "arrow");
    CHECK(r.events[1].kind == EventKind::RatingPrompted);
    r = d.send(cmd::Rate{6, InputMethod::Pointer}, t += 10);
    CHECK(r.events.back().kind == EventKind::SessionCompleted);
    CHECK(d.state().phase == Phase::Completed);
    CHECK(d.send(cmd::AdvanceWord{}, t += 10).rejection == Rejection::WrongPhase);
}

TEST_CASE("no humorous confirmations skip the rating phase") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    for (int i = 0; i < 4; ++i) d.read_text(t, Category{"irony"});
    CHECK(d.state().phase == Phase::Completed);
    CHECK(d.events().back().kind == EventKind::SessionCompleted);
}

TEST_CASE("practice confirmations are never rated") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);  // practice text confirmed as pun
    CHECK(d.state().pending_ratings.empty());
}

TEST_CASE("client clock regression is rejected without events") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    const auto r = d.send(cmd::AdvanceWord{}, t - 1);
    CHECK(r.rejection == Rejection::ClockRegression);
    CHECK(r.events.empty());
}

TEST_CASE("commands out of phase") {
    const auto def = testing::small_experiment();
    Driver d(def);
    CHECK(d.send(cmd::AdvanceWord{}, 1).rejection == Rejection::WrongPhase);
    CHECK(d.send(cmd::AckInstructions{}, 1).rejection == Rejection::WrongPhase);
    CHECK(d.send(cmd::Rate{3, InputMethod::Digit}, 1).rejection == Rejection::WrongPhase);
}

TEST_CASE("server time never runs backwards") {
    const auto def = testing::small_experiment();
    auto s = new_session(def, {"s", "R01", 0, 0, 5000}).state;
    RespondentProfile p;
    p.respondent_id = "R01";
    const auto r = apply(def, s, Command{cmd::SubmitProfile{p}, 10}, 100);
    for (const auto& e : r.events) CHECK(e.t_server_ms == 5000);
}

TEST_CASE("display shows exactly the revealed prefix") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    const auto* text = current_text(def, d.state());
    for (std::size_t i = 0; i < 2 && i < text->tokens.size(); ++i) d.send(cmd::AdvanceWord{}, t += 1000);
    d.send(cmd::SelectCategory{"pun"}, t += 10);
    const auto shown = view(def, d.state());
    CHECK(shown.tokens.size() == std::min<std::size_t>(2, text->tokens.size()));
    CHECK(shown.selected_category == Category{"pun"});
    CHECK(shown.prompt == Prompt::Reading);
    CHECK(shown.text_position == 1);
    CHECK(shown.text_count == 4);
    const auto json = to_json(shown).dump();
    CHECK(json.find("truth") == std::string::npos);
    for (std::size_t i = shown.tokens.size(); i < text->tokens.size(); ++i) {
        CHECK(std::find(shown.tokens.begin(), shown.tokens.end(), text->tokens[i]) == shown.tokens.end());
    }
}

TEST_CASE("fold reconstructs the driven session") {
    const auto def = testing::small_experiment();
    std::int64_t t = 0;
    auto d = annotating(def, t);
    d.read_text(t, Category{"pun"}, 2);
    d.send(cmd::AdvanceWord{}, t += 1000);
    d.send(cmd::AdvanceWord{}, t + 10);  // suppressed
    CHECK(fold_events(def, d.events()) == d.state());
    CHECK_THROWS_AS(fold_events(def, std::span<const AnnotationEvent>()), Error);
}

TEST_CASE("random command sequences keep every invariant") {
    const auto def = testing::small_experiment();
    std::size_t completed = 0;
    std::size_t rejections = 0;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const auto check = testing::check_random_trace(def, seed, 400);
        for (const auto& f : check.failures) FAIL_CHECK(f);
        completed += check.completed;
        rejections += check.rejections;
    }
    CHECK(completed > 1000);
    CHECK(rejections > 1000);
}

TEST_CASE("random traces on the larger layout") {
    const auto def = load_experiment_json(testing::layout_document(1, 5));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto check = testing::check_random_trace(def, seed, 3000);
        for (const auto& f : check.failures) FAIL_CHECK(f);
    }
}
