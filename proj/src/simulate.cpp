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

#include "spr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "spr/errors.hpp"
#include "spr/prng.hpp"
#include "spr/session.hpp"

namespace spr {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) { throw SchemaError(path, what); }

void only_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
    if (!obj.is_object()) bad(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) bad(path + "." + key, "unknown field");
    }
}

double probability(const json& v, const std::string& path) {
    if (!v.is_number()) bad(path, "expected a number");
    const auto p = v.get<double>();
    if (!(p >= 0.0 && p <= 1.0)) bad(path, "must be within [0, 1]");
    return p;
}

std::int64_t non_negative(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad(path, "expected a non-negative integer");
    return v.get<std::int64_t>();
}

TriggerPlacement parse_placement(const json& v, const std::string& path) {
    only_keys(v, path, {"mode", "position", "fraction", "spread"});
    if (!v.contains("mode") || !v.at("mode").is_string()) bad(path + ".mode", "expected a string");
    TriggerPlacement t;
    const auto mode = v.at("mode").get<std::string>();
    if (mode == "fixed") {
        t.mode = TriggerPlacement::Mode::Fixed;
        if (!v.contains("position")) bad(path + ".position", "missing field");
        t.position = static_cast<std::size_t>(non_negative(v.at("position"), path + ".position"));
        if (t.position == 0) bad(path + ".position", "positions are 1-based");
    } else if (mode == "uniform") {
        t.mode = TriggerPlacement::Mode::Uniform;
    } else if (mode == "fraction") {
        t.mode = TriggerPlacement::Mode::Fraction;
        if (v.contains("fraction")) t.fraction = probability(v.at("fraction"), path + ".fraction");
        if (v.contains("spread")) {
            t.spread = static_cast<std::size_t>(non_negative(v.at("spread"), path + ".spread"));
        }
    } else {
        bad(path + ".mode", "expected 'fixed', 'uniform' or 'fraction'");
    }
    return t;
}

json placement_json(const TriggerPlacement& t) {
    switch (t.mode) {
        case TriggerPlacement::Mode::Fixed: return {{"mode", "fixed"}, {"position", t.position}};
        case TriggerPlacement::Mode::Uniform: return {{"mode", "uniform"}};
        case TriggerPlacement::Mode::Fraction:
            return {{"mode", "fraction"}, {"fraction", t.fraction}, {"spread", t.spread}};
    }
    return {};
}

void check_against(const ExperimentDef& def, const SimulationPolicy& policy) {
    auto known = [&](const std::string& label) { return label == kNoneLabel || def.has_category(label); };
    for (const auto& [label, _] : policy.trigger_by_category) {
        if (!def.has_category(label)) {
            throw ValidationError("policy.trigger_by_category." + label, "unknown category");
        }
    }
    for (const auto& [truth, row] : policy.misassignment) {
        if (!known(truth)) throw ValidationError("policy.misassignment." + truth, "unknown category");
        for (const auto& [assigned, _] : row) {
            if (!known(assigned)) {
                throw ValidationError("policy.misassignment." + truth + "." + assigned, "unknown category");
            }
        }
    }
}

std::size_t place_trigger(const TriggerPlacement& t, std::size_t length, SplitMix64& rng) {
    const auto n = static_cast<std::int64_t>(length);
    std::int64_t p = 1;
    switch (t.mode) {
        case TriggerPlacement::Mode::Fixed: p = static_cast<std::int64_t>(t.position); break;
        case TriggerPlacement::Mode::Uniform: p = rng.uniform_int(1, n); break;
        case TriggerPlacement::Mode::Fraction: {
            const auto spread = static_cast<std::int64_t>(t.spread);
            p = static_cast<std::int64_t>(std::llround(t.fraction * static_cast<double>(n)));
            p += rng.uniform_int(-spread, spread);
            break;
        }
    }
    return static_cast<std::size_t>(std::clamp<std::int64_t>(p, 1, n));
}

class Simulator {
public:
    Simulator(const ExperimentDef& def, const SimulationPolicy& policy, const std::string& respondent_id,
              std::uint64_t seed)
        : def_(def), policy_(policy), rng_(respondent_seed(seed, respondent_id) ^ 0x5851F42D4C957F2DULL) {
        out_.session_id = "sim-" + respondent_id;
        out_.respondent_id = respondent_id;
        auto started = new_session(def_, {out_.session_id, respondent_id, seed, 0, kSimulatedEpochMs});
        state_ = std::move(started.state);
        append(started.events);
    }

    SimulatedSession run() && {
        plan_assignments();

        t_ += 4000 + rng_.uniform_int(0, 3000);
        RespondentProfile profile;
        profile.respondent_id = out_.respondent_id;
        profile.sex = rng_.bernoulli(0.5) ? "female" : "male";
        profile.age = std::to_string(rng_.uniform_int(18, 25));
        profile.education = "undergraduate";
        profile.native_language = "ru";
        profile.mood = std::array{"good", "neutral", "tired"}[rng_.uniform_int(0, 2)];
        profile.attitude = std::array{"positive", "neutral"}[rng_.uniform_int(0, 1)];
        send(cmd::SubmitProfile{profile});
        t_ += 8000 + rng_.uniform_int(0, 8000);
        send(cmd::AckInstructions{});

        while (state_.phase == Phase::Practice || state_.phase == Phase::Annotation) {
            const auto* text = current_text(def_, state_);
            if (state_.phase == Phase::Practice) {
                run_text(*text, text->truth_category, false);
            } else {
                const auto& assigned = assignments_.at(text->text_id);
                run_text(*text, assigned, true);
            }
        }
        while (state_.phase == Phase::Rating) {
            t_ += 1500 + rng_.uniform_int(0, 1500);
            const auto score = static_cast<int>(rng_.uniform_int(def_.config.funniness_min, def_.config.funniness_max));
            const auto method = static_cast<InputMethod>(rng_.uniform_int(0, 2));
            send(cmd::Rate{score, method});
        }
        return std::move(out_);
    }

private:
    void append(const std::vector<AnnotationEvent>& events) {
        out_.events.insert(out_.events.end(), events.begin(), events.end());
    }

    TransitionResult send(Action action, std::optional<Rejection> expected = std::nullopt) {
        auto r = apply(def_, state_, Command{std::move(action), t_}, kSimulatedEpochMs + t_);
        if (r.rejection != expected) {
            throw Error("simulator drove the session into an unexpected state (" +
                        std::string(r.rejection ? to_string(*r.rejection) : "accepted") + ")");
        }
        append(r.events);
        state_ = std::move(r.state);
        return r;
    }

    /// Decides the final category of every annotation text up front.
    void plan_assignments() {
        std::map<std::string, std::vector<std::string>> by_truth;
        for (const auto& id : state_.order) {
            const auto* text = def_.find_text(id);
            assignments_[id] = text->truth_category;
            by_truth[label_of(text->truth_category)].push_back(id);
        }
        auto category_of = [](const std::string& label) -> Category {
            return label == kNoneLabel ? Category{} : Category{label};
        };
        for (const auto& [truth, row] : policy_.misassignment) {
            auto it = by_truth.find(truth);
            if (it == by_truth.end()) continue;
            auto texts = it->second;
            if (policy_.misassignment_mode == SimulationPolicy::MisassignmentMode::Exact) {
                shuffle_in_place(rng_(), std::span<std::string>(texts));
                std::size_t next = 0;
                for (const auto& [assigned, rate] : row) {
                    auto quota = static_cast<std::size_t>(std::llround(rate * static_cast<double>(texts.size())));
                    for (; quota > 0 && next < texts.size(); --quota, ++next) {
                        assignments_[texts[next]] = category_of(assigned);
                    }
                }
            } else {
                for (const auto& id : texts) {
                    const double u = rng_.uniform();
                    double cumulative = 0.0;
                    for (const auto& [assigned, rate] : row) {
                        cumulative += rate;
                        if (u < cumulative) {
                            assignments_[id] = category_of(assigned);
                            break;
                        }
                    }
                }
            }
        }
    }

    std::int64_t reading_gap() {
        return def_.config.min_word_delay_ms +
               rng_.uniform_int(policy_.extra_reading_min_ms, policy_.extra_reading_max_ms);
    }

    void run_text(const TextItem& text, const Category& assigned, bool annotation) {
        const auto n = text.tokens.size();
        std::optional<std::size_t> trigger;
        std::optional<std::string> first_choice;
        std::size_t first_at = 0;
        if (assigned) {
            auto placement_it = policy_.trigger_by_category.find(*assigned);
            const auto& placement =
                placement_it != policy_.trigger_by_category.end() ? placement_it->second : policy_.trigger;
            trigger = place_trigger(placement, n, rng_);
            if (annotation && rng_.bernoulli(policy_.change_probability)) {
                std::vector<std::string> others;
                for (const auto& c : def_.categories) {
                    if (c != *assigned) others.push_back(c);
                }
                if (others.empty()) others.push_back(*assigned);
                first_choice = others[static_cast<std::size_t>(
                    rng_.uniform_int(0, static_cast<std::int64_t>(others.size()) - 1))];
                first_at = static_cast<std::size_t>(rng_.uniform_int(1, static_cast<std::int64_t>(*trigger)));
            }
        }

        // gaps[w] is the time spent on word w+1; the last one precedes the confirmation.
        std::vector<std::int64_t> gaps(n);
        for (auto& g : gaps) g = reading_gap();

        std::size_t selections = 0;
        std::int64_t last_reveal = 0;
        const auto delay = def_.config.min_word_delay_ms;
        for (std::size_t w = 1; w <= n; ++w) {
            if (w == 1) {
                t_ += 500 + rng_.uniform_int(0, 500);
            } else {
                if (delay > 0 && rng_.bernoulli(policy_.impatience_probability)) {
                    const auto lo = std::max(t_, last_reveal);
                    const auto hi = last_reveal + delay - 1;
                    if (lo <= hi) {
                        t_ = rng_.uniform_int(lo, hi);
                        send(cmd::AdvanceWord{}, Rejection::MinDelay);
                    }
                }
                t_ = std::max(t_, last_reveal + gaps[w - 2]);
            }
            send(cmd::AdvanceWord{});
            last_reveal = t_;
            const auto gap = gaps[w - 1];
            if (first_choice && w == first_at) {
                t_ = last_reveal + gap / 4;
                send(cmd::SelectCategory{*first_choice});
                ++selections;
            }
            if (trigger && w == *trigger) {
                t_ = last_reveal + gap / 2;
                send(cmd::SelectCategory{*assigned});
                ++selections;
            }
        }
        t_ = std::max(t_, last_reveal + gaps[n - 1]);
        if (assigned) {
            send(cmd::ConfirmText{});
        } else {
            send(cmd::ConfirmText{});
            if (rng_.bernoulli(policy_.cancel_probability)) {
                t_ += 300 + rng_.uniform_int(0, 400);
                send(cmd::CancelNoCategory{});
                t_ += 300 + rng_.uniform_int(0, 400);
                send(cmd::ConfirmText{});
            }
            t_ += 400 + rng_.uniform_int(0, 600);
            send(cmd::ConfirmNoCategory{});
        }
        if (annotation) {
            out_.planted.push_back({text.text_id, text.truth_category, assigned, trigger, selections});
        }
    }

    const ExperimentDef& def_;
    const SimulationPolicy& policy_;
    SplitMix64 rng_;
    SessionState state_;
    std::int64_t t_ = 0;
    std::map<std::string, Category> assignments_;
    SimulatedSession out_;
};

}  // namespace

SimulationPolicy parse_policy(const json& doc) {
    only_keys(doc, "policy",
              {"trigger", "trigger_by_category", "change_probability", "reading_extra_ms", "misassignment",
               "misassignment_mode", "impatience_probability", "cancel_probability"});
    SimulationPolicy p;
    if (doc.contains("trigger")) p.trigger = parse_placement(doc.at("trigger"), "policy.trigger");
    if (doc.contains("trigger_by_category")) {
        const auto& m = doc.at("trigger_by_category");
        if (!m.is_object()) bad("policy.trigger_by_category", "expected an object");
        for (const auto& [label, v] : m.items()) {
            p.trigger_by_category[label] = parse_placement(v, "policy.trigger_by_category." + label);
        }
    }
    if (doc.contains("change_probability")) {
        p.change_probability = probability(doc.at("change_probability"), "policy.change_probability");
    }
    if (doc.contains("reading_extra_ms")) {
        const auto& r = doc.at("reading_extra_ms");
        only_keys(r, "policy.reading_extra_ms", {"min", "max"});
        if (r.contains("min")) p.extra_reading_min_ms = non_negative(r.at("min"), "policy.reading_extra_ms.min");
        if (r.contains("max")) p.extra_reading_max_ms = non_negative(r.at("max"), "policy.reading_extra_ms.max");
        if (p.extra_reading_max_ms < p.extra_reading_min_ms) {
            bad("policy.reading_extra_ms.max", "must not be below min");
        }
    }
    if (doc.contains("misassignment")) {
        const auto& m = doc.at("misassignment");
        if (!m.is_object()) bad("policy.misassignment", "expected an object");
        for (const auto& [truth, row] : m.items()) {
            const auto path = "policy.misassignment." + truth;
            if (!row.is_object()) bad(path, "expected an object");
            double total = 0.0;
            for (const auto& [assigned, rate] : row.items()) {
                if (assigned == truth) bad(path + "." + assigned, "a label cannot be misassigned to itself");
                const auto r = probability(rate, path + "." + assigned);
                p.misassignment[truth][assigned] = r;
                total += r;
            }
            if (total > 1.0 + 1e-12) bad(path, "rates sum to more than 1");
        }
    }
    if (doc.contains("misassignment_mode")) {
        const auto& v = doc.at("misassignment_mode");
        if (v == "exact") {
            p.misassignment_mode = SimulationPolicy::MisassignmentMode::Exact;
        } else if (v == "bernoulli") {
            p.misassignment_mode = SimulationPolicy::MisassignmentMode::Bernoulli;
        } else {
            bad("policy.misassignment_mode", "expected 'bernoulli' or 'exact'");
        }
    }
    if (doc.contains("impatience_probability")) {
        p.impatience_probability = probability(doc.at("impatience_probability"), "policy.impatience_probability");
    }
    if (doc.contains("cancel_probability")) {
        p.cancel_probability = probability(doc.at("cancel_probability"), "policy.cancel_probability");
    }
    return p;
}

SimulationPolicy load_policy_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open policy file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw SchemaError("policy", std::string("not valid JSON: ") + e.what());
    }
    return parse_policy(doc);
}

json to_json(const SimulationPolicy& p) {
    json out = json::object();
    out["trigger"] = placement_json(p.trigger);
    out["trigger_by_category"] = json::object();
    for (const auto& [label, t] : p.trigger_by_category) out["trigger_by_category"][label] = placement_json(t);
    out["change_probability"] = p.change_probability;
    out["reading_extra_ms"] = {{"min", p.extra_reading_min_ms}, {"max", p.extra_reading_max_ms}};
    out["misassignment"] = p.misassignment;
    out["misassignment_mode"] =
        p.misassignment_mode == SimulationPolicy::MisassignmentMode::Exact ? "exact" : "bernoulli";
    out["impatience_probability"] = p.impatience_probability;
    out["cancel_probability"] = p.cancel_probability;
    return out;
}

SimulatedSession simulate_session(const ExperimentDef& def, const SimulationPolicy& policy,
                                  const std::string& respondent_id, std::uint64_t seed) {
    check_against(def, policy);
    return Simulator(def, policy, respondent_id, seed).run();
}

std::string simulated_respondent_id(std::size_t index, std::size_t total) {
    const auto width = std::max<std::size_t>(2, std::to_string(total).size());
    auto digits = std::to_string(index + 1);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return "R" + digits;
}

}  // namespace spr
