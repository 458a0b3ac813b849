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

#include "spr/report.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "spr/errors.hpp"

namespace spr {

namespace {

using nlohmann::ordered_json;

template <typename F>
auto attempt(std::vector<std::string>& notes, const std::string& what, F&& f)
    -> std::optional<decltype(f())> {
    try {
        return f();
    } catch (const AnalysisError& e) {
        notes.push_back(what + ": " + e.what());
        return std::nullopt;
    }
}

GroupAgreement group_agreement(std::string scope, std::span<const TriggerRecord> records,
                               const ExperimentDef& def, std::size_t raters, std::size_t max_window) {
    GroupAgreement g;
    g.scope = std::move(scope);
    g.raters = raters;
    std::set<std::string> items;
    for (const auto& r : records) items.insert(r.text_id);
    g.items = items.size();
    if (records.empty()) {
        g.notes.emplace_back("no decisions in scope");
        g.tolerance_curve.assign(max_window + 1, std::nullopt);
        g.mode_coverage.assign(max_window + 1, std::nullopt);
        return g;
    }

    if (auto m = attempt(g.notes, "category agreement", [&] { return build_category_matrix(records, def); })) {
        g.observed_categories = observed_agreement(*m);
        g.kappa_categories = fleiss_kappa(*m);
        if (!g.kappa_categories) g.notes.emplace_back("category kappa: every decision in one category");
    }
    if (auto m = attempt(g.notes, "trigger agreement", [&] { return build_trigger_matrix(records, def); })) {
        g.observed_triggers = observed_agreement(*m);
        g.kappa_triggers = fleiss_kappa(*m);
        if (!g.kappa_triggers) g.notes.emplace_back("trigger kappa: every decision at one position");
    }

    const auto table = trigger_table(records);
    std::vector<std::string> curve_notes;
    for (std::size_t k = 0; k <= max_window; ++k) {
        g.tolerance_curve.push_back(
            attempt(curve_notes, "tolerance agreement", [&] { return tolerance_agreement(table, k); }));
        g.mode_coverage.push_back(
            attempt(curve_notes, "mode-window coverage", [&] { return mode_window_coverage(table, k); }));
    }
    // The same failure repeats for every k; keep one note per kind.
    std::set<std::string> seen;
    for (auto& n : curve_notes) {
        if (seen.insert(n).second) g.notes.push_back(std::move(n));
    }
    return g;
}

ordered_json number_or_undefined(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json("undefined");
}

std::string csv_number(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "undefined"; }

ordered_json group_json(const GroupAgreement& g) {
    ordered_json out = ordered_json::object();
    out["scope"] = g.scope;
    out["items"] = g.items;
    out["raters"] = g.raters;
    out["kappa_categories"] = number_or_undefined(g.kappa_categories);
    out["kappa_triggers"] = number_or_undefined(g.kappa_triggers);
    out["observed_agreement_categories"] = number_or_undefined(g.observed_categories);
    out["observed_agreement_triggers"] = number_or_undefined(g.observed_triggers);
    out["tolerance_curve"] = ordered_json::array();
    out["mode_window_coverage"] = ordered_json::array();
    for (std::size_t k = 0; k < g.tolerance_curve.size(); ++k) {
        out["tolerance_curve"].push_back({{"k", k}, {"value", number_or_undefined(g.tolerance_curve[k])}});
        out["mode_window_coverage"].push_back({{"k", k}, {"value", number_or_undefined(g.mode_coverage[k])}});
    }
    out["notes"] = g.notes;
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("cannot write '" + path.string() + "'");
}

std::string csv_row(std::initializer_list<std::string> fields) {
    std::string line;
    bool first = true;
    for (const auto& f : fields) {
        if (!first) line += ',';
        line += csv_field(f);
        first = false;
    }
    line += '\n';
    return line;
}

}  // namespace

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<SessionInput> load_session_dir(const std::filesystem::path& dir) {
    std::vector<SessionInput> out;
    for (const auto& path : list_log_files(dir)) {
        out.push_back({path.filename().string(), read_log_file(path)});
    }
    return out;
}

AgreementReport analyze_sessions(std::span<const SessionInput> sessions, const ExperimentDef& def,
                                 const AnalysisOptions& options) {
    AgreementReport report;
    report.experiment_id = def.experiment_id;
    report.options = options;
    report.funniness_min = def.config.funniness_min;
    report.funniness_max = def.config.funniness_max;

    std::vector<std::size_t> included;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto& input = sessions[i];
        SessionSummary s;
        s.source = input.source;
        if (!input.log.events.empty()) {
            s.session_id = input.log.events.front().session_id;
            s.respondent_id = respondent_of(input.log.events);
        }
        s.violations = validate_parsed_log(input.log, def).violations;
        s.included = !input.log.events.empty() &&
                     input.log.events.front().kind == EventKind::SessionStarted &&
                     (s.violations.empty() || options.include_flagged);
        if (s.included) included.push_back(i);
        report.sessions.push_back(std::move(s));
    }
    auto by_session = [&](std::size_t a, std::size_t b) {
        const auto& sa = report.sessions[a];
        const auto& sb = report.sessions[b];
        return std::tie(sa.session_id, sa.source) < std::tie(sb.session_id, sb.source);
    };
    std::sort(included.begin(), included.end(), by_session);
    {
        std::vector<std::size_t> order(report.sessions.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), by_session);
        std::vector<SessionSummary> sorted;
        for (auto i : order) sorted.push_back(report.sessions[i]);
        report.sessions = std::move(sorted);
    }

    std::vector<TriggerRecord> records;
    std::vector<EventList> included_events;
    for (auto i : included) {
        const auto& events = sessions[i].log.events;
        const auto session_id = events.front().session_id;
        const auto respondent = respondent_of(events);
        included_events.push_back(events);
        for (auto& r : extract_triggers(events, def, options.include_practice)) {
            const auto durations = reading_times(events, r.text_id);
            const auto* text = def.find_text(r.text_id);
            for (std::size_t w = 0; w < durations.size(); ++w) {
                report.reading_times.push_back(
                    {session_id, respondent, r.text_id, w, w < text->tokens.size() ? text->tokens[w] : "",
                     durations[w]});
            }
            report.triggers.emplace_back(session_id, r);
            records.push_back(std::move(r));
        }
        for (const auto& e : events) {
            if (e.kind == EventKind::ProfileRecorded) report.profiles.push_back({session_id, profile_of(e)});
        }
    }

    report.overall = group_agreement("all", records, def, included.size(), options.max_window);
    for (const auto& series : def.series) {
        std::vector<TriggerRecord> subset;
        for (const auto& r : records) {
            if (def.series_of(r.text_id) == series.series_id) subset.push_back(r);
        }
        report.per_series.push_back(
            group_agreement(series.series_id, subset, def, included.size(), options.max_window));
    }
    report.confusion = confusion_matrix(records, def);
    report.funniness = funniness_summary(included_events, def);
    return report;
}

ordered_json to_json(const AgreementReport& report) {
    ordered_json out = ordered_json::object();
    out["experiment_id"] = report.experiment_id;
    out["options"] = {{"include_practice", report.options.include_practice},
                      {"include_flagged", report.options.include_flagged},
                      {"max_window", report.options.max_window}};

    out["sessions"] = ordered_json::array();
    std::size_t included = 0;
    for (const auto& s : report.sessions) {
        ordered_json violations = ordered_json::array();
        for (const auto& v : s.violations) {
            violations.push_back({{"kind", std::string(to_string(v.kind))},
                                  {"seq", v.seq ? ordered_json(*v.seq) : ordered_json(nullptr)},
                                  {"detail", v.detail}});
        }
        out["sessions"].push_back({{"source", s.source},
                                   {"session_id", s.session_id},
                                   {"respondent_id", s.respondent_id},
                                   {"included", s.included},
                                   {"violations", std::move(violations)}});
        if (s.included) ++included;
    }
    out["sessions_included"] = included;
    out["decisions"] = report.triggers.size();

    ordered_json per_series = ordered_json::array();
    for (const auto& g : report.per_series) per_series.push_back(group_json(g));
    out["agreement"] = {{"overall", group_json(report.overall)}, {"per_series", std::move(per_series)}};

    ordered_json shares = ordered_json::object();
    for (const auto& label : report.confusion.labels) {
        shares[label] = number_or_undefined(report.confusion.off_diagonal_share(label));
    }
    out["confusion"] = {{"labels", report.confusion.labels},
                        {"counts", report.confusion.counts},
                        {"off_diagonal_share", std::move(shares)}};

    ordered_json funniness = ordered_json::object();
    for (const auto& [text, f] : report.funniness) {
        funniness[text] = {{"count", f.count}, {"mean", number_or_undefined(f.mean)}, {"histogram", f.histogram}};
    }
    out["funniness"] = {{"scale_min", report.funniness_min},
                        {"scale_max", report.funniness_max},
                        {"texts", std::move(funniness)}};
    return out;
}

void write_report(const AgreementReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    auto doc = to_json(report);
    write_file(out_dir / "report.json", doc.dump(2) + "\n");

    std::string kappa = csv_row({"scope", "items", "raters", "kappa_categories", "kappa_triggers",
                                 "observed_agreement_categories", "observed_agreement_triggers"});
    std::string curve = csv_row({"scope", "k", "tolerance_agreement", "mode_window_coverage"});
    auto add_group = [&](const GroupAgreement& g) {
        kappa += csv_row({g.scope, std::to_string(g.items), std::to_string(g.raters), csv_number(g.kappa_categories),
                          csv_number(g.kappa_triggers), csv_number(g.observed_categories),
                          csv_number(g.observed_triggers)});
        for (std::size_t k = 0; k < g.tolerance_curve.size(); ++k) {
            curve += csv_row({g.scope, std::to_string(k), csv_number(g.tolerance_curve[k]),
                              csv_number(g.mode_coverage[k])});
        }
    };
    add_group(report.overall);
    for (const auto& g : report.per_series) add_group(g);
    write_file(out_dir / "kappa.csv", kappa);
    write_file(out_dir / "tolerance_curve.csv", curve);

    std::string confusion = "truth";
    for (const auto& label : report.confusion.labels) confusion += "," + csv_field(label);
    confusion += '\n';
    for (std::size_t i = 0; i < report.confusion.labels.size(); ++i) {
        confusion += csv_field(report.confusion.labels[i]);
        for (auto c : report.confusion.counts[i]) confusion += "," + std::to_string(c);
        confusion += '\n';
    }
    write_file(out_dir / "confusion.csv", confusion);

    std::string triggers = csv_row({"session_id", "respondent_id", "text_id", "final_category",
                                    "trigger_position", "post_reveal", "n_changes"});
    for (const auto& [session_id, r] : report.triggers) {
        triggers += csv_row({session_id, r.respondent_id, r.text_id, label_of(r.final_category),
                             r.trigger_position ? std::to_string(*r.trigger_position) : "",
                             r.post_reveal ? "true" : "false", std::to_string(r.n_changes)});
    }
    write_file(out_dir / "triggers.csv", triggers);

    std::string reading = csv_row({"session_id", "respondent_id", "text_id", "word_index", "token", "duration_ms"});
    for (const auto& row : report.reading_times) {
        reading += csv_row({row.session_id, row.respondent_id, row.text_id, std::to_string(row.word_index),
                            row.token, std::to_string(row.duration_ms)});
    }
    write_file(out_dir / "reading_times.csv", reading);

    std::string funniness = "text_id,count,mean";
    for (int score = report.funniness_min; score <= report.funniness_max; ++score) {
        funniness += ",score_" + std::to_string(score);
    }
    funniness += '\n';
    for (const auto& [text, f] : report.funniness) {
        funniness += csv_field(text) + "," + std::to_string(f.count) + "," + csv_number(f.mean);
        for (auto h : f.histogram) funniness += "," + std::to_string(h);
        funniness += '\n';
    }
    write_file(out_dir / "funniness.csv", funniness);

    std::string profiles = csv_row({"session_id", "respondent_id", "sex", "age", "education", "native_language",
                                    "mood", "attitude"});
    for (const auto& [session_id, p] : report.profiles) {
        profiles += csv_row({session_id, p.respondent_id, p.sex, p.age, p.education, p.native_language, p.mood,
                             p.attitude});
    }
    write_file(out_dir / "profiles.csv", profiles);

    std::string sessions = csv_row({"source", "session_id", "respondent_id", "included", "violations"});
    for (const auto& s : report.sessions) {
        std::string kinds;
        for (const auto& v : s.violations) {
            if (!kinds.empty()) kinds += ';';
            kinds += to_string(v.kind);
        }
        sessions += csv_row({s.source, s.session_id, s.respondent_id, s.included ? "true" : "false", kinds});
    }
    write_file(out_dir / "sessions.csv", sessions);
}

std::string render_summary(const nlohmann::json& report) {
    std::ostringstream out;
    auto value = [](const nlohmann::json& v) -> std::string {
        if (v.is_number()) return fmt::format("{:.4f}", v.get<double>());
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    };
    out << "experiment: " << report.at("experiment_id").get<std::string>() << "\n";
    const auto& sessions = report.at("sessions");
    out << "sessions: " << report.at("sessions_included").get<std::size_t>() << " included of "
        << sessions.size() << "\n";
    for (const auto& s : sessions) {
        if (s.at("included").get<bool>()) continue;
        out << "  excluded " << s.at("source").get<std::string>() << ":";
        for (const auto& v : s.at("violations")) out << " " << v.at("kind").get<std::string>();
        out << "\n";
    }
    out << "decisions: " << report.at("decisions").get<std::size_t>() << "\n\n";

    auto group = [&](const nlohmann::json& g) {
        out << fmt::format("{:<12} items {:>4}  raters {:>3}  kappa(categories) {:>9}  kappa(triggers) {:>9}\n",
                           g.at("scope").get<std::string>(), g.at("items").get<std::size_t>(),
                           g.at("raters").get<std::size_t>(), value(g.at("kappa_categories")),
                           value(g.at("kappa_triggers")));
    };
    const auto& agreement = report.at("agreement");
    group(agreement.at("overall"));
    for (const auto& g : agreement.at("per_series")) group(g);

    out << "\ntrigger agreement within k words (pairwise / mode window):\n";
    const auto& overall = agreement.at("overall");
    for (std::size_t k = 0; k < overall.at("tolerance_curve").size(); ++k) {
        out << fmt::format("  k={:<3} {:>9} {:>9}\n", k, value(overall.at("tolerance_curve")[k].at("value")),
                           value(overall.at("mode_window_coverage")[k].at("value")));
    }

    const auto& confusion = report.at("confusion");
    const auto labels = confusion.at("labels").get<std::vector<std::string>>();
    out << "\nconfusion (rows: truth, columns: assigned):\n" << fmt::format("  {:<10}", "");
    for (const auto& l : labels) out << fmt::format(" {:>9}", l);
    out << fmt::format(" {:>10}\n", "off-diag");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << fmt::format("  {:<10}", labels[i]);
        for (const auto& c : confusion.at("counts")[i]) out << fmt::format(" {:>9}", c.get<std::size_t>());
        out << fmt::format(" {:>10}\n", value(confusion.at("off_diagonal_share").at(labels[i])));
    }

    std::size_t rated_texts = 0;
    std::size_t ratings = 0;
    for (const auto& [text, f] : report.at("funniness").at("texts").items()) {
        const auto n = f.at("count").get<std::size_t>();
        ratings += n;
        if (n > 0) ++rated_texts;
    }
    out << "\nfunniness: " << ratings << " ratings over " << rated_texts << " texts\n";
    return out.str();
}

}  // namespace spr
