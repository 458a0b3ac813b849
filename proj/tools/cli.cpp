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

#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spr/corpus.hpp"
#include "spr/errors.hpp"
#include "spr/event_log.hpp"
#include "spr/report.hpp"
#include "spr/server.hpp"
#include "spr/simulate.hpp"

namespace spr::cli {

namespace {

namespace fs = std::filesystem;

/// Experiment loading split by exit code: schema/validation problems are
/// findings, unreadable files are I/O errors.
struct LoadOutcome {
    std::optional<ExperimentDef> def;
    int code = kOk;
};

LoadOutcome load(const std::string& path, std::ostream& err) {
    if (!fs::is_regular_file(path)) {
        err << "error: cannot read experiment file '" << path << "'\n";
        return {std::nullopt, kUsage};
    }
    try {
        return {load_experiment_file(path), kOk};
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
    }
    return {std::nullopt, kFindings};
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
    auto loaded = load(path, err);
    if (!loaded.def) return loaded.code;
    const auto& def = *loaded.def;
    std::size_t humorous = 0;
    for (const auto& s : def.series) {
        for (const auto& t : s.texts) {
            if (def.is_humorous(t.truth_category)) ++humorous;
        }
    }
    out << fmt::format("ok: experiment '{}': {} categories ({} humorous), {} series, {} texts ({} humorous), {} practice texts\n",
                       def.experiment_id, def.categories.size(), def.humorous_categories.size(), def.series.size(),
                       def.annotation_text_count(), humorous, def.practice_texts.size());
    for (const auto& s : def.series) {
        std::map<std::string, std::size_t> per_category;
        for (const auto& t : s.texts) ++per_category[label_of(t.truth_category)];
        out << "  " << s.series_id << ": " << s.texts.size() << " texts";
        for (const auto& [label, n] : per_category) out << ", " << label << " " << n;
        out << "\n";
    }
    return kOk;
}

int cmd_simulate(const std::string& experiment, std::size_t respondents, const std::string& policy_path,
                 std::uint64_t seed, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    auto loaded = load(experiment, err);
    if (!loaded.def) return loaded.code;
    SimulationPolicy policy;
    if (!policy_path.empty()) {
        if (!fs::is_regular_file(policy_path)) {
            err << "error: cannot read policy file '" << policy_path << "'\n";
            return kUsage;
        }
        try {
            policy = load_policy_file(policy_path);
        } catch (const SchemaError& e) {
            err << "policy error: " << e.what() << "\n";
            return kFindings;
        }
    }
    fs::create_directories(out_dir);
    std::string truth = "session_id,respondent_id,text_id,truth_category,assigned_category,trigger_position,selections\n";
    try {
        for (std::size_t i = 0; i < respondents; ++i) {
            const auto id = simulated_respondent_id(i, respondents);
            const auto session = simulate_session(*loaded.def, policy, id, seed);
            LogWriter writer(out_dir / log_file_name(session.session_id), LogWriter::Durability::Buffered,
                             LogWriter::Mode::Overwrite);
            writer.append(session.events);
            for (const auto& p : session.planted) {
                truth += fmt::format("{},{},{},{},{},{},{}\n", csv_field(session.session_id), csv_field(id),
                                     csv_field(p.text_id), csv_field(label_of(p.truth)),
                                     csv_field(label_of(p.assigned)),
                                     p.trigger ? std::to_string(*p.trigger) : "", p.selections);
            }
        }
    } catch (const ValidationError& e) {
        err << "policy error: " << e.what() << "\n";
        return kFindings;
    }
    std::ofstream(out_dir / "ground_truth.csv", std::ios::binary | std::ios::trunc) << truth;
    out << "simulated " << respondents << " sessions into " << out_dir.string() << "\n";
    return kOk;
}

int cmd_check_logs(const fs::path& dir, const std::string& experiment, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(dir)) {
        err << "error: '" << dir.string() << "' is not a directory\n";
        return kUsage;
    }
    auto loaded = load(experiment, err);
    if (!loaded.def) return loaded.code;
    const auto files = list_log_files(dir);
    std::size_t bad = 0;
    for (const auto& path : files) {
        const auto report = validate_parsed_log(read_log_file(path), *loaded.def);
        if (report.clean()) {
            out << "OK   " << path.filename().string() << "\n";
            continue;
        }
        ++bad;
        out << "FAIL " << path.filename().string() << "\n";
        for (const auto& v : report.violations) {
            out << "     " << to_string(v.kind);
            if (v.seq) out << " at seq " << *v.seq;
            out << ": " << v.detail << "\n";
        }
    }
    out << files.size() - bad << " of " << files.size() << " logs clean\n";
    return bad == 0 ? kOk : kFindings;
}

int cmd_analyze(const fs::path& dir, const std::string& experiment, const fs::path& out_dir,
                const AnalysisOptions& options, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(dir)) {
        err << "error: '" << dir.string() << "' is not a directory\n";
        return kUsage;
    }
    auto loaded = load(experiment, err);
    if (!loaded.def) return loaded.code;
    const auto sessions = load_session_dir(dir);
    const auto report = analyze_sessions(sessions, *loaded.def, options);
    write_report(report, out_dir);
    std::size_t flagged = 0;
    for (const auto& s : report.sessions) {
        if (!s.violations.empty()) ++flagged;
    }
    out << fmt::format("analyzed {} sessions ({} flagged); report written to {}\n", report.sessions.size(), flagged,
                       out_dir.string());
    return flagged == 0 ? kOk : kFindings;
}

int cmd_report(const fs::path& dir, std::ostream& out, std::ostream& err) {
    const auto path = dir / "report.json";
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        err << "error: no report.json in '" << dir.string() << "' (run `spr analyze` first)\n";
        return kUsage;
    }
    try {
        out << render_summary(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        err << "error: unreadable report: " << e.what() << "\n";
        return kUsage;
    }
    return kOk;
}

int cmd_serve(const std::string& experiment, const std::string& address, unsigned short port,
              const fs::path& log_dir, std::uint64_t seed, const fs::path& ui_dir, std::ostream& out,
              std::ostream& err) {
    auto loaded = load(experiment, err);
    if (!loaded.def) return loaded.code;

    // Block termination signals before any server thread exists so that only
    // the sigwait below receives them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto def = std::make_shared<const ExperimentDef>(std::move(*loaded.def));
    server::SessionHub hub(def, {log_dir, seed});
    server::WebServer web(hub, address, port, ui_dir);
    try {
        web.start();
    } catch (const std::exception& e) {
        err << "error: cannot listen on " << address << ":" << port << ": " << e.what() << "\n";
        return kUsage;
    }
    out << fmt::format("serving '{}' on http://{}:{} (WebSocket /ws, logs in {})\n", def->experiment_id, address,
                       web.port(), log_dir.string())
        << std::flush;
    int sig = 0;
    sigwait(&signals, &sig);
    out << "shutting down\n";
    web.stop();
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-paced reading annotation: experiment server, simulator and agreement analysis", "spr"};
    app.require_subcommand(1);

    std::string experiment;
    std::string dir;
    std::string out_dir;
    std::uint64_t seed = 0;

    auto* validate = app.add_subcommand("validate", "Load and validate an experiment definition");
    validate->add_option("experiment", experiment, "Experiment file (JSON)")->required();

    auto* serve = app.add_subcommand("serve", "Run the session server");
    std::string address = "127.0.0.1";
    unsigned short port = 8080;
    std::string log_dir = "logs";
    std::string ui_dir;
    serve->add_option("experiment", experiment, "Experiment file (JSON)")->required();
    serve->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();
    serve->add_option("--address", address, "Listen address")->capture_default_str();
    serve->add_option("--log-dir", log_dir, "Directory for session logs")->capture_default_str();
    serve->add_option("--seed", seed, "Experiment seed for text orders")->capture_default_str();
    serve->add_option("--ui-dir", ui_dir, "Directory with the browser UI bundle");

    auto* simulate = app.add_subcommand("simulate", "Generate simulated respondent logs");
    std::size_t respondents = 27;
    std::string policy;
    simulate->add_option("experiment", experiment, "Experiment file (JSON)")->required();
    simulate->add_option("--respondents", respondents, "Number of respondents")->capture_default_str();
    simulate->add_option("--policy", policy, "Simulation policy file (JSON); default is truthful");
    simulate->add_option("--seed", seed, "Seed")->capture_default_str();
    simulate->add_option("--out", out_dir, "Output directory")->required();

    auto* check = app.add_subcommand("check-logs", "Validate every session log in a directory");
    check->add_option("dir", dir, "Log directory")->required();
    check->add_option("experiment", experiment, "Experiment file (JSON)")->required();

    auto* analyze = app.add_subcommand("analyze", "Compute agreement statistics and export tables");
    AnalysisOptions options;
    analyze->add_option("dir", dir, "Log directory")->required();
    analyze->add_option("experiment", experiment, "Experiment file (JSON)")->required();
    analyze->add_option("--out", out_dir, "Report directory")->required();
    analyze->add_flag("--include-practice", options.include_practice, "Include practice texts");
    analyze->add_flag("--include-flagged", options.include_flagged, "Include sessions that failed validation");
    analyze->add_option("--max-window", options.max_window, "Largest tolerance window k")->capture_default_str();

    auto* report = app.add_subcommand("report", "Print a summary of an analysis report");
    report->add_option("dir", dir, "Report directory written by analyze")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(experiment, out, err);
        if (serve->parsed()) return cmd_serve(experiment, address, port, log_dir, seed, ui_dir, out, err);
        if (simulate->parsed()) return cmd_simulate(experiment, respondents, policy, seed, out_dir, out, err);
        if (check->parsed()) return cmd_check_logs(dir, experiment, out, err);
        if (analyze->parsed()) return cmd_analyze(dir, experiment, out_dir, options, out, err);
        if (report->parsed()) return cmd_report(dir, out, err);
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace spr::cli
