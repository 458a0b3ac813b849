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


#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spr/analysis.hpp"
#include "spr/corpus.hpp"
#include "spr/errors.hpp"
#include "spr/event_log.hpp"
#include "spr/prng.hpp"
#include "spr/report.hpp"
#include "spr/session.hpp"
#include "spr/simulate.hpp"

namespace py = pybind11;
using namespace spr;

namespace {

RatingMatrix matrix_from(const std::vector<std::vector<std::size_t>>& counts) {
    if (counts.empty()) throw InvalidMatrix("matrix has no items");
    std::vector<std::string> items(counts.size());
    std::vector<std::string> categories(counts.front().size());
    for (std::size_t i = 0; i < items.size(); ++i) items[i] = std::to_string(i);
    for (std::size_t j = 0; j < categories.size(); ++j) categories[j] = std::to_string(j);
    return RatingMatrix(std::move(items), std::move(categories), counts);
}

py::dict result_dict(const TransitionResult& r) {
    py::dict out;
    out["accepted"] = !r.rejection.has_value();
    out["rejection"] = r.rejection ? py::object(py::str(std::string(to_string(*r.rejection)))) : py::none();
    py::list events;
    for (const auto& e : r.events) events.append(serialize_event(e));
    out["events"] = events;
    return out;
}

/// Mutable wrapper around the pure session machine.
class PySession {
public:
    PySession(std::shared_ptr<const ExperimentDef> def, const std::string& session_id,
              const std::string& respondent_id, std::uint64_t seed, std::int64_t t_client_ms,
              std::int64_t t_server_ms)
        : def_(std::move(def)) {
        auto started = new_session(*def_, {session_id, respondent_id, seed, t_client_ms, t_server_ms});
        state_ = std::move(started.state);
        events_ = std::move(started.events);
    }

    py::dict send(Action action, std::int64_t t_client_ms, std::int64_t t_server_ms) {
        auto result = apply(*def_, state_, Command{std::move(action), t_client_ms}, t_server_ms);
        state_ = result.state;
        events_.insert(events_.end(), result.events.begin(), result.events.end());
        return result_dict(result);
    }

    std::string display_json() const { return to_json(view(*def_, state_)).dump(); }
    std::string phase() const { return std::string(to_string(state_.phase)); }
    std::vector<std::string> order() const { return state_.order; }
    std::string log() const { return serialize_log(events_); }
    bool replay_matches() const { return fold_events(*def_, events_) == state_; }

private:
    std::shared_ptr<const ExperimentDef> def_;
    SessionState state_;
    EventList events_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Self-paced reading annotation core";
    py::register_exception<Error>(m, "Error", PyExc_ValueError);

    m.def("tokenize", &tokenize, py::arg("text"));
    m.def("prng_next", [](std::uint64_t state) { return prng_next(state); }, py::arg("state"),
          "Returns (value, next_state).");
    m.def("fnv1a64", [](const std::string& s) { return fnv1a64(s); }, py::arg("text"));
    m.def("respondent_seed", [](std::uint64_t seed, const std::string& id) { return respondent_seed(seed, id); },
          py::arg("seed"), py::arg("respondent_id"));
    m.def("shuffle_order", &shuffle_order, py::arg("seed"), py::arg("items"));

    py::class_<ExperimentDef, std::shared_ptr<ExperimentDef>>(m, "Experiment")
        .def_static("from_json", [](const std::string& doc) { return std::make_shared<ExperimentDef>(load_experiment(doc)); },
                    py::arg("document"))
        .def_static("load", [](const std::string& path) { return std::make_shared<ExperimentDef>(load_experiment_file(path)); },
                    py::arg("path"))
        .def_readonly("experiment_id", &ExperimentDef::experiment_id)
        .def_readonly("categories", &ExperimentDef::categories)
        .def_readonly("humorous_categories", &ExperimentDef::humorous_categories)
        .def_property_readonly("min_word_delay_ms", [](const ExperimentDef& d) { return d.config.min_word_delay_ms; })
        .def("annotation_text_ids", &ExperimentDef::annotation_text_ids)
        .def("to_json", [](const ExperimentDef& d) { return to_json(d).dump(); });

    py::class_<PySession>(m, "Session")
        .def(py::init<std::shared_ptr<const ExperimentDef>, std::string, std::string, std::uint64_t, std::int64_t,
                      std::int64_t>(),
             py::arg("experiment"), py::arg("session_id"), py::arg("respondent_id"), py::arg("seed") = 0,
             py::arg("t_client_ms") = 0, py::arg("t_server_ms") = 0)
        .def("submit_profile",
             [](PySession& s, const std::map<std::string, std::string>& fields, std::int64_t t, std::int64_t ts) {
                 RespondentProfile p;
                 for (const auto& [key, value] : fields) {
                     if (key == "respondent_id") p.respondent_id = value;
                     else if (key == "sex") p.sex = value;
                     else if (key == "age") p.age = value;
                     else if (key == "education") p.education = value;
                     else if (key == "native_language") p.native_language = value;
                     else if (key == "mood") p.mood = value;
                     else if (key == "attitude") p.attitude = value;
                     else throw Error("unknown profile field '" + key + "'");
                 }
                 return s.send(cmd::SubmitProfile{std::move(p)}, t, ts);
             },
             py::arg("profile"), py::arg("t_client_ms"), py::arg("t_server_ms"))
        .def("ack_instructions", [](PySession& s, std::int64_t t, std::int64_t ts) { return s.send(cmd::AckInstructions{}, t, ts); },
             py::arg("t_client_ms"), py::arg("t_server_ms"))
        .def("advance_word", [](PySession& s, std::int64_t t, std::int64_t ts) { return s.send(cmd::AdvanceWord{}, t, ts); },
             py::arg("t_client_ms"), py::arg("t_server_ms"))
        .def("select_category",
             [](PySession& s, const std::string& c, std::int64_t t, std::int64_t ts) {
                 return s.send(cmd::SelectCategory{c}, t, ts);
             },
             py::arg("category"), py::arg("t_client_ms"), py::arg("t_server_ms"))
        .def("confirm_text", [](PySession& s, std::int64_t t, std::int64_t ts) { return s.send(cmd::ConfirmText{}, t, ts); },
             py::arg("t_client_ms"), py::arg("t_server_ms"))
        .def("confirm_no_category",
             [](PySession& s, std::int64_t t, std::int64_t ts) { return s.send(cmd::ConfirmNoCategory{}, t, ts); },
             py::arg("t_client_ms"), py::arg("t_server_ms"))
        .def("cancel_no_category",
             [](PySession& s, std::int64_t t, std::int64_t ts) { return s.send(cmd::CancelNoCategory{}, t, ts); },
             py::arg("t_client_ms"), py::arg("t_server_ms"))
        .def("rate",
             [](PySession& s, int score, std::int64_t t, std::int64_t ts, const std::string& method) {
                 auto m = parse_input_method(method);
                 if (!m) throw Error("input method must be 'digit', 'arrow' or 'pointer'");
                 return s.send(cmd::Rate{score, *m}, t, ts);
             },
             py::arg("score"), py::arg("t_client_ms"), py::arg("t_server_ms"), py::arg("input_method") = "digit")
        .def("display_json", &PySession::display_json)
        .def_property_readonly("phase", &PySession::phase)
        .def_property_readonly("order", &PySession::order)
        .def("log", &PySession::log)
        .def("replay_matches", &PySession::replay_matches);

    m.def("normalize_line", [](const std::string& line) { return serialize_event(parse_line(line)); }, py::arg("line"),
          "Parses one log line and serializes it again in canonical form.");
    m.def(
        "validate_log",
        [](const std::string& content, const ExperimentDef& def) {
            const auto report = validate_parsed_log(parse_log(content), def);
            std::vector<std::tuple<std::string, std::optional<std::uint64_t>, std::string>> out;
            for (const auto& v : report.violations) out.emplace_back(std::string(to_string(v.kind)), v.seq, v.detail);
            return out;
        },
        py::arg("content"), py::arg("experiment"), "Returns (kind, seq, detail) for every violation.");

    m.def(
        "simulate",
        [](const ExperimentDef& def, const std::string& policy, const std::string& respondent_id, std::uint64_t seed) {
            const auto session =
                simulate_session(def, parse_policy(nlohmann::json::parse(policy)), respondent_id, seed);
            return serialize_log(session.events);
        },
        py::arg("experiment"), py::arg("policy_json"), py::arg("respondent_id"), py::arg("seed"),
        "Simulated session log as NDJSON.");
    m.def(
        "analyze",
        [](const std::vector<std::string>& logs, const ExperimentDef& def, bool include_practice, bool include_flagged,
           std::size_t max_window) {
            std::vector<SessionInput> inputs;
            for (std::size_t i = 0; i < logs.size(); ++i) inputs.push_back({"log-" + std::to_string(i), parse_log(logs[i])});
            const auto report = analyze_sessions(inputs, def, {include_practice, include_flagged, max_window});
            return to_json(report).dump();
        },
        py::arg("logs"), py::arg("experiment"), py::arg("include_practice") = false,
        py::arg("include_flagged") = false, py::arg("max_window") = 10, "report.json document as a string.");

    m.def("fleiss_kappa", [](const std::vector<std::vector<std::size_t>>& c) { return fleiss_kappa(matrix_from(c)); },
          py::arg("counts"), "None when chance agreement is 1.");
    m.def("observed_agreement",
          [](const std::vector<std::vector<std::size_t>>& c) { return observed_agreement(matrix_from(c)); },
          py::arg("counts"));
    m.def("tolerance_agreement", &tolerance_agreement, py::arg("triggers"), py::arg("k"));
    m.def("mode_window_coverage", &mode_window_coverage, py::arg("triggers"), py::arg("k"));
}
