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

#include "spr/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "spr/errors.hpp"
#include "spr/session.hpp"

namespace spr {

namespace {

std::string errno_message(const std::string& what, const std::filesystem::path& path) {
    return what + " '" + path.string() + "': " + std::strerror(errno);
}

/// The command a respondent must have issued for `e` to be the first event of
/// its transition. Derived events (text_started, rating_prompted, ...) have none.
std::optional<Command> command_for(const AnnotationEvent& e) {
    const auto& p = e.payload;
    auto make = [&](Action a) { return Command{std::move(a), e.t_client_ms}; };
    switch (e.kind) {
        case EventKind::ProfileRecorded: return make(cmd::SubmitProfile{profile_of(e)});
        case EventKind::InstructionsAcknowledged: return make(cmd::AckInstructions{});
        case EventKind::WordRevealed:
        case EventKind::InputSuppressed: return make(cmd::AdvanceWord{});
        case EventKind::CategorySelected: return make(cmd::SelectCategory{p.category});
        case EventKind::NoCategoryPrompted:
        case EventKind::TextConfirmed: return make(cmd::ConfirmText{});
        case EventKind::NoCategoryCancelled: return make(cmd::CancelNoCategory{});
        case EventKind::NoCategoryConfirmed: return make(cmd::ConfirmNoCategory{});
        case EventKind::FunninessRated: {
            auto method = parse_input_method(p.input_method);
            if (!method) return std::nullopt;
            return make(cmd::Rate{static_cast<int>(p.score), *method});
        }
        default: return std::nullopt;
    }
}

class Checker {
public:
    explicit Checker(const ExperimentDef& def) : def_(def) {}

    void add(ViolationKind kind, std::optional<std::uint64_t> seq, std::string detail) {
        if (seq) flagged_.insert(*seq);
        report_.violations.push_back({kind, seq, std::move(detail)});
    }

    bool flagged(std::uint64_t seq) const { return flagged_.contains(seq); }

    void structural(std::span<const AnnotationEvent> events) {
        const auto& session_id = events.front().session_id;
        std::uint64_t expected_seq = 0;
        std::int64_t last_client = events.front().t_client_ms;
        std::int64_t last_server = events.front().t_server_ms;
        std::map<std::string, std::int64_t, std::less<>> last_reveal;  // per text
        std::map<std::string, Category, std::less<>> confirmed;
        std::set<std::string, std::less<>> rated;

        for (const auto& e : events) {
            if (e.session_id != session_id) {
                add(ViolationKind::SessionMismatch, e.seq,
                    "session id '" + e.session_id + "' differs from '" + session_id + "'");
            }
            if (e.seq != expected_seq) {
                add(ViolationKind::SequenceGap, e.seq,
                    "expected seq " + std::to_string(expected_seq));
            }
            expected_seq = e.seq + 1;
            if (e.t_client_ms < last_client) {
                add(ViolationKind::ClockRegression, e.seq, "client clock went backwards");
            }
            if (e.t_server_ms < last_server) {
                add(ViolationKind::ClockRegression, e.seq, "server clock went backwards");
            }
            last_client = std::max(last_client, e.t_client_ms);
            last_server = std::max(last_server, e.t_server_ms);

            const auto& p = e.payload;
            switch (e.kind) {
                case EventKind::TextStarted: last_reveal.erase(p.text_id); break;
                case EventKind::WordRevealed: {
                    auto it = last_reveal.find(p.text_id);
                    if (it != last_reveal.end() &&
                        e.t_client_ms - it->second < def_.config.min_word_delay_ms) {
                        add(ViolationKind::DelayViolation, e.seq,
                            "word revealed " + std::to_string(e.t_client_ms - it->second) +
                                " ms after the previous one in '" + p.text_id + "'");
                    }
                    last_reveal[p.text_id] = e.t_client_ms;
                    break;
                }
                case EventKind::TextConfirmed:
                    if (!p.practice) confirmed[p.text_id] = p.final_category;
                    break;
                case EventKind::FunninessRated: {
                    auto it = confirmed.find(p.text_id);
                    if (it == confirmed.end()) {
                        add(ViolationKind::RatingViolation, e.seq,
                            "rating for unconfirmed text '" + p.text_id + "'");
                    } else if (!def_.is_humorous(it->second)) {
                        add(ViolationKind::RatingViolation, e.seq,
                            "rating for '" + p.text_id + "' confirmed as non-humorous '" +
                                label_of(it->second) + "'");
                    } else if (!rated.insert(p.text_id).second) {
                        add(ViolationKind::RatingViolation, e.seq, "text '" + p.text_id + "' rated twice");
                    }
                    if (p.score < def_.config.funniness_min || p.score > def_.config.funniness_max) {
                        add(ViolationKind::RatingViolation, e.seq,
                            "score " + std::to_string(p.score) + " outside the scale");
                    }
                    break;
                }
                default: break;
            }
        }
    }

    void replay(std::span<const AnnotationEvent> events) {
        const auto& first = events.front();
        if (first.kind != EventKind::SessionStarted) {
            divergence(ViolationKind::TraceViolation, first.seq, "log does not begin with session_started");
            return;
        }
        if (first.payload.experiment_id != def_.experiment_id) {
            add(ViolationKind::SessionMismatch, first.seq,
                "log belongs to experiment '" + first.payload.experiment_id + "'");
            return;
        }
        auto started = new_session(def_, {first.session_id, first.payload.respondent_id,
                                          first.payload.seed, first.t_client_ms, first.t_server_ms});
        if (started.events.front() != first) {
            divergence(ViolationKind::TraceViolation, first.seq,
                       "text order does not match the seeded shuffle for this respondent");
            return;
        }
        SessionState state = std::move(started.state);
        std::vector<AnnotationEvent> pending;
        std::size_t next_pending = 0;

        for (std::size_t i = 1; i < events.size(); ++i) {
            const auto& e = events[i];
            if (next_pending == pending.size()) {
                auto command = command_for(e);
                if (!command) {
                    divergence(ViolationKind::TraceViolation, e.seq,
                               "'" + std::string(to_string(e.kind)) + "' does not follow from any input");
                    return;
                }
                auto r = apply(def_, state, *command, e.t_server_ms);
                if (r.rejection == Rejection::MinDelay && e.kind == EventKind::WordRevealed) {
                    divergence(ViolationKind::DelayViolation, e.seq, "word revealed inside the delay window");
                    return;
                }
                if (r.events.empty()) {
                    const auto kind = e.kind == EventKind::FunninessRated ? ViolationKind::RatingViolation
                                                                          : ViolationKind::TraceViolation;
                    divergence(kind, e.seq,
                               "'" + std::string(to_string(e.kind)) + "' rejected by the session machine (" +
                                   std::string(to_string(*r.rejection)) + ")");
                    return;
                }
                state = std::move(r.state);
                pending = std::move(r.events);
                next_pending = 0;
            }
            if (pending[next_pending] != e) {
                divergence(ViolationKind::TraceViolation, e.seq,
                           "expected '" + serialize_event(pending[next_pending]) + "'");
                return;
            }
            ++next_pending;
        }
        if (next_pending != pending.size() || state.phase != Phase::Completed) {
            add(ViolationKind::IncompleteSession, std::nullopt,
                "session ends in phase '" + std::string(to_string(state.phase)) + "'");
        }
    }

    ValidationReport take() && { return std::move(report_); }

private:
    // Report the first point where the replay disagrees, unless a structural
    // check already explains that event.
    void divergence(ViolationKind kind, std::uint64_t seq, std::string detail) {
        if (!flagged(seq)) add(kind, seq, std::move(detail));
    }

    const ExperimentDef& def_;
    ValidationReport report_;
    std::set<std::uint64_t> flagged_;
};

}  // namespace

std::string log_file_name(std::string_view session_id) {
    return std::string(session_id) + std::string(kLogSuffix);
}

LogWriter::LogWriter(const std::filesystem::path& path, Durability durability, Mode mode)
    : path_(path), durability_(durability) {
    int flags = O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC;
    flags |= mode == Mode::CreateNew ? O_EXCL : O_TRUNC;
    fd_ = ::open(path.c_str(), flags, 0644);
    if (fd_ < 0) throw Error(errno_message("cannot create log", path));
}

LogWriter::~LogWriter() {
    if (fd_ >= 0) ::close(fd_);
}

LogWriter::LogWriter(LogWriter&& other) noexcept
    : path_(std::move(other.path_)), fd_(std::exchange(other.fd_, -1)), durability_(other.durability_) {}

LogWriter& LogWriter::operator=(LogWriter&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        path_ = std::move(other.path_);
        fd_ = std::exchange(other.fd_, -1);
        durability_ = other.durability_;
    }
    return *this;
}

void LogWriter::append(std::span<const AnnotationEvent> events) {
    if (events.empty()) return;
    if (fd_ < 0) throw Error("log writer is closed");
    const auto buf = serialize_log(events);
    std::size_t written = 0;
    while (written < buf.size()) {
        const auto n = ::write(fd_, buf.data() + written, buf.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(errno_message("cannot append to log", path_));
        }
        written += static_cast<std::size_t>(n);
    }
    if (durability_ == Durability::Fsync && ::fsync(fd_) != 0) {
        throw Error(errno_message("cannot sync log", path_));
    }
}

std::string serialize_log(std::span<const AnnotationEvent> events) {
    std::string out;
    for (const auto& e : events) {
        out += serialize_event(e);
        out += '\n';
    }
    return out;
}

ParsedLog parse_log(std::string_view content) {
    ParsedLog out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        const bool terminated = nl != std::string_view::npos;
        const auto line = content.substr(pos, terminated ? nl - pos : std::string_view::npos);
        pos = terminated ? nl + 1 : content.size();
        ++line_no;
        try {
            out.events.push_back(parse_line(line));
        } catch (const LogParseError& e) {
            if (!terminated) {
                out.torn_tail = true;
            } else {
                out.errors.push_back({line_no, e.what()});
            }
        }
    }
    return out;
}

ParsedLog read_log_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open log '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_log(buf.str());
}

std::vector<std::filesystem::path> list_log_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > kLogSuffix.size() && name.ends_with(kLogSuffix)) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::MalformedLine: return "MalformedLine";
        case ViolationKind::SequenceGap: return "SequenceGap";
        case ViolationKind::SessionMismatch: return "SessionMismatch";
        case ViolationKind::ClockRegression: return "ClockRegression";
        case ViolationKind::DelayViolation: return "DelayViolation";
        case ViolationKind::RatingViolation: return "RatingViolation";
        case ViolationKind::TraceViolation: return "TraceViolation";
        case ViolationKind::IncompleteSession: return "IncompleteSession";
    }
    return "?";
}

bool ValidationReport::complete() const { return count(ViolationKind::IncompleteSession) == 0; }

bool ValidationReport::only_incomplete() const {
    return !violations.empty() && count(ViolationKind::IncompleteSession) == violations.size();
}

std::size_t ValidationReport::count(ViolationKind kind) const {
    return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                  [&](const Violation& v) { return v.kind == kind; }));
}

ValidationReport validate_log(std::span<const AnnotationEvent> events, const ExperimentDef& def) {
    if (events.empty()) {
        ValidationReport r;
        r.violations.push_back({ViolationKind::IncompleteSession, std::nullopt, "log is empty"});
        return r;
    }
    Checker checker(def);
    checker.structural(events);
    checker.replay(events);
    return std::move(checker).take();
}

ValidationReport validate_parsed_log(const ParsedLog& log, const ExperimentDef& def) {
    ValidationReport report;
    for (const auto& err : log.errors) {
        report.violations.push_back({ViolationKind::MalformedLine, std::nullopt,
                                     "line " + std::to_string(err.line) + ": " + err.message});
    }
    auto trace = validate_log(log.events, def);
    report.violations.insert(report.violations.end(), trace.violations.begin(), trace.violations.end());
    if (log.torn_tail && report.complete()) {
        report.violations.push_back(
            {ViolationKind::IncompleteSession, std::nullopt, "last line is a partial write"});
    }
    return report;
}

}  // namespace spr
