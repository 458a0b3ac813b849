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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spr/corpus.hpp"
#include "spr/event.hpp"

namespace spr {

/// File name of a session log inside a log directory.
std::string log_file_name(std::string_view session_id);
inline constexpr std::string_view kLogSuffix = ".spr.jsonl";

/// Append-only writer for one session log. Each append() is a single write(2)
/// of whole lines, followed by fsync when durability is requested.
class LogWriter {
public:
    enum class Durability { Fsync, Buffered };
    enum class Mode { CreateNew, Overwrite };

    explicit LogWriter(const std::filesystem::path& path, Durability durability = Durability::Fsync,
                       Mode mode = Mode::CreateNew);
    ~LogWriter();
    LogWriter(const LogWriter&) = delete;
    LogWriter& operator=(const LogWriter&) = delete;
    LogWriter(LogWriter&& other) noexcept;
    LogWriter& operator=(LogWriter&& other) noexcept;

    /// Throws Error on I/O failure; on failure nothing past the last complete
    /// append is guaranteed to be on disk.
    void append(std::span<const AnnotationEvent> events);

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    int fd_ = -1;
    Durability durability_;
};

/// Serializes a whole event list, one LF-terminated line per event.
std::string serialize_log(std::span<const AnnotationEvent> events);

struct LineError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct ParsedLog {
    std::vector<AnnotationEvent> events;
    std::vector<LineError> errors;
    /// The last line had no terminating LF and did not parse: a torn write.
    bool torn_tail = false;
};

ParsedLog parse_log(std::string_view content);
ParsedLog read_log_file(const std::filesystem::path& path);

/// Session log files in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_log_files(const std::filesystem::path& dir);

enum class ViolationKind : std::uint8_t {
    MalformedLine,
    SequenceGap,
    SessionMismatch,
    ClockRegression,
    DelayViolation,
    RatingViolation,
    TraceViolation,
    IncompleteSession,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::optional<std::uint64_t> seq;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool clean() const { return violations.empty(); }
    bool complete() const;
    /// True when the only finding is an IncompleteSession marker.
    bool only_incomplete() const;
    std::size_t count(ViolationKind kind) const;
};

/// Checks seq contiguity, timestamp monotonicity, per-text delay compliance,
/// rating eligibility, and replays the trace through the session machine.
ValidationReport validate_log(std::span<const AnnotationEvent> events, const ExperimentDef& def);

/// validate_log plus parse failures of the file itself.
ValidationReport validate_parsed_log(const ParsedLog& log, const ExperimentDef& def);

}  // namespace spr
