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
#include <string>
#include <vector>

#include "spr/corpus.hpp"
#include "spr/event.hpp"
#include "spr/prng.hpp"
#include "spr/session.hpp"

namespace spr::testing {

/// Three categories (pun humorous), one practice text, two series of short texts.
///
///   practice-1  pun   "one two three"
///   s1-a        pun   "a b c d"
///   s1-b        none  "e f g"
///   s2-a        irony "h i"
///   s2-b        metaphor "j k l m n"
extern const char* const kSmallExperiment;

ExperimentDef small_experiment();
/// The five-series file shipped in data/.
ExperimentDef five_series_experiment();
std::filesystem::path data_dir();

/// Layout built in memory: `series` series of 24 texts with 4 pun,
/// 4 irony, 4 metaphor and 12 plain texts, lengths 6..18 words.
nlohmann::json layout_document(std::size_t series, std::uint64_t seed);

/// Removes itself on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Applies commands to a session and keeps the full event stream.
class Driver {
public:
    Driver(const ExperimentDef& def, std::string respondent_id = "R01", std::uint64_t seed = 42);

    TransitionResult send(Action action, std::int64_t t_client_ms);
    /// Profile and instructions, leaving the session at the first practice text.
    void start(std::int64_t& t);
    /// Reveals the whole current text (respecting the delay), optionally selects
    /// `category` at word `at`, and confirms.
    void read_text(std::int64_t& t, const Category& category, std::size_t at = 1);

    const SessionState& state() const noexcept { return state_; }
    const std::vector<AnnotationEvent>& events() const noexcept { return events_; }

private:
    const ExperimentDef& def_;
    SessionState state_;
    std::vector<AnnotationEvent> events_;
};

/// Outcome of one random command sequence checked against the session
/// invariants.
struct TraceCheck {
    std::vector<std::string> failures;
    std::size_t commands = 0;
    std::size_t rejections = 0;
    bool completed = false;
    std::vector<AnnotationEvent> events;
};

/// Drives a session with `steps` random commands (biased towards progress) and
/// checks, after every step: monotone reveal, delay gating on client time,
/// rejection leaves annotation state unchanged, no event touches a confirmed
/// text, rating set equals the humorous confirmations, contiguous seq, and a
/// display without unrevealed tokens. At the end the fold of the events must
/// equal the live state and the validator must accept the log.
TraceCheck check_random_trace(const ExperimentDef& def, std::uint64_t seed, std::size_t steps);

/// Random event of `kind` that conforms to its payload schema. Strings mix
/// ASCII, escapes, control characters and multi-byte UTF-8.
AnnotationEvent random_event(EventKind kind, SplitMix64& rng);
std::string random_text(SplitMix64& rng, std::size_t max_len);

}  // namespace spr::testing
