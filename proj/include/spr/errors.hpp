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

#include <stdexcept>
#include <string>

namespace spr {

/// Base for every error this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyText : public Error {
public:
    EmptyText() : Error("text contains no tokens") {}
};

/// The experiment document is not shaped like an experiment definition.
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// The document is well-formed but breaks an invariant (duplicate ids, unknown
/// category names, bad config ranges).
class ValidationError : public Error {
public:
    ValidationError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Event log parsing.
class LogParseError : public Error {
public:
    using Error::Error;
};

class MalformedLine : public LogParseError {
public:
    explicit MalformedLine(const std::string& why) : LogParseError("malformed line: " + why) {}
};

class UnknownKind : public LogParseError {
public:
    explicit UnknownKind(std::string kind)
        : LogParseError("unknown event kind '" + kind + "'"), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class SchemaMismatch : public LogParseError {
public:
    SchemaMismatch(std::string kind, std::string field, const std::string& why)
        : LogParseError("schema mismatch in '" + kind + "' field '" + field + "': " + why),
          kind_(std::move(kind)),
          field_(std::move(field)) {}
    const std::string& kind() const noexcept { return kind_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::string kind_;
    std::string field_;
};

// Analysis.
class AnalysisError : public Error {
public:
    using Error::Error;
};

class IncompleteText : public AnalysisError {
public:
    explicit IncompleteText(const std::string& text_id)
        : AnalysisError("text '" + text_id + "' has no confirmation in the log") {}
};

class InvalidMatrix : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

class RaggedRaters : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

class NoComparablePairs : public AnalysisError {
public:
    NoComparablePairs() : AnalysisError("no rater pair with defined triggers on a common text") {}
};

class NoTriggers : public AnalysisError {
public:
    NoTriggers() : AnalysisError("no text has a defined trigger") {}
};

class UnknownText : public AnalysisError {
public:
    explicit UnknownText(const std::string& text_id)
        : AnalysisError("text '" + text_id + "' is not part of the experiment") {}
};

}  // namespace spr
