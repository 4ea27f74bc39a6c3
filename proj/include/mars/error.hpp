// Copyright 2026 The mars-context Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace mars {

// Error categories map onto CLI exit codes (see cli.hpp).
enum class ErrorKind {
  format,      // malformed payload, manifest line, or vector table
  ingestion,   // referenced payload missing or unreadable
  manifest,    // duplicate ids, inconsistent manifest rows
  lookup,      // unknown conversation or utterance
  kernel,      // invalid similarity-kernel input
  embedding,   // text embedder could not answer
  selection,   // nothing to select from
  config,      // invalid configuration value
  backend,     // ASR backend failure
  scoring,     // undefined error rate
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format error";
    case ErrorKind::ingestion: return "ingestion error";
    case ErrorKind::manifest: return "manifest error";
    case ErrorKind::lookup: return "lookup error";
    case ErrorKind::kernel: return "kernel error";
    case ErrorKind::embedding: return "embedding error";
    case ErrorKind::selection: return "selection error";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::backend: return "backend error";
    case ErrorKind::scoring: return "scoring error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
 public:
  explicit KindedError(const std::string& what) : Error(K, what) {}
};

using FormatError = KindedError<ErrorKind::format>;
using IngestionError = KindedError<ErrorKind::ingestion>;
using ManifestError = KindedError<ErrorKind::manifest>;
using LookupError = KindedError<ErrorKind::lookup>;
using KernelError = KindedError<ErrorKind::kernel>;
using EmbeddingError = KindedError<ErrorKind::embedding>;
using SelectionError = KindedError<ErrorKind::selection>;
using ConfigError = KindedError<ErrorKind::config>;
using BackendError = KindedError<ErrorKind::backend>;
using ScoringError = KindedError<ErrorKind::scoring>;

}  // namespace mars
