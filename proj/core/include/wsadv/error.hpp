// Copyright 2026 The wsadv Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsadv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or mathematical domain violation (empty reference, zero-norm
/// signal, out-of-range index, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

enum class WavErrorKind { kIo, kMalformedHeader, kUnsupportedEncoding, kEmptyData };

const char* to_string(WavErrorKind kind);

class WavError : public Error {
 public:
  WavError(WavErrorKind kind, const std::string& detail)
      : Error(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(detail) {}

  WavErrorKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }

 private:
  WavErrorKind kind_;
  std::string detail_;
};

/// The target transcription cannot be emitted within the available frames,
/// or contains characters outside the alphabet.
class UnreachableTargetError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite. `step` is the epoch (training) or
/// iteration (attack) at which it was detected.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t step)
      : Error(what + " (at step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wsadv
