// Copyright 2026 The sktod Authors.
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

namespace sktod {

// Broad failure classes. The C API and the CLI map these onto status and
// exit codes, so every throw site picks one deliberately.
enum class ErrorKind {
  kUsage,         // bad arguments or configuration
  kData,          // malformed or inconsistent input files
  kPrecondition,  // caller violated an operation precondition
  kTransport,     // external service unreachable / timed out / non-2xx
  kProtocol,      // external service replied with a malformed payload
  kNotFound,      // unknown session or resource
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error(ErrorKind::kUsage, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorKind::kData, message) {}
};

// Malformed document. `byte_offset` points at the offending byte.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t byte_offset,
             const std::string& detail)
      : DataError(file + ": parse error at byte " +
                  std::to_string(byte_offset) + ": " + detail),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Duplicate or dangling references.
class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

// logs/labels length mismatch.
class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& message)
      : Error(ErrorKind::kPrecondition, message) {}
};

class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool connection_refused = false)
      : Error(ErrorKind::kTransport, message),
        connection_refused_(connection_refused) {}

  // True when the endpoint could not be reached at all (vs. timeout/5xx).
  bool connection_refused() const noexcept { return connection_refused_; }

 private:
  bool connection_refused_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message)
      : Error(ErrorKind::kProtocol, message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message)
      : Error(ErrorKind::kNotFound, message) {}
};

}  // namespace sktod
