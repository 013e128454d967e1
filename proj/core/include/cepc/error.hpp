// Copyright 2026 The cepc Authors
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

#ifndef CEPC_ERROR_HPP_
#define CEPC_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace cepc {

/// Broad failure classes. Validation kinds map to CLI exit code 2, the
/// rest to exit code 1.
enum class ErrorKind {
  kShape,
  kInput,
  kConfig,
  kData,
  kFormat,
  kSpec,
  kDegenerate,
  kTraining,
  kIo,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for errors caused by bad user input rather than a runtime fault.
bool is_validation(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CEPC_DEFINE_ERROR(Name, Kind)                      \
  class Name : public Error {                              \
   public:                                                 \
    explicit Name(const std::string& message)              \
        : Error(ErrorKind::Kind, message) {}               \
  };

CEPC_DEFINE_ERROR(ShapeError, kShape)
CEPC_DEFINE_ERROR(InputError, kInput)
CEPC_DEFINE_ERROR(ConfigError, kConfig)
CEPC_DEFINE_ERROR(DataError, kData)
CEPC_DEFINE_ERROR(FormatError, kFormat)
CEPC_DEFINE_ERROR(SpecError, kSpec)
CEPC_DEFINE_ERROR(DegenerateError, kDegenerate)
CEPC_DEFINE_ERROR(TrainingError, kTraining)
CEPC_DEFINE_ERROR(IoError, kIo)

#undef CEPC_DEFINE_ERROR

}  // namespace cepc

#endif  // CEPC_ERROR_HPP_
