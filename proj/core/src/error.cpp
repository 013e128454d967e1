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

#include "cepc/error.hpp"

namespace cepc {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kSpec: return "spec";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

bool is_validation(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kShape:
    case ErrorKind::kInput:
    case ErrorKind::kConfig:
    case ErrorKind::kData:
    case ErrorKind::kFormat:
    case ErrorKind::kSpec:
      return true;
    default:
      return false;
  }
}

}  // namespace cepc
