// Copyright 2026 The sepsim Authors
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

#include "sepsim/error.hpp"

namespace sepsim {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kUnknownFrame: return "unknown frame";
    case ErrorKind::kRankDeficient: return "rank deficient";
    case ErrorKind::kSingularDecoupling: return "singular decoupling matrix";
    case ErrorKind::kRelativeDegree: return "relative degree";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kTimeout: return "timeout";
    case ErrorKind::kFall: return "fall";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kSchema: return "schema error";
  }
  return "error";
}

}  // namespace sepsim
