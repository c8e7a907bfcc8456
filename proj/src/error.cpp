/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "bspf/error.hpp"

namespace bspf {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidRank: return "InvalidRank";
    case ErrorCode::RendezvousTimeout: return "RendezvousTimeout";
    case ErrorCode::DuplicateRank: return "DuplicateRank";
    case ErrorCode::WorldSizeMismatch: return "WorldSizeMismatch";
    case ErrorCode::PeerFailure: return "PeerFailure";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ProtocolMismatch: return "ProtocolMismatch";
    case ErrorCode::SpawnFailure: return "SpawnFailure";
    case ErrorCode::ConstructionError: return "ConstructionError";
    case ErrorCode::NoExecutable: return "NoExecutable";
    case ErrorCode::ExecutionError: return "ExecutionError";
    case ErrorCode::ExecutorStopped: return "ExecutorStopped";
    case ErrorCode::ResultTooLarge: return "ResultTooLarge";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
  }
  return "Unknown";
}

}  // namespace bspf
