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

#ifndef BSPF_ENV_HPP
#define BSPF_ENV_HPP

#include <cstdint>
#include <memory>

#include "bspf/comm/communicator.hpp"

namespace bspf {

class DataStore;

/// What a submitted function sees on its worker. Valid only for the duration
/// of that function's execution.
struct ExecEnv {
  int rank = 0;
  int world_size = 1;
  comm::Communicator *communicator = nullptr;
  CommTimer *timer = nullptr;
  std::shared_ptr<DataStore> store;
  /// Per-application RNG seed.
  uint64_t seed = 0;

  comm::Communicator &comm() const { return *communicator; }
};

}  // namespace bspf

#endif  // BSPF_ENV_HPP
