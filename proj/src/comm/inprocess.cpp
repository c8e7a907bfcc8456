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

// Shared-memory backend: every rank of a world lives in this process and
// posting a frame pushes it straight into the destination's mailbox.

#include <condition_variable>
#include <map>
#include <mutex>

#include "bspf/comm/communicator.hpp"

namespace bspf::comm {

namespace {

struct World {
  int size = 0;
  std::vector<std::shared_ptr<Mailbox>> boxes;
  std::vector<bool> joined;
  int joined_count = 0;
};

struct Hub {
  std::mutex mutex;
  std::condition_variable cv;
  std::map<std::string, std::shared_ptr<World>> worlds;
};

Hub &hub() {
  static Hub h;
  return h;
}

class InProcessTransport final : public Transport {
 public:
  InProcessTransport(std::shared_ptr<World> world, int rank) : world_(std::move(world)), rank_(rank) {}

  ~InProcessTransport() override {
    for (int r = 0; r < world_->size; ++r) {
      if (r != rank_) world_->boxes[r]->close_source(rank_, "communicator closed");
    }
  }

  void post(int dest, Frame frame) override { world_->boxes[dest]->push(std::move(frame)); }

 private:
  std::shared_ptr<World> world_;
  int rank_;
};

}  // namespace

namespace detail {

std::unique_ptr<Communicator> init_inprocess(const WorldConfig &config) {
  auto &h = hub();
  std::unique_lock lock(h.mutex);
  auto &slot = h.worlds[config.ns];
  if (!slot) {
    slot = std::make_shared<World>();
    slot->size = config.world_size;
    slot->joined.assign(config.world_size, false);
    for (int r = 0; r < config.world_size; ++r) slot->boxes.push_back(std::make_shared<Mailbox>(config.world_size));
  }
  auto world = slot;
  if (world->size != config.world_size) {
    throw Error(ErrorCode::WorldSizeMismatch, "namespace '" + config.ns + "' has world size " +
                                                  std::to_string(world->size) + ", not " +
                                                  std::to_string(config.world_size));
  }
  if (world->joined[config.rank]) {
    throw Error(ErrorCode::DuplicateRank, "rank " + std::to_string(config.rank) + " already joined namespace '" +
                                              config.ns + "'");
  }
  world->joined[config.rank] = true;
  ++world->joined_count;
  h.cv.notify_all();
  const bool complete = h.cv.wait_for(lock, config.timeout, [&] { return world->joined_count == world->size; });
  if (!complete) {
    throw Error(ErrorCode::RendezvousTimeout, std::to_string(world->joined_count) + " of " +
                                                  std::to_string(world->size) + " ranks joined namespace '" +
                                                  config.ns + "'");
  }
  auto transport = std::make_unique<InProcessTransport>(world, config.rank);
  return std::make_unique<Communicator>(config, world->boxes[config.rank], std::move(transport));
}

}  // namespace detail

}  // namespace bspf::comm
