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

#include "bspf/store.hpp"

#include <atomic>
#include <random>
#include <thread>

#include "json.hpp"

#include "bspf/comm/rendezvous.hpp"
#include "bspf/serialize.hpp"
#include "bspf/table_comm.hpp"

namespace bspf {

namespace fs = std::filesystem;

namespace {

class MemoryEntry final : public StoreEntry {
 public:
  MemoryEntry(std::string name, Schema schema, std::vector<Table> parts, uint64_t token)
      : StoreEntry(std::move(name), std::move(schema), lengths_of(parts), token), parts_(std::move(parts)) {}

  Table partition(int rank) const override { return parts_.at(rank); }

 private:
  static std::vector<std::size_t> lengths_of(const std::vector<Table> &parts) {
    std::vector<std::size_t> out;
    for (const auto &p : parts) out.push_back(p.num_rows());
    return out;
  }

  std::vector<Table> parts_;
};

class SpilledEntry final : public StoreEntry {
 public:
  SpilledEntry(std::string name, Schema schema, std::vector<std::size_t> lengths, uint64_t token, fs::path dir)
      : StoreEntry(std::move(name), std::move(schema), std::move(lengths), token), dir_(std::move(dir)) {}

  Table partition(int rank) const override {
    return read_table_file(dir_ / ("part-" + std::to_string(rank) + ".bspf"));
  }

 private:
  fs::path dir_;
};

void check_name(const std::string &name) {
  if (name.empty() || name.find_first_of(" /\n\t") != std::string::npos || name[0] == '.') {
    throw Error(ErrorCode::InvalidArgument, "store names must be nonempty, without spaces or slashes: '" + name + "'");
  }
}

uint64_t fresh_token() {
  static std::atomic<uint64_t> counter{0};
  static const uint64_t base = std::random_device{}();
  return (base << 32) ^ ++counter;
}

Bytes encode_u64(uint64_t v) {
  Bytes b;
  wire::put_u64(b, v);
  return b;
}

uint64_t decode_u64(const Bytes &b) { return wire::Reader(b).u64(); }

}  // namespace

// ---------------------------------------------------------------------------
// MemoryStore

std::shared_ptr<MemoryStore> MemoryStore::shared() {
  static auto store = std::make_shared<MemoryStore>();
  return store;
}

void MemoryStore::stage(const std::string &name, uint64_t token, int rank, int world, const Table &partition) {
  std::lock_guard lock(mutex_);
  auto &slots = staging_[{name, token}];
  if (slots.empty()) slots.resize(world);
  slots.at(rank) = partition;
}

void MemoryStore::commit(const std::string &name, uint64_t token, int world, const Schema &schema) {
  std::lock_guard lock(mutex_);
  auto it = staging_.find({name, token});
  if (it == staging_.end() || static_cast<int>(it->second.size()) != world) {
    throw Error(ErrorCode::InvalidArgument, "nothing staged for '" + name + "'");
  }
  std::vector<Table> parts;
  for (auto &p : it->second) {
    if (!p) throw Error(ErrorCode::InvalidArgument, "partial staging for '" + name + "'");
    parts.push_back(std::move(*p));
  }
  staging_.erase(it);
  auto entry = std::make_shared<const MemoryEntry>(name, schema, std::move(parts), token);
  entries_[name] = entry;
  history_[{name, token}] = entry;
  for (auto h = history_.begin(); h != history_.end();) h = h->second.expired() ? history_.erase(h) : std::next(h);
  cv_.notify_all();
}

std::shared_ptr<const StoreEntry> MemoryStore::await(const std::string &name,
                                                     std::chrono::steady_clock::time_point deadline) {
  std::unique_lock lock(mutex_);
  cv_.wait_until(lock, deadline, [&] { return entries_.count(name) > 0; });
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : it->second;
}

std::shared_ptr<const StoreEntry> MemoryStore::find(const std::string &name, uint64_t token) {
  std::lock_guard lock(mutex_);
  auto it = history_.find({name, token});
  return it == history_.end() ? nullptr : it->second.lock();
}

void MemoryStore::drop(const std::string &name) {
  std::lock_guard lock(mutex_);
  entries_.erase(name);
}

std::vector<std::string> MemoryStore::list() {
  std::lock_guard lock(mutex_);
  std::vector<std::string> names;
  for (const auto &[k, v] : entries_) names.push_back(k);
  return names;
}

// ---------------------------------------------------------------------------
// SpillStore

SpillStore::SpillStore(fs::path directory, std::string rendezvous, std::string ns, std::chrono::milliseconds timeout)
    : root_(std::move(directory) / ns), rendezvous_(std::move(rendezvous)), ns_(std::move(ns)), timeout_(timeout) {
  fs::create_directories(root_);
}

void SpillStore::stage(const std::string &name, uint64_t token, int rank, int, const Table &partition) {
  const auto dir = root_ / ("." + name + "." + std::to_string(token));
  fs::create_directories(dir);
  write_table_file(dir / ("part-" + std::to_string(rank) + ".bspf"), partition);
}

void SpillStore::commit(const std::string &name, uint64_t token, int world, const Schema &schema) {
  const auto staged = root_ / ("." + name + "." + std::to_string(token));
  std::vector<std::size_t> lengths;
  for (int r = 0; r < world; ++r) {
    lengths.push_back(read_table_file(staged / ("part-" + std::to_string(r) + ".bspf")).num_rows());
  }
  nlohmann::json manifest = {
      {"name", name},
      {"world_size", world},
      {"schema_digest", schema_digest(schema)},
      {"token", token},
      {"lengths", lengths},
  };
  for (const auto &f : schema.fields()) {
    manifest["schema"].push_back({{"name", f.name}, {"domain", std::string(domain_name(f.domain))}});
  }
  write_file_bytes(staged / "manifest.json",
                   std::span(reinterpret_cast<const uint8_t *>(manifest.dump().data()), manifest.dump().size()));
  const auto target = entry_dir(name);
  std::error_code ec;
  fs::remove_all(target, ec);
  fs::rename(staged, target);
  comm::RendezvousClient(rendezvous_, timeout_).put(key(name), manifest.dump());
}

std::shared_ptr<const StoreEntry> SpillStore::load(const std::string &manifest_json) const {
  auto m = nlohmann::json::parse(manifest_json);
  std::vector<Field> fields;
  for (const auto &f : m.at("schema")) {
    auto d = parse_domain(f.at("domain").get<std::string>());
    if (!d) throw Error(ErrorCode::CorruptPayload, "manifest has unknown domain");
    fields.push_back({f.at("name").get<std::string>(), *d});
  }
  const auto name = m.at("name").get<std::string>();
  return std::make_shared<const SpilledEntry>(name, Schema(std::move(fields)),
                                              m.at("lengths").get<std::vector<std::size_t>>(),
                                              m.at("token").get<uint64_t>(), entry_dir(name));
}

std::shared_ptr<const StoreEntry> SpillStore::await(const std::string &name,
                                                    std::chrono::steady_clock::time_point deadline) {
  comm::RendezvousClient kv(rendezvous_, timeout_);
  auto manifest = kv.wait_for(key(name), deadline);
  return manifest ? load(*manifest) : nullptr;
}

std::shared_ptr<const StoreEntry> SpillStore::find(const std::string &name, uint64_t token) {
  auto manifest = comm::RendezvousClient(rendezvous_, timeout_).get(key(name));
  if (!manifest) return nullptr;
  auto entry = load(*manifest);
  return entry->token() == token ? entry : nullptr;
}

void SpillStore::drop(const std::string &name) {
  comm::RendezvousClient(rendezvous_, timeout_).del(key(name));
  std::error_code ec;
  fs::remove_all(entry_dir(name), ec);
}

std::vector<std::string> SpillStore::list() {
  const auto prefix = "store/" + ns_ + "/";
  std::vector<std::string> names;
  for (auto &k : comm::RendezvousClient(rendezvous_, timeout_).list(prefix)) names.push_back(k.substr(prefix.size()));
  return names;
}

// ---------------------------------------------------------------------------
// collective API

void store_put(ExecEnv &env, const std::string &name, const Table &t) {
  check_name(name);
  auto &c = env.comm();
  check_schema_consistency(c, t.schema());
  const uint64_t token = decode_u64(c.broadcast(encode_u64(c.rank() == 0 ? fresh_token() : 0), 0));
  env.store->stage(name, token, c.rank(), c.world_size(), t);
  c.barrier();
  if (c.rank() == 0) env.store->commit(name, token, c.world_size(), t.schema());
  c.barrier();
}

Table store_get(ExecEnv &env, const std::string &name, std::chrono::milliseconds timeout) {
  check_name(name);
  auto &c = env.comm();
  std::shared_ptr<const StoreEntry> entry;
  uint64_t token = 0;
  if (c.rank() == 0) {
    entry = env.store->await(name, std::chrono::steady_clock::now() + timeout);
    token = entry ? entry->token() : 0;
  }
  // 0 signals a timeout to every rank; tokens are never 0 in practice
  token = decode_u64(c.broadcast(encode_u64(token), 0));
  if (token == 0) throw Error(ErrorCode::Timeout, "store entry '" + name + "' did not appear in time");
  if (c.rank() != 0) entry = env.store->find(name, token);
  const bool found = entry != nullptr;
  c.barrier();
  if (!found) throw Error(ErrorCode::Timeout, "store entry '" + name + "' was replaced during get");

  const int consumer = c.world_size();
  if (entry->producer_world() == consumer) return entry->partition(c.rank());

  // contiguous chunk [start, start + len) of the producer's rank-major rows
  const auto &lengths = entry->lengths();
  std::size_t total = 0;
  for (auto n : lengths) total += n;
  const auto chunks = even_split_lengths(total, static_cast<std::size_t>(consumer));
  std::size_t start = 0;
  for (int r = 0; r < c.rank(); ++r) start += chunks[r];
  const std::size_t end = start + chunks[c.rank()];

  std::vector<Table> pieces;
  std::size_t offset = 0;
  for (int p = 0; p < entry->producer_world(); ++p) {
    const auto lo = std::max(start, offset), hi = std::min(end, offset + lengths[p]);
    if (lo < hi) pieces.push_back(slice(entry->partition(p), lo - offset, hi - lo));
    offset += lengths[p];
  }
  return concat(pieces, entry->schema());
}

void store_drop(DataStore &store, const std::string &name) { store.drop(name); }

std::vector<std::string> store_list(DataStore &store) { return store.list(); }

}  // namespace bspf
