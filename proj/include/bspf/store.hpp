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

#ifndef BSPF_STORE_HPP
#define BSPF_STORE_HPP

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "bspf/env.hpp"
#include "bspf/table.hpp"

namespace bspf {

/// A named table retained across applications: one partition per producer rank.
class StoreEntry {
 public:
  StoreEntry(std::string name, Schema schema, std::vector<std::size_t> lengths, uint64_t token)
      : name_(std::move(name)), schema_(std::move(schema)), lengths_(std::move(lengths)), token_(token),
        created_(std::chrono::system_clock::now()) {}
  virtual ~StoreEntry() = default;

  const std::string &name() const { return name_; }
  const Schema &schema() const { return schema_; }
  int producer_world() const { return static_cast<int>(lengths_.size()); }
  const std::vector<std::size_t> &lengths() const { return lengths_; }
  uint64_t token() const { return token_; }
  std::chrono::system_clock::time_point created() const { return created_; }

  virtual Table partition(int rank) const = 0;

 private:
  std::string name_;
  Schema schema_;
  std::vector<std::size_t> lengths_;
  uint64_t token_;
  std::chrono::system_clock::time_point created_;
};

/**
 * Backing storage for store_put / store_get. A put is staged rank by rank and
 * becomes visible only when rank 0 commits it after every rank has staged.
 */
class DataStore {
 public:
  virtual ~DataStore() = default;

  virtual void stage(const std::string &name, uint64_t token, int rank, int world, const Table &partition) = 0;
  /// Publishes the staged partitions of (name, token) atomically, replacing any previous entry.
  virtual void commit(const std::string &name, uint64_t token, int world, const Schema &schema) = 0;
  /// Current entry, waiting until it exists or the deadline passes (nullptr).
  virtual std::shared_ptr<const StoreEntry> await(const std::string &name,
                                                  std::chrono::steady_clock::time_point deadline) = 0;
  /// The entry committed under token, if still alive.
  virtual std::shared_ptr<const StoreEntry> find(const std::string &name, uint64_t token) = 0;

  /// Removes an entry; absent names are ignored.
  virtual void drop(const std::string &name) = 0;
  virtual std::vector<std::string> list() = 0;
};

/// Host-process store shared by every executor in the process.
class MemoryStore final : public DataStore {
 public:
  static std::shared_ptr<MemoryStore> shared();

  void stage(const std::string &name, uint64_t token, int rank, int world, const Table &partition) override;
  void commit(const std::string &name, uint64_t token, int world, const Schema &schema) override;
  std::shared_ptr<const StoreEntry> await(const std::string &name,
                                          std::chrono::steady_clock::time_point deadline) override;
  std::shared_ptr<const StoreEntry> find(const std::string &name, uint64_t token) override;
  void drop(const std::string &name) override;
  std::vector<std::string> list() override;

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::string, std::shared_ptr<const StoreEntry>> entries_;
  std::map<std::pair<std::string, uint64_t>, std::vector<std::optional<Table>>> staging_;
  std::map<std::pair<std::string, uint64_t>, std::weak_ptr<const StoreEntry>> history_;
};

/**
 * Store for multi-process worlds: partitions are spilled as
 * <dir>/<ns>/<name>/part-<rank>.bspf next to a manifest.json, and the manifest
 * is published through the rendezvous service under "store/<ns>/<name>".
 */
class SpillStore final : public DataStore {
 public:
  SpillStore(std::filesystem::path directory, std::string rendezvous, std::string ns,
             std::chrono::milliseconds timeout = std::chrono::milliseconds(30000));

  void stage(const std::string &name, uint64_t token, int rank, int world, const Table &partition) override;
  void commit(const std::string &name, uint64_t token, int world, const Schema &schema) override;
  std::shared_ptr<const StoreEntry> await(const std::string &name,
                                          std::chrono::steady_clock::time_point deadline) override;
  std::shared_ptr<const StoreEntry> find(const std::string &name, uint64_t token) override;
  void drop(const std::string &name) override;
  std::vector<std::string> list() override;

  std::filesystem::path entry_dir(const std::string &name) const { return root_ / name; }

 private:
  std::shared_ptr<const StoreEntry> load(const std::string &manifest_json) const;
  std::string key(const std::string &name) const { return "store/" + ns_ + "/" + name; }

  std::filesystem::path root_;
  std::string rendezvous_;
  std::string ns_;
  std::chrono::milliseconds timeout_;
};

/// Collective: every rank of the producing application contributes its partition.
void store_put(ExecEnv &env, const std::string &name, const Table &t);

/// Collective: blocks until the entry exists (Timeout otherwise). With equal
/// parallelism rank r gets producer partition r; otherwise rank r gets the r-th
/// even chunk of the producer's rank-major rows.
Table store_get(ExecEnv &env, const std::string &name, std::chrono::milliseconds timeout);

void store_drop(DataStore &store, const std::string &name);
std::vector<std::string> store_list(DataStore &store);

}  // namespace bspf

#endif  // BSPF_STORE_HPP
