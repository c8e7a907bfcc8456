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

#ifndef BSPF_BENCH_HPP
#define BSPF_BENCH_HPP

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bspf/comm/communicator.hpp"
#include "bspf/env.hpp"
#include "bspf/kernels.hpp"
#include "bspf/table.hpp"

namespace bspf::bench {

/// Synthetic input: a key column plus value columns, all Int64.
struct GenSpec {
  std::size_t rows = 100000;
  /// Keys are drawn uniformly with replacement from ceil(cardinality * rows) values.
  double cardinality = 0.9;
  uint64_t seed = 1;
  std::size_t value_columns = 1;
  double null_fraction = 0.0;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
  std::size_t key_range() const;
};

/// Rows [start, start+len) of the global table for shard `rank` of `world`. Every
/// cell is a pure function of (seed, column, row), so shards of any world size
/// concatenate to the same global table.
Table generate(const GenSpec &spec, std::size_t rank = 0, std::size_t world = 1);

/// Join build side: key_range() rows with keys over the same range plus one
/// value column "w". Same sharding rule as generate.
Table generate_dimension(const GenSpec &spec, std::size_t rank = 0, std::size_t world = 1);

/// Expected distinct count of n uniform draws with replacement from m values.
double expected_distinct(std::size_t n, std::size_t m);

enum class Op { Join, Groupby, Sort, Map, Pipeline };

std::string_view op_name(Op op);
Op parse_op(std::string_view name);

/// Serial references built from ordered maps, independent of the kernels.
Table oracle_join(const Table &left, const Table &right, JoinType jt);
Table oracle_groupby(const Table &t);
Table oracle_sort(const Table &t);
/// v + 1, then + 0.5 (Float64).
Table oracle_map(const Table &t);
Table oracle_pipeline(const Table &left, const Table &right);

/**
 * First difference between two tables after both are put in canonical row
 * order, or nullopt if equal. Float64 cells compare within rel_tol relative
 * error. If ordered_column is set, that column must also match row by row in
 * the original order (sorted outputs).
 */
std::optional<std::string> diff_tables(const Table &actual, const Table &expected, double rel_tol,
                                       std::optional<std::size_t> ordered_column = std::nullopt);

/// A unit of work run identically on every rank.
struct Job {
  std::string kind = "verify";  // verify | bench
  Op op = Op::Join;
  GenSpec spec;
  std::size_t repeats = 1;
  /// Verify self-test: perturb the oracle so the comparison must fail.
  bool corrupt = false;
};

nlohmann::json job_to_json(const Job &job);
Job job_from_json(const nlohmann::json &j);

/**
 * Runs one rank of a job: generates this rank's shards, runs the operator(s)
 * and, for verify, gathers results to rank 0 and checks them against the
 * oracles. Returns the report on rank 0 and null elsewhere.
 *
 * verify report: {"pass": bool, "cases": [{"name", "pass", "rows", "detail"}]}
 * bench report:  {"records": [BenchRecord...], "markers": [...]}
 */
nlohmann::json run_job_rank(ExecEnv &env, const Job &job);

/// Runs a job on a fresh executor of the given parallelism and backend.
nlohmann::json run_job(const Job &job, std::size_t parallelism, comm::Backend backend,
                       std::chrono::milliseconds timeout = comm::kDefaultTimeout);

/// One timed repetition of an operator.
struct BenchRecord {
  std::string op;
  std::string backend;
  std::size_t p = 1;
  std::size_t repeat = 0;
  double wall_ms = 0;
  double comm_ms_max = 0;
  double comp_ms_max = 0;
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  uint64_t seed = 0;
  std::vector<double> wall_ms_rank, comm_ms_rank, comp_ms_rank;
};

std::vector<BenchRecord> records_from_json(const nlohmann::json &report, const std::string &backend);

inline constexpr const char *kBenchHeader = "op,backend,p,repeat,wall_ms,comm_ms_max,comp_ms_max,rows_in,rows_out,seed";
std::string format_records(const std::vector<BenchRecord> &records, bool header = true);

/// Per (op, backend, p) medians, speedup vs p=1 and comm fraction, as a
/// markdown table. Throws MalformedCsv on input that is not a bench CSV.
struct ReportRow {
  std::string op;
  std::string backend;
  std::size_t p = 1;
  std::size_t runs = 0;
  double median_wall_ms = 0;
  double median_comm_ms = 0;
  double median_comp_ms = 0;
  std::optional<double> speedup;
  double comm_fraction = 0;
};

std::vector<ReportRow> summarize(const std::string &csv_text);
std::string format_report(const std::vector<ReportRow> &rows);
std::string format_plot_data(const std::vector<ReportRow> &rows);

}  // namespace bspf::bench

#endif  // BSPF_BENCH_HPP
