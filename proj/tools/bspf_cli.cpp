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

// Command-line driver: data generation, verification, benchmarks, reports, and
// the rendezvous / worker entry points of multi-process runs.

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "bspf/bench.hpp"
#include "bspf/comm/rendezvous.hpp"
#include "bspf/csv.hpp"
#include "bspf/serialize.hpp"
#include "bspf/store.hpp"

extern char **environ;

namespace fs = std::filesystem;
using namespace bspf;

namespace {

struct Common {
  bench::GenSpec spec;
  std::vector<std::size_t> parallelism{1};
  std::string backend = "inproc";
  std::string rendezvous;
  std::string ns;
  std::size_t repeats = 3;
  std::string out;
  long timeout_ms = 60000;
};

void add_spec_flags(CLI::App *app, Common &c) {
  app->add_option("--rows", c.spec.rows, "number of rows")->capture_default_str();
  app->add_option("--cardinality", c.spec.cardinality, "fraction of distinct keys, in (0, 1]")->capture_default_str();
  app->add_option("--seed", c.spec.seed, "RNG seed")->capture_default_str();
  app->add_option("--value-columns", c.spec.value_columns, "value columns besides the key")->capture_default_str();
  app->add_option("--null-fraction", c.spec.null_fraction, "probability of a null cell")->capture_default_str();
}

void add_run_flags(CLI::App *app, Common &c) {
  app->add_option("--parallelism,-p", c.parallelism, "worker count(s), comma separated")->delimiter(',');
  app->add_option("--backend", c.backend, "inproc or tcp")->check(CLI::IsMember({"inproc", "tcp"}));
  app->add_option("--rendezvous", c.rendezvous, "host:port of a running rendezvous service (tcp)");
  app->add_option("--namespace", c.ns, "rendezvous namespace (tcp)");
  app->add_option("--timeout-ms", c.timeout_ms, "collective timeout")->capture_default_str();
}

std::string self_exe() { return fs::read_symlink("/proc/self/exe").string(); }

std::string unique_ns() {
  return "cli-" + std::to_string(::getpid()) + "-" +
         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count());
}

/// Runs the job as `p` worker processes talking over TCP.
nlohmann::json run_processes(const bench::Job &job, std::size_t p, const Common &c) {
  std::unique_ptr<comm::RendezvousServer> server;
  std::string address = c.rendezvous;
  if (address.empty()) {
    server = std::make_unique<comm::RendezvousServer>();
    address = server->address();
  }
  const std::string ns = c.ns.empty() ? unique_ns() : c.ns;
  const auto scratch = fs::temp_directory_path() / ("bspf-" + ns);
  fs::create_directories(scratch);
  const auto job_path = scratch / "job.json", result_path = scratch / "result.json";
  std::ofstream(job_path) << bench::job_to_json(job).dump();

  const std::string exe = self_exe();
  std::vector<pid_t> pids;
  for (std::size_t r = 0; r < p; ++r) {
    std::vector<std::string> env_strings;
    for (char **e = environ; *e; ++e) {
      if (std::string_view(*e).rfind("BSPF_", 0) != 0) env_strings.emplace_back(*e);
    }
    env_strings.push_back("BSPF_RANK=" + std::to_string(r));
    env_strings.push_back("BSPF_WORLD=" + std::to_string(p));
    env_strings.push_back("BSPF_RENDEZVOUS=" + address);
    env_strings.push_back("BSPF_NAMESPACE=" + ns);
    env_strings.push_back("BSPF_TIMEOUT_MS=" + std::to_string(c.timeout_ms));
    std::vector<std::string> args{exe, "worker", "--job", job_path.string(), "--result", result_path.string()};
    std::vector<char *> argv, envp;
    for (auto &a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    for (auto &e : env_strings) envp.push_back(e.data());
    envp.push_back(nullptr);
    pid_t pid;
    if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), envp.data()) != 0) {
      for (auto q : pids) ::kill(q, SIGTERM);
      throw Error(ErrorCode::SpawnFailure, "could not start worker " + std::to_string(r));
    }
    pids.push_back(pid);
  }
  std::vector<int> failed;
  for (std::size_t r = 0; r < p; ++r) {
    int status = 0;
    ::waitpid(pids[r], &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed.push_back(static_cast<int>(r));
  }
  if (!failed.empty()) {
    std::string ranks;
    for (int r : failed) ranks += (ranks.empty() ? "" : ",") + std::to_string(r);
    fs::remove_all(scratch);
    throw Error(ErrorCode::ExecutionError, "worker rank(s) " + ranks + " failed");
  }
  std::ifstream in(result_path);
  auto result = nlohmann::json::parse(in);
  fs::remove_all(scratch);
  return result;
}

nlohmann::json run(const bench::Job &job, std::size_t p, const Common &c) {
  const auto backend = comm::parse_backend(c.backend);
  if (backend == comm::Backend::Tcp) return run_processes(job, p, c);
  return bench::run_job(job, p, backend, std::chrono::milliseconds(c.timeout_ms));
}

std::string env_or(const char *name, const std::string &fallback = "") {
  const char *v = std::getenv(name);
  return v ? v : fallback;
}

int cmd_generate(const Common &c, std::size_t shards, bool dimension, const std::string &format) {
  if (c.out.empty()) throw Error(ErrorCode::InvalidArgument, "--out is required");
  auto make = [&](std::size_t r, std::size_t n) {
    return dimension ? bench::generate_dimension(c.spec, r, n) : bench::generate(c.spec, r, n);
  };
  auto write = [&](const fs::path &path, const Table &t) {
    if (format == "csv") {
      csv::write(path, t);
    } else {
      write_table_file(path, t);
    }
  };
  if (shards <= 1) {
    write(c.out, make(0, 1));
    std::cout << "wrote " << c.out << "\n";
    return 0;
  }
  fs::create_directories(c.out);
  for (std::size_t r = 0; r < shards; ++r) {
    const auto path = fs::path(c.out) / ("part-" + std::to_string(r) + "." + format);
    write(path, make(r, shards));
  }
  std::cout << "wrote " << shards << " shards to " << c.out << "\n";
  return 0;
}

int cmd_verify(const Common &c, const std::vector<std::string> &ops, bool corrupt) {
  bool all_pass = true;
  for (const auto &name : ops) {
    bench::Job job;
    job.kind = "verify";
    job.op = bench::parse_op(name);
    job.spec = c.spec;
    job.corrupt = corrupt;
    for (auto p : c.parallelism) {
      const auto report = run(job, p, c);
      for (const auto &cs : report.at("cases")) {
        const bool pass = cs.at("pass").get<bool>();
        all_pass = all_pass && pass;
        std::cout << (pass ? "PASS " : "FAIL ") << cs.at("name").get<std::string>() << " p=" << p
                  << " backend=" << c.backend << " rows=" << c.spec.rows << " c=" << c.spec.cardinality
                  << " out=" << cs.at("rows").get<std::size_t>();
        if (!pass) std::cout << " : " << cs.at("detail").get<std::string>();
        std::cout << "\n";
      }
    }
  }
  return all_pass ? 0 : 1;
}

int cmd_bench(const Common &c, const std::vector<std::string> &ops) {
  std::vector<bench::BenchRecord> records;
  for (const auto &name : ops) {
    bench::Job job;
    job.kind = "bench";
    job.op = bench::parse_op(name);
    job.spec = c.spec;
    job.repeats = c.repeats;
    for (auto p : c.parallelism) {
      auto got = bench::records_from_json(run(job, p, c), c.backend);
      records.insert(records.end(), got.begin(), got.end());
    }
  }
  const auto text = bench::format_records(records);
  if (c.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(c.out) << text;
  }
  std::cerr << bench::format_report(bench::summarize(text));
  return 0;
}

int cmd_report(const std::string &in, const std::string &plot_out) {
  std::ifstream f(in);
  if (!f) throw Error(ErrorCode::IoError, "cannot read " + in);
  std::stringstream ss;
  ss << f.rdbuf();
  const auto rows = bench::summarize(ss.str());
  std::cout << bench::format_report(rows);
  if (!plot_out.empty()) std::ofstream(plot_out) << bench::format_plot_data(rows);
  return 0;
}

volatile sig_atomic_t g_stop = 0;

int cmd_rendezvous(const std::string &bind) {
  auto hp = comm::parse_host_port(bind);
  comm::RendezvousServer server(hp.host, hp.port);
  std::cout << server.address() << std::endl;
  ::signal(SIGINT, [](int) { g_stop = 1; });
  ::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

int cmd_worker(const std::string &job_path, const std::string &result_path) {
  comm::WorldConfig cfg;
  cfg.backend = comm::Backend::Tcp;
  cfg.rank = std::stoi(env_or("BSPF_RANK", "0"));
  cfg.world_size = std::stoi(env_or("BSPF_WORLD", "1"));
  cfg.rendezvous = env_or("BSPF_RENDEZVOUS");
  cfg.ns = env_or("BSPF_NAMESPACE", "default");
  cfg.timeout = std::chrono::milliseconds(std::stol(env_or("BSPF_TIMEOUT_MS", "30000")));
  std::ifstream in(job_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + job_path);
  const auto job = bench::job_from_json(nlohmann::json::parse(in));

  auto communicator = comm::Communicator::init(cfg);
  CommTimer timer;
  communicator->set_timer(&timer);
  ExecEnv env;
  env.rank = cfg.rank;
  env.world_size = cfg.world_size;
  env.communicator = communicator.get();
  env.timer = &timer;
  env.store = MemoryStore::shared();
  env.seed = job.spec.seed;
  const auto result = bench::run_job_rank(env, job);
  if (cfg.rank == 0) {
    const auto tmp = result_path + ".tmp";
    std::ofstream(tmp) << result.dump();
    fs::rename(tmp, result_path);
  }
  return 0;
}

std::vector<std::string> expand_ops(std::vector<std::string> ops) {
  if (ops.size() == 1 && ops[0] == "all") return {"join", "groupby", "sort", "map", "pipeline"};
  return ops;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"bspf: distributed dataframe operators on a BSP worker gang"};
  app.require_subcommand(1);
  Common c;

  auto *gen = app.add_subcommand("generate", "write synthetic tables");
  add_spec_flags(gen, c);
  std::size_t shards = 1;
  bool dimension = false;
  std::string format = "bspf";
  gen->add_option("--shards", shards, "one file per target rank")->capture_default_str();
  gen->add_flag("--dimension", dimension, "emit the join build side instead");
  gen->add_option("--format", format, "bspf or csv")->check(CLI::IsMember({"bspf", "csv"}));
  gen->add_option("--out", c.out, "file, or directory when sharded")->required();

  std::vector<std::string> ops{"all"};
  bool corrupt = false;
  auto *verify = app.add_subcommand("verify", "compare distributed results with serial oracles");
  add_spec_flags(verify, c);
  add_run_flags(verify, c);
  verify->add_option("--op", ops, "join, groupby, sort, map, pipeline or all")->delimiter(',');
  verify->add_flag("--debug-corrupt", corrupt, "perturb the oracle (harness self-test)");

  auto *bench_cmd = app.add_subcommand("bench", "time operators; CSV per repeat");
  add_spec_flags(bench_cmd, c);
  add_run_flags(bench_cmd, c);
  bench_cmd->add_option("--op", ops, "join, groupby, sort, map, pipeline or all")->delimiter(',');
  bench_cmd->add_option("--repeats", c.repeats)->capture_default_str();
  bench_cmd->add_option("--out", c.out, "CSV path (default stdout)");

  auto *pipe = app.add_subcommand("pipeline", "verify then time join, groupby, sort, add_scalar");
  add_spec_flags(pipe, c);
  add_run_flags(pipe, c);
  pipe->add_option("--repeats", c.repeats)->capture_default_str();
  pipe->add_option("--out", c.out, "CSV path (default stdout)");

  std::string report_in, plot_out;
  auto *report = app.add_subcommand("report", "summarize a bench CSV as markdown");
  report->add_option("--in", report_in, "bench CSV")->required();
  report->add_option("--out", plot_out, "plot data CSV");

  std::string bind = "127.0.0.1:0";
  auto *rdv = app.add_subcommand("rendezvous", "run the bootstrap service until interrupted");
  rdv->add_option("--bind", bind, "host:port")->capture_default_str();

  std::string job_path, result_path;
  auto *worker = app.add_subcommand("worker", "one rank of a multi-process run (BSPF_* environment)");
  worker->add_option("--job", job_path)->required();
  worker->add_option("--result", result_path)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_generate(c, shards, dimension, format);
    if (verify->parsed()) return cmd_verify(c, expand_ops(ops), corrupt);
    if (bench_cmd->parsed()) return cmd_bench(c, expand_ops(ops));
    if (pipe->parsed()) return cmd_bench(c, {"pipeline"});
    if (report->parsed()) return cmd_report(report_in, plot_out);
    if (rdv->parsed()) return cmd_rendezvous(bind);
    if (worker->parsed()) return cmd_worker(job_path, result_path);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
