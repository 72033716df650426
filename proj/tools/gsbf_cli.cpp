// gsbf: experiment front end.
//
//   gsbf run --config exp.yaml [--trials N] [--seed S] [--out DIR] [--methods logsum,cb]
//   gsbf summarize --in DIR
//   gsbf oracle-check --config small.yaml
//
// Exit status: 0 success, 1 when the only problems were infeasible instances, 2 otherwise.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsbf/harness/config.hpp"
#include "gsbf/harness/csv.hpp"
#include "gsbf/harness/summary.hpp"
#include "gsbf/harness/trials.hpp"

namespace fs = std::filesystem;
using namespace gsbf;
using namespace gsbf::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitFailure = 2;

int exit_code(const std::vector<TrialRecord>& records) {
  bool infeasible = false;
  for (const TrialRecord& r : records) {
    if (r.status == "infeasible")
      infeasible = true;
    else if (!r.ok())
      return kExitFailure;
  }
  return infeasible ? kExitInfeasible : kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_run(const std::string& config_path, int trials, long long seed, const std::string& out_dir,
            const std::string& methods) {
  ExperimentConfig cfg = config_path.empty() ? parse_config("", "<defaults>") : load_config(config_path);
  if (trials > 0) cfg.trials = trials;
  if (seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(seed);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (!methods.empty()) cfg.methods = split_list(methods);
  cfg.validate();

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream resolved(dir / "config.yaml", std::ios::binary | std::ios::trunc);
    resolved << to_yaml(cfg);
  }

  // Records are appended here as trials finish, in completion order.
  const fs::path partial = dir / "records.partial.csv";
  std::ofstream progress(partial, std::ios::binary | std::ios::trunc);
  if (!progress) throw CsvError(partial.string() + ": cannot open for writing");
  progress << kRecordsHeader << '\n';
  const int workers = effective_workers(cfg);
  const int total = static_cast<int>(cfg.sinr_sweep_db.size()) * cfg.trials;
  int done = 0;
  const TrialResults res = run_trials(cfg, workers, [&](const std::vector<TrialRecord>& recs, const auto&) {
    for (const TrialRecord& r : recs) progress << record_line(r) << '\n';
    progress.flush();
    std::fprintf(stderr, "[%d/%d] sinr %g dB seed %llu\n", ++done, total, recs.front().sinr_db,
                 static_cast<unsigned long long>(recs.front().seed));
  });
  progress.close();

  export_results(res, dir);
  fs::remove(partial);
  std::cout << format_summary(summarize(res.records));
  return exit_code(res.records);
}

int cmd_summarize(const std::string& in_dir) {
  const std::vector<TrialRecord> records = read_records_csv(fs::path(in_dir) / "records.csv");
  if (records.empty()) throw CsvError(in_dir + "/records.csv: no records");
  std::cout << format_summary(summarize(records));
  return kExitOk;
}

int cmd_oracle_check(const std::string& config_path) {
  ExperimentConfig cfg = load_config(config_path);
  if (cfg.network.num_tasks() > kOracleMaxTasks) {
    std::cerr << "oracle-check: num_bs * num_users must be <= " << kOracleMaxTasks << "\n";
    return kExitFailure;
  }
  std::vector<std::string> methods{"oracle"};
  for (const std::string& m : cfg.methods)
    if (m != "oracle") methods.push_back(m);
  cfg.methods = methods;

  const TrialResults res = run_trials(cfg, effective_workers(cfg));
  int violations = 0;
  int infeasible = 0;
  int failures = 0;
  for (std::size_t i = 0; i < res.records.size();) {
    std::size_t j = i;
    const TrialRecord* oracle = nullptr;
    for (; j < res.records.size() && res.records[j].seed == res.records[i].seed &&
           res.records[j].sinr_db == res.records[i].sinr_db;
         ++j)
      if (res.records[j].method == "oracle") oracle = &res.records[j];
    std::printf("sinr %g dB seed %llu:", res.records[i].sinr_db, static_cast<unsigned long long>(res.records[i].seed));
    if (oracle == nullptr || oracle->status == "infeasible") {
      std::printf(" infeasible\n");
      ++infeasible;
      i = j;
      continue;
    }
    for (std::size_t r = i; r < j; ++r) {
      const TrialRecord& rec = res.records[r];
      std::printf(" %s=%.6f(%s)", rec.method.c_str(), rec.total_w, rec.status.c_str());
      if (rec.status == "infeasible") continue;
      if (!rec.ok()) {
        ++failures;
        continue;
      }
      if (oracle->ok() && oracle->total_w > rec.total_w + 1e-5) {
        std::printf("[oracle above %s]", rec.method.c_str());
        ++violations;
      }
    }
    std::printf("\n");
    i = j;
  }
  std::printf("%d violations, %d failures, %d infeasible instances\n", violations, failures, infeasible);
  if (violations || failures) return kExitFailure;
  return infeasible ? kExitInfeasible : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group sparse beamforming experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, methods, in_dir;
  int trials = 0;
  long long seed = -1;

  CLI::App* run = app.add_subcommand("run", "Run seeded trials and write CSV results");
  run->add_option("--config", config_path, "Experiment configuration (YAML); defaults when omitted");
  run->add_option("--trials", trials, "Trials per SINR point")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Base seed")->check(CLI::NonNegativeNumber);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--methods", methods, "Comma separated subset of logsum,mixed_l12,cb,oracle");

  CLI::App* sum = app.add_subcommand("summarize", "Summarize records.csv of a previous run");
  sum->add_option("--in", in_dir, "Directory of a previous run")->required();

  CLI::App* orc = app.add_subcommand("oracle-check", "Compare heuristics against exhaustive search");
  orc->add_option("--config", config_path, "Experiment configuration (YAML)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitFailure;
  }

  try {
    if (*run) return cmd_run(config_path, trials, seed, out_dir, methods);
    if (*sum) return cmd_summarize(in_dir);
    if (*orc) return cmd_oracle_check(config_path);
  } catch (const std::exception& e) {
    std::cerr << "gsbf: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
