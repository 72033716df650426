#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gsbf/diagnostics.hpp"
#include "gsbf/harness/config.hpp"
#include "gsbf/harness/csv.hpp"
#include "gsbf/harness/summary.hpp"
#include "gsbf/harness/trials.hpp"

using namespace gsbf;
using namespace gsbf::harness;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(
network:
  num_bs: 3
  num_users: 3
  antennas: 2
algorithm:
  iter_max: 10
experiment:
  sinr_db: [2, 4]
  trials: 2
  base_seed: 5
  methods: [logsum, cb]
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("gsbf_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void expect_same_except_time(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].sinr_db, b[i].sinr_db);
    EXPECT_EQ(a[i].method, b[i].method);
    EXPECT_EQ(a[i].total_w, b[i].total_w);
    EXPECT_EQ(a[i].transmit_w, b[i].transmit_w);
    EXPECT_EQ(a[i].task_count, b[i].task_count);
    EXPECT_EQ(a[i].iterations, b[i].iterations);
    EXPECT_EQ(a[i].status, b[i].status);
  }
}

TrialResults small_results() {
  static const TrialResults res = run_trials(parse_config(kSmall));
  return res;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const ExperimentConfig c = parse_config("");
  EXPECT_EQ(c, ExperimentConfig{});
  EXPECT_EQ(c.network.num_bs, 8);
  EXPECT_EQ(c.network.num_users, 15);
  EXPECT_EQ(c.trials, 20);
  EXPECT_EQ(c.sinr_sweep_db, (std::vector<double>{0, 2, 4, 6, 8}));
}

TEST(Config, UnknownKeyIsRejectedWithItsLine) {
  try {
    parse_config("network:\n  num_bs: 2\n  nmu_users: 3\n", "x.yaml");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("x.yaml:3:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("nmu_users"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_config("bogus: 1\n"), ConfigError);
}

TEST(Config, BadValuesAreRejected) {
  EXPECT_THROW(parse_config("network:\n  num_bs: two\n"), ConfigError);
  EXPECT_THROW(parse_config("network:\n  eta: [0.5, 0.5]\n"), ConfigError);  // 8 stations
  EXPECT_THROW(parse_config("algorithm:\n  stage2_search: golden\n"), ConfigError);
  EXPECT_ANY_THROW(parse_config("experiment:\n  methods: [logsum, oracle]\n"));  // N*K too large
  EXPECT_ANY_THROW(parse_config("experiment:\n  trials: 0\n"));
}

TEST(Config, ScalarsBroadcastAndListsAreKept) {
  const ExperimentConfig c = parse_config(
      "network:\n  num_bs: 2\n  num_users: 2\n  p_max_w: [1.0, 2.0]\n  p_compute_w: [[0.1, 0.2], [0.3, 0.4]]\n"
      "  eta: 0.5\n");
  EXPECT_EQ(c.network.p_max[1], 2.0);
  EXPECT_EQ(c.network.p_compute(1, 0), 0.3);
  EXPECT_EQ(c.network.eta[1], 0.5);
}

TEST(Config, YamlRoundTrip) {
  ExperimentConfig c = parse_config(kSmall);
  c.network.p_compute(1, 2) = 0.123456789012345678;
  c.algorithm.stage2_search = Stage2Search::bisection;
  c.resample_topology = false;
  EXPECT_EQ(parse_config(to_yaml(c)), c);
}

TEST(Config, WorkerOverrideFromEnvironment) {
  ExperimentConfig c;
  c.workers = 3;
  ::unsetenv("GSBF_WORKERS");
  EXPECT_EQ(effective_workers(c), 3);
  ::setenv("GSBF_WORKERS", "2", 1);
  EXPECT_EQ(effective_workers(c), 2);
  ::setenv("GSBF_WORKERS", "zero", 1);
  EXPECT_EQ(effective_workers(c), 3);
  ::unsetenv("GSBF_WORKERS");
}

TEST(Trials, RecordCountAndOrder) {
  const TrialResults res = small_results();
  ASSERT_EQ(res.records.size(), 2u * 2u * 2u);
  ASSERT_EQ(res.traces.size(), 4u);
  const std::vector<double> sweep{2, 4};
  for (std::size_t i = 1; i < res.records.size(); ++i)
    EXPECT_TRUE(record_less(res.records[i - 1], res.records[i], sweep));
  EXPECT_EQ(res.records[0].seed, 5u);
  EXPECT_EQ(res.records[0].method, "logsum");
}

TEST(Trials, PairedCoordinatedBeamformingUsesLeastTransmitPower) {
  const TrialResults res = small_results();
  for (std::size_t i = 0; i + 1 < res.records.size(); i += 2) {
    const TrialRecord& ls = res.records[i];
    const TrialRecord& cb = res.records[i + 1];
    ASSERT_EQ(ls.seed, cb.seed);
    if (!ls.ok() || !cb.ok()) continue;
    EXPECT_LE(cb.transmit_w, ls.transmit_w + 1e-6);
    EXPECT_EQ(cb.task_count, 9);
    EXPECT_EQ(cb.iterations, 0);
  }
}

TEST(Trials, DeterministicAndIndependentOfWorkers) {
  const ExperimentConfig cfg = parse_config(kSmall);
  expect_same_except_time(run_trials(cfg, 1).records, small_results().records);
  expect_same_except_time(run_trials(cfg, 3).records, small_results().records);
}

TEST(Trials, FixedTopologyOnlyResamplesFading) {
  ExperimentConfig cfg = parse_config(kSmall);
  cfg.resample_topology = false;
  const NetworkConfig net = cfg.network_at(4.0);
  const ChannelRealization a = trial_channels(cfg, net, 6);
  const ChannelRealization b = generate_channels(6, generate_topology(cfg.base_seed, net), net);
  EXPECT_EQ((a.h(1, 2) - b.h(1, 2)).norm(), 0.0);
}

TEST(Trials, InfeasibleInstancesAreRecordedNotThrown) {
  ExperimentConfig cfg = parse_config(kSmall);
  cfg.sinr_sweep_db = {60.0};
  cfg.trials = 1;
  const TrialResults res = run_trials(cfg);
  ASSERT_EQ(res.records.size(), 2u);
  for (const TrialRecord& r : res.records) EXPECT_EQ(r.status, "infeasible");
}

TEST(Summary, SingleRecord) {
  TrialRecord r{1, 4.0, "cb", 3.0, 2.0, 1.0, 9, 0, "ok", 1.0};
  const std::vector<SummaryRow> rows = summarize({r});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].total_w.mean, 3.0);
  EXPECT_EQ(rows[0].total_w.stddev, 0.0);
  EXPECT_EQ(rows[0].ok, 1);
}

TEST(Summary, StatisticsAndFailedRecords) {
  std::vector<TrialRecord> recs{{0, 0.0, "logsum", 1.0, 0.5, 0.5, 2, 3, "ok", 0.0},
                                {1, 0.0, "logsum", 3.0, 1.5, 1.5, 4, 3, "ok", 0.0},
                                {2, 0.0, "logsum", 0.0, 0.0, 0.0, 0, 0, "infeasible", 0.0}};
  const SummaryRow* row = find_row(summarize(recs), 0.0, "logsum");
  ASSERT_NE(row, nullptr);
  EXPECT_EQ(row->trials, 3);
  EXPECT_EQ(row->ok, 2);
  EXPECT_DOUBLE_EQ(row->total_w.mean, 2.0);
  EXPECT_DOUBLE_EQ(row->total_w.stddev, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(row->task_count.mean, 3.0);
}

TEST(Summary, InvariantUnderRecordPermutation) {
  std::vector<TrialRecord> recs = small_results().records;
  const std::vector<SummaryRow> a = summarize(recs);
  std::mt19937 rng(1);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(recs.begin(), recs.end(), rng);
    const std::vector<SummaryRow> b = summarize(recs);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].method, b[i].method);
      EXPECT_EQ(a[i].total_w.mean, b[i].total_w.mean);
      EXPECT_EQ(a[i].total_w.stddev, b[i].total_w.stddev);
      EXPECT_EQ(a[i].task_count.mean, b[i].task_count.mean);
    }
  }
}

TEST(Summary, CoordinatedBeamformingServesEveryTask) {
  for (const SummaryRow& r : summarize(small_results().records))
    if (r.method == "cb" && r.ok > 0) {
      EXPECT_EQ(r.task_count.mean, 9.0);
      EXPECT_EQ(r.task_count.stddev, 0.0);
    }
}

TEST(Csv, DoublesSurviveAWriteReadCycle) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(std::strtod(fmt_double(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(fmt_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(fmt_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, RecordsRoundTrip) {
  const fs::path dir = scratch_dir("records");
  const std::vector<TrialRecord> recs = small_results().records;
  write_records_csv(dir / "records.csv", recs);
  const std::vector<TrialRecord> back = read_records_csv(dir / "records.csv");
  expect_same_except_time(recs, back);
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(recs[i].wall_ms, back[i].wall_ms);
  fs::remove_all(dir);
}

TEST(Csv, MalformedRecordsAreRejected) {
  const fs::path dir = scratch_dir("bad");
  std::ofstream(dir / "a.csv") << "seed,oops\n";
  EXPECT_THROW(read_records_csv(dir / "a.csv"), CsvError);
  std::ofstream(dir / "b.csv") << kRecordsHeader << "\n1,2,cb,x,1,1,1,1,ok,1\n";
  EXPECT_THROW(read_records_csv(dir / "b.csv"), CsvError);
  EXPECT_THROW(read_records_csv(dir / "missing.csv"), CsvError);
  fs::remove_all(dir);
}

TEST(Csv, ExportedTracesHaveOneRowPerIterate) {
  const fs::path dir = scratch_dir("export");
  const TrialResults res = small_results();
  export_results(res, dir);
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.txt"));
  for (const TrialTrace& t : res.traces) {
    const std::string text = slurp(dir / "traces" / trace_file_name(t.sinr_db, t.seed));
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), t.trace.iterations() + 2);  // header + rows
    EXPECT_EQ(text.rfind(kTraceHeader, 0), 0u);
  }
  fs::remove_all(dir);
}

TEST(Csv, TracesAndSummaryAreByteIdenticalAcrossRuns) {
  const fs::path a = scratch_dir("run_a");
  const fs::path b = scratch_dir("run_b");
  export_results(small_results(), a);
  export_results(run_trials(parse_config(kSmall), 2), b);
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
  for (const auto& e : fs::directory_iterator(a / "traces"))
    EXPECT_EQ(slurp(e.path()), slurp(b / "traces" / e.path().filename())) << e.path();
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Csv, CertificateRecomputableFromPersistedTrace) {
  const TrialResults res = small_results();
  const ExperimentConfig cfg = parse_config(kSmall);
  const TrialTrace& t = res.traces.front();
  // Re-read the persisted columns and rebuild the certificate from them alone.
  std::istringstream in(trace_csv(t.trace));
  std::string line;
  std::getline(in, line);
  ConvergenceTrace back;
  while (std::getline(in, line)) {
    std::vector<double> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(std::strtod(cell.c_str(), nullptr));
    TraceRow r;
    r.iteration = static_cast<int>(f[0]);
    r.omega = r.j = f[1];
    r.residual_bound = f[4];
    back.rows.push_back(r);
  }
  const CertificateParams c =
      CertificateParams::from(rho_weights(cfg.network), cfg.algorithm.p, cfg.algorithm.beta);
  const RateCertificate a = rate_certificate(t.trace, c);
  const RateCertificate b = rate_certificate(back, c);
  EXPECT_EQ(a.running_min_sq, b.running_min_sq);
  EXPECT_EQ(a.envelope, b.envelope);
  EXPECT_TRUE(b.holds);
}
