#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qmitm/harness.hpp"

using namespace qmitm;

namespace {
const std::filesystem::path kGolden = QMITM_GOLDEN_DIR;
const std::filesystem::path kScenarios = QMITM_DEFAULT_SCENARIO_DIR;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kMinimal = R"({
  "schema_version": 1,
  "name": "t",
  "protocol": "interlock",
  "adversary": {"kind": "mitm_copy", "processing_delay": 1},
  "interlock": {"n_packets": 2, "message_bytes": 16},
  "n_runs": 6,
  "base_seed": 40
})";

struct Cli {
  int status;
  std::string output;
};

Cli cli(const std::string& args) {
  const std::string cmd = std::string(QMITM_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, ""};
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int rc = pclose(p);
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, out};
}
}  // namespace

TEST(Scenario, ParsesMinimalJson) {
  const Scenario s = parse_scenario(kMinimal);
  EXPECT_EQ(s.name, "t");
  EXPECT_EQ(s.protocol, Protocol::interlock);
  EXPECT_EQ(s.adversary.kind, EveKind::mitm_copy);
  EXPECT_EQ(s.adversary.processing_delay, Tick{1});
  EXPECT_EQ(s.n_runs, 6u);
  EXPECT_EQ(s.interlock_config().slot_length, InterlockConfig::packet_transit(s.timing, 16));
}

TEST(Scenario, RejectsUnknownFields) {
  try {
    parse_scenario(R"({"schema_version":1,"name":"t","protocol":"bb84","n_run":3})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("n_run"), std::string::npos);
  }
  EXPECT_THROW(parse_scenario(R"({"schema_version":1,"name":"t","protocol":"bb84","bb84":{"qubits":3}})"),
               ConfigError);
  EXPECT_THROW(parse_scenario("{not json"), ConfigError);
  EXPECT_THROW(parse_scenario(R"({"schema_version":1,"name":"t","protocol":"teleport"})"), ConfigError);
}

TEST(Scenario, ErrorsNameTheInvariant) {
  auto message = [](const std::string& text) {
    try {
      parse_scenario(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(R"({"schema_version":1,"name":"s","protocol":"interlock","interlock":{"n_packets":1}})")
                .find("n_packets must be >= 2"),
            std::string::npos);
  EXPECT_NE(message(R"({"schema_version":1,"name":"s","protocol":"interlock","interlock":{"slot_length":3}})")
                .find("slot_length"),
            std::string::npos);
  EXPECT_NE(message(R"({"schema_version":2,"name":"s","protocol":"bb84"})").find("schema_version"),
            std::string::npos);
  EXPECT_NE(message(R"({"schema_version":1,"name":"s","protocol":"bb84","adversary":{"kind":"mitm_misinform"}})")
                .find("misinform_payload"),
            std::string::npos);
  EXPECT_NE(message(R"({"schema_version":1,"name":"s","protocol":"xor_dual_channel",
                        "adversary":{"kind":"passive_classical"}})")
                .find("xor.tapped"),
            std::string::npos);
  EXPECT_EQ(message(R"({"schema_version":1,"name":"s","protocol":"bb84"})"), "");
}

TEST(Scenario, MissingFileIsAnIoError) {
  EXPECT_THROW(load_scenario("/nonexistent/x.json"), IoError);
  EXPECT_THROW(list_scenario_files("/nonexistent"), IoError);
}

TEST(RunScenario, RowsInSeedOrderRegardlessOfJobs) {
  const Scenario s = parse_scenario(kMinimal);
  const auto serial = run_scenario(s, {std::nullopt, std::nullopt, 1});
  const auto parallel = run_scenario(s, {std::nullopt, std::nullopt, 4});
  ASSERT_EQ(serial.size(), 6u);
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(serial[i].seed, 40 + i);
  EXPECT_EQ(results_to_csv(serial), results_to_csv(parallel));
  const auto overridden = run_scenario(s, {100, 2, 1});
  ASSERT_EQ(overridden.size(), 2u);
  EXPECT_EQ(overridden[1].seed, 101u);
  EXPECT_EQ(overridden[0], run_once(s, 100).row);
}

TEST(RunScenario, ResultCsvRoundTrips) {
  const Scenario s = parse_scenario(kMinimal);
  auto rows = run_scenario(s, {std::nullopt, 3, 1});
  rows[0].claim = "with, a comma and \"quotes\"";
  const std::string text = results_to_csv(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), kResultCsvHeader);
  std::istringstream in(text);
  const auto back = read_results_csv(in);
  EXPECT_EQ(results_to_csv(back), text);
}

TEST(RunScenario, Summary) {
  ResultRow a, b;
  a.scenario = b.scenario = "x";
  a.claim = b.claim = "c";
  a.timing_verdict = VerdictKind::timing_violation;
  b.timing_verdict = VerdictKind::clean;
  a.qber = 0.25;
  b.qber = 0.75;
  a.max_slot_deviation = Tick{4};
  b.max_slot_deviation = Tick{9};
  const auto s = summarize({a, b});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].runs, 2u);
  EXPECT_DOUBLE_EQ(*s[0].timing_violation_rate, 0.5);
  EXPECT_DOUBLE_EQ(*s[0].mean_qber, 0.5);
  EXPECT_EQ(s[0].max_slot_deviation, Tick{9});
  EXPECT_FALSE(s[0].content_mismatch_rate);
  std::ostringstream os;
  write_summary_csv(os, s);
  EXPECT_NE(os.str().find("c,x,2,0.500000,NA,NA,0.500000"), std::string::npos);
}

TEST(Bundled, AllScenariosLoad) {
  const auto files = list_scenario_files(kScenarios);
  EXPECT_GE(files.size(), 8u);
  for (const auto& f : files) EXPECT_NO_THROW(load_scenario(f)) << f;
}

TEST(Bundled, InterceptResendMeanQber) {
  const Scenario s = load_scenario(kScenarios / "bb84_intercept_resend.json");
  const auto rows = run_scenario(s, {std::nullopt, 50, 0});
  double sum = 0;
  for (const auto& r : rows) sum += *r.qber;
  const double mean = sum / static_cast<double>(rows.size());
  EXPECT_GE(mean, 0.24);
  EXPECT_LE(mean, 0.26);
}

TEST(Bundled, InterlockCleanIsCleanOnEveryRow) {
  const Scenario s = load_scenario(kScenarios / "interlock_clean.json");
  for (const auto& r : run_scenario(s)) {
    EXPECT_EQ(r.timing_verdict, VerdictKind::clean);
    EXPECT_EQ(r.content_verdict, VerdictKind::clean);
    EXPECT_EQ(r.alice_delivered, true);
    EXPECT_EQ(r.bob_delivered, true);
  }
}

TEST(Golden, ResultsAndTranscriptsAreByteIdentical) {
  for (const char* name : {"golden_interlock", "golden_bb84"}) {
    const Scenario s = load_scenario(kGolden / (std::string(name) + ".json"));
    EXPECT_EQ(results_to_csv(run_scenario(s, {std::nullopt, std::nullopt, 2})),
              slurp(kGolden / (std::string(name) + ".results.csv")))
        << name;
    EXPECT_EQ(run_once(s, s.base_seed).transcript.to_csv(),
              slurp(kGolden / (std::string(name) + ".transcript.csv")))
        << name;
  }
}

TEST(Cli, UnknownFlagIsAUsageError) {
  const Cli r = cli("run --bogus");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("Usage"), std::string::npos) << r.output;
}

TEST(Cli, MissingFileIsAnIoError) {
  const Cli r = cli("run /nonexistent/scenario.json");
  EXPECT_EQ(r.status, 2) << r.output;
}

TEST(Cli, BadConfigExitsOne) {
  const auto bad = std::filesystem::temp_directory_path() / "qmitm_bad_scenario.json";
  std::ofstream(bad) << R"({"schema_version":1,"name":"s","protocol":"interlock","interlock":{"n_packets":1}})";
  const Cli r = cli("run " + bad.string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("n_packets must be >= 2"), std::string::npos) << r.output;
  std::filesystem::remove(bad);
}

TEST(Cli, RunCopyScenarioFlagsEveryRow) {
  const Cli r = cli("run " + (kScenarios / "mitm_copy_interlock.json").string() + " --runs 20");
  ASSERT_EQ(r.status, 0) << r.output;
  std::istringstream in(r.output);
  const auto rows = read_results_csv(in);
  ASSERT_EQ(rows.size(), 20u);
  for (const auto& row : rows) EXPECT_EQ(row.timing_verdict, VerdictKind::timing_violation);
}

TEST(Cli, ListScenarios) {
  const Cli r = cli("list-scenarios --dir " + kScenarios.string());
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_GE(std::count(r.output.begin(), r.output.end(), '\n'), 9);
  EXPECT_NE(r.output.find("mitm_copy_interlock.json"), std::string::npos);
}

TEST(Cli, TranscriptMatchesLibrary) {
  const auto file = kGolden / "golden_interlock.json";
  const Cli r = cli("transcript " + file.string() + " --seed 12");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(r.output, run_once(load_scenario(file), 12).transcript.to_csv());
}
