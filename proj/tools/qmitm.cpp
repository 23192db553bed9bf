// qmitm command-line front end.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qmitm/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 1;
constexpr int kIo = 2;

// Writes through `body` either to stdout or to `path`.
template <class F>
void emit(const std::string& path, F&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    std::cout.flush();
    if (!std::cout) throw qmitm::IoError("failed writing to standard output");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qmitm::IoError("cannot open output file " + path);
  body(out);
  out.flush();
  if (!out) throw qmitm::IoError("failed writing " + path);
}

struct RunArgs {
  std::vector<std::string> files;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> runs;
  unsigned jobs = 0;
  std::string out;
  std::string format = "csv";
};

int cmd_run(const RunArgs& a) {
  std::vector<qmitm::ResultRow> rows;
  for (const auto& f : a.files) {
    const qmitm::Scenario s = qmitm::load_scenario(f);
    auto r = qmitm::run_scenario(s, {a.seed, a.runs, a.jobs});
    rows.insert(rows.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  emit(a.out, [&](std::ostream& os) { qmitm::write_results_csv(os, rows); });
  return kOk;
}

int cmd_list(const std::string& dir_arg) {
  const std::filesystem::path dir = dir_arg.empty() ? qmitm::default_scenario_dir() : std::filesystem::path(dir_arg);
  std::cout << "file,name,protocol,adversary,n_runs,claim\n";
  for (const auto& p : qmitm::list_scenario_files(dir)) {
    const qmitm::Scenario s = qmitm::load_scenario(p);
    std::cout << qmitm::csv::quote(p.filename().string()) << ',' << qmitm::csv::quote(s.name) << ','
              << qmitm::to_string(s.protocol) << ',' << qmitm::to_string(s.adversary.kind) << ','
              << s.n_runs << ',' << qmitm::csv::quote(s.claim) << '\n';
  }
  return kOk;
}

int cmd_transcript(const std::string& file, std::optional<std::uint64_t> seed, const std::string& out) {
  const qmitm::Scenario s = qmitm::load_scenario(file);
  const auto run = qmitm::run_once(s, seed.value_or(s.base_seed));
  emit(out, [&](std::ostream& os) { run.transcript.write_csv(os); });
  return kOk;
}

int cmd_report(const std::vector<std::string>& files, const std::string& out) {
  std::vector<qmitm::ResultRow> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw qmitm::IoError("cannot open result file " + f);
    try {
      auto r = qmitm::read_results_csv(in);
      rows.insert(rows.end(), r.begin(), r.end());
    } catch (const qmitm::ConfigError& e) {
      throw qmitm::ConfigError(f + ": " + e.what());
    }
  }
  emit(out, [&](std::ostream& os) { qmitm::write_summary_csv(os, qmitm::summarize(rows)); });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qmitm: discrete-event simulator for QKD man-in-the-middle attacks and interlock timing detection"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run scenario files and write one CSV row per seed");
  run->add_option("scenario", run_args.files, "scenario JSON file(s)")->required();
  run->add_option("--seed", run_args.seed, "first seed (overrides base_seed)");
  run->add_option("--runs", run_args.runs, "number of seeds (overrides n_runs)")->check(CLI::PositiveNumber);
  run->add_option("--jobs", run_args.jobs, "worker threads, 0 for one per core");
  run->add_option("--out", run_args.out, "output path, default standard output");
  run->add_option("--format", run_args.format, "output format")->check(CLI::IsMember({"csv"}));

  std::string list_dir;
  auto* list = app.add_subcommand("list-scenarios", "list bundled scenarios");
  list->add_option("--dir", list_dir, "scenario directory (default: $QMITM_SCENARIO_DIR or the bundled set)");

  std::string tr_file, tr_out;
  std::optional<std::uint64_t> tr_seed;
  std::string tr_format = "csv";
  auto* tr = app.add_subcommand("transcript", "dump the transcript of one run as CSV");
  tr->add_option("scenario", tr_file, "scenario JSON file")->required();
  tr->add_option("--seed", tr_seed, "run seed (default: base_seed)");
  tr->add_option("--out", tr_out, "output path, default standard output");
  tr->add_option("--format", tr_format, "output format")->check(CLI::IsMember({"csv"}));

  std::vector<std::string> rep_files;
  std::string rep_out;
  std::string rep_format = "csv";
  auto* rep = app.add_subcommand("report", "summarize result CSVs per claim and scenario");
  rep->add_option("results", rep_files, "result CSV file(s)")->required();
  rep->add_option("--out", rep_out, "output path, default standard output");
  rep->add_option("--format", rep_format, "output format")->check(CLI::IsMember({"csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kConfig;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*list) return cmd_list(list_dir);
    if (*tr) return cmd_transcript(tr_file, tr_seed, tr_out);
    if (*rep) return cmd_report(rep_files, rep_out);
  } catch (const qmitm::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kConfig;
}
