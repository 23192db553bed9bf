#pragma once

// Scenario files, batch runs and result tables.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "qmitm/adversary.hpp"
#include "qmitm/bb84.hpp"
#include "qmitm/channels.hpp"
#include "qmitm/detection.hpp"
#include "qmitm/interlock.hpp"
#include "qmitm/kernel.hpp"
#include "qmitm/session.hpp"
#include "qmitm/xor_channel.hpp"

namespace qmitm {

inline constexpr int kScenarioSchemaVersion = 1;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Protocol : std::uint8_t { bb84, xor_dual_channel, interlock, interlock_over_bb84_key };

constexpr std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::bb84: return "bb84";
    case Protocol::xor_dual_channel: return "xor_dual_channel";
    case Protocol::interlock: return "interlock";
    case Protocol::interlock_over_bb84_key: return "interlock_over_bb84_key";
  }
  return "?";
}

struct Bb84Params {
  std::size_t n_qubits = 10000;
  double sample_fraction = 0.1;
  double qber_threshold = 0.11;
};

struct XorParams {
  std::size_t message_bits = 1024;
  std::set<XorLane> tapped;
};

struct InterlockParams {
  std::uint32_t n_packets = 2;
  std::optional<Tick> slot_length;  // derived from message size when absent
  std::optional<Tick> tolerance_epsilon;
  bool authentication = false;
  std::uint32_t timeout_slots = 0;
  std::size_t message_bytes = 64;
};

struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  std::string name;
  std::string claim;
  Protocol protocol = Protocol::bb84;
  EveStrategy adversary;
  ChannelTiming timing;
  ClockModel clocks;
  Bb84Params bb84;
  XorParams xor_channel;
  InterlockParams interlock;
  std::uint32_t n_runs = 1;
  std::uint64_t base_seed = 1;

  bool uses_interlock() const {
    return protocol == Protocol::interlock || protocol == Protocol::interlock_over_bb84_key;
  }
  bool uses_bb84() const { return protocol == Protocol::bb84 || protocol == Protocol::interlock_over_bb84_key; }

  // Longest plaintext that crosses a slot, tokens included.
  std::size_t longest_interlock_message() const {
    std::size_t m = interlock.message_bytes + (interlock.authentication ? kAuthTokenBytes : 0);
    if (adversary.misinform_payload) m = std::max(m, adversary.misinform_payload->size());
    return m;
  }

  InterlockConfig interlock_config() const {
    InterlockConfig c;
    c.n_packets = interlock.n_packets;
    c.slot_length = interlock.slot_length.value_or(
        std::max(Tick{1}, InterlockConfig::packet_transit(timing, longest_interlock_message())));
    c.tolerance_epsilon = interlock.tolerance_epsilon;
    c.clock_sync = clocks;
    c.authentication_enabled = interlock.authentication;
    c.timeout_slots = interlock.timeout_slots;
    return c;
  }

  /// Throws ConfigError naming the first failing invariant.
  void validate() const {
    auto fail = [this](const std::string& what) {
      throw ConfigError("scenario '" + name + "': " + what);
    };
    auto guard = [&](auto&& check) {
      try {
        check();
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
    };
    if (schema_version != kScenarioSchemaVersion)
      fail("schema_version must be " + std::to_string(kScenarioSchemaVersion));
    if (name.empty()) fail("name must be non-empty");
    if (n_runs < 1) fail("n_runs must be >= 1");
    guard([&] { adversary.validate(); });
    guard([&] { timing.validate(); });
    guard([&] { clocks.validate(); });
    if (uses_bb84()) {
      if (bb84.n_qubits < 1) fail("bb84.n_qubits must be >= 1");
      if (!(bb84.sample_fraction > 0.0 && bb84.sample_fraction < 1.0))
        fail("bb84.sample_fraction must lie in (0, 1)");
      if (!(bb84.qber_threshold >= 0.0 && bb84.qber_threshold <= 1.0))
        fail("bb84.qber_threshold must lie in [0, 1]");
    }
    switch (protocol) {
      case Protocol::bb84:
        if (adversary.kind == EveKind::mitm_misinform) fail("mitm_misinform has no meaning for bb84");
        break;
      case Protocol::xor_dual_channel:
        if (xor_channel.message_bits < 1) fail("xor.message_bits must be >= 1");
        if (adversary.kind != EveKind::absent && adversary.kind != EveKind::passive_classical)
          fail("xor_dual_channel supports only absent or passive_classical adversaries");
        if ((adversary.kind == EveKind::absent) != xor_channel.tapped.empty())
          fail("xor.tapped must be empty exactly when the adversary is absent");
        break;
      case Protocol::interlock:
      case Protocol::interlock_over_bb84_key:
        if (interlock.message_bytes < 1) fail("interlock.message_bytes must be >= 1");
        if (interlock.slot_length && *interlock.slot_length < Tick{1})
          fail("interlock.slot_length must be >= 1");
        guard([&] { interlock_config().validate(timing, longest_interlock_message()); });
        break;
    }
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::string_view where,
                                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError("unknown field '" + key + "' in " + std::string(where));
  }
}

template <class T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

inline Tick tick_field(const nlohmann::json& j, const char* key, Tick fallback) {
  return Tick{field<std::int64_t>(j, key, fallback.value)};
}

inline Party party_from_string(const std::string& s) {
  if (s == "alice") return Party::alice;
  if (s == "bob") return Party::bob;
  if (s == "eve") return Party::eve;
  throw ConfigError("unknown party '" + s + "'");
}

inline ClockModel clocks_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, "clocks", {"mode", "jitter_bound", "offsets"});
  const auto mode = field<std::string>(j, "mode", "perfect");
  ClockModel m;
  if (mode == "perfect") {
    m.mode = ClockMode::perfect;
  } else if (mode == "gps_jitter") {
    m.mode = ClockMode::gps_jitter;
  } else if (mode == "unsynchronized") {
    m.mode = ClockMode::unsynchronized;
  } else {
    throw ConfigError("unknown clock mode '" + mode + "'");
  }
  m.jitter_bound = tick_field(j, "jitter_bound", Tick{0});
  if (j.contains("offsets")) {
    if (!j["offsets"].is_object()) throw ConfigError("clocks.offsets must be an object");
    for (const auto& [who, v] : j["offsets"].items()) {
      if (!v.is_number_integer()) throw ConfigError("clocks.offsets." + who + " must be an integer");
      m.offsets[party_from_string(who)] = Tick{v.get<std::int64_t>()};
    }
  }
  return m;
}

}  // namespace detail

inline Protocol protocol_from_string(const std::string& s) {
  for (Protocol p : {Protocol::bb84, Protocol::xor_dual_channel, Protocol::interlock,
                     Protocol::interlock_over_bb84_key})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown protocol '" + s + "'");
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::field;
  using detail::tick_field;
  detail::reject_unknown_keys(j, "scenario",
                              {"schema_version", "name", "claim", "protocol", "adversary", "timing",
                               "clocks", "bb84", "xor", "interlock", "n_runs", "base_seed"});
  Scenario s;
  if (!j.contains("schema_version")) throw ConfigError("scenario: missing schema_version");
  if (!j.contains("protocol")) throw ConfigError("scenario: missing protocol");
  s.schema_version = field<int>(j, "schema_version", 0);
  s.name = field<std::string>(j, "name", "");
  s.claim = field<std::string>(j, "claim", "");
  s.protocol = protocol_from_string(field<std::string>(j, "protocol", ""));
  s.n_runs = field<std::uint32_t>(j, "n_runs", 1);
  s.base_seed = field<std::uint64_t>(j, "base_seed", 1);

  if (j.contains("adversary")) {
    const auto& a = j["adversary"];
    detail::reject_unknown_keys(a, "adversary", {"kind", "processing_delay", "misinform_payload"});
    try {
      s.adversary.kind = eve_kind_from_string(field<std::string>(a, "kind", "absent"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    s.adversary.processing_delay = tick_field(a, "processing_delay", Tick{0});
    if (a.contains("misinform_payload")) {
      const auto text = field<std::string>(a, "misinform_payload", "");
      s.adversary.misinform_payload = Bytes(text.begin(), text.end());
    }
  }
  if (j.contains("timing")) {
    const auto& t = j["timing"];
    detail::reject_unknown_keys(t, "timing", {"tau_q", "tau_c", "propagation"});
    s.timing.tau_q = tick_field(t, "tau_q", s.timing.tau_q);
    s.timing.tau_c = tick_field(t, "tau_c", s.timing.tau_c);
    s.timing.propagation = tick_field(t, "propagation", s.timing.propagation);
  }
  if (j.contains("clocks")) s.clocks = detail::clocks_from_json(j["clocks"]);
  if (j.contains("bb84")) {
    const auto& b = j["bb84"];
    detail::reject_unknown_keys(b, "bb84", {"n_qubits", "sample_fraction", "qber_threshold"});
    s.bb84.n_qubits = field<std::size_t>(b, "n_qubits", s.bb84.n_qubits);
    s.bb84.sample_fraction = field<double>(b, "sample_fraction", s.bb84.sample_fraction);
    s.bb84.qber_threshold = field<double>(b, "qber_threshold", s.bb84.qber_threshold);
  }
  if (j.contains("xor")) {
    const auto& x = j["xor"];
    detail::reject_unknown_keys(x, "xor", {"message_bits", "tapped"});
    s.xor_channel.message_bits = field<std::size_t>(x, "message_bits", s.xor_channel.message_bits);
    for (const auto& lane : field<std::vector<std::string>>(x, "tapped", {})) {
      if (lane == "x") s.xor_channel.tapped.insert(XorLane::x);
      else if (lane == "z") s.xor_channel.tapped.insert(XorLane::z);
      else throw ConfigError("xor.tapped entries must be \"x\" or \"z\", got '" + lane + "'");
    }
  }
  if (j.contains("interlock")) {
    const auto& i = j["interlock"];
    detail::reject_unknown_keys(i, "interlock",
                                {"n_packets", "slot_length", "tolerance_epsilon", "authentication",
                                 "timeout_slots", "message_bytes"});
    s.interlock.n_packets = field<std::uint32_t>(i, "n_packets", s.interlock.n_packets);
    if (i.contains("slot_length")) s.interlock.slot_length = tick_field(i, "slot_length", Tick{0});
    if (i.contains("tolerance_epsilon"))
      s.interlock.tolerance_epsilon = tick_field(i, "tolerance_epsilon", Tick{0});
    s.interlock.authentication = field<bool>(i, "authentication", false);
    s.interlock.timeout_slots = field<std::uint32_t>(i, "timeout_slots", 0);
    s.interlock.message_bytes = field<std::size_t>(i, "message_bytes", s.interlock.message_bytes);
  }
  s.validate();
  return s;
}

inline Scenario parse_scenario(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- results

struct ResultRow {
  std::string scenario;
  std::string claim;
  std::string protocol;
  std::string adversary;
  std::uint64_t seed = 0;
  std::optional<VerdictKind> timing_verdict;
  std::optional<VerdictKind> qber_verdict;
  std::optional<VerdictKind> content_verdict;
  std::optional<double> qber;
  std::optional<double> sift_rate;
  std::optional<Tick> max_slot_deviation;
  std::optional<bool> alice_delivered;
  std::optional<bool> bob_delivered;
  std::optional<double> eve_recovery_accuracy;
  std::optional<bool> eve_holds_key;
  std::optional<bool> copy_lag_ok;

  bool operator==(const ResultRow&) const = default;
};

inline constexpr const char* kResultCsvHeader =
    "scenario,claim,protocol,adversary,seed,timing_verdict,qber_verdict,content_verdict,qber,"
    "sift_rate,max_slot_deviation,alice_delivered,bob_delivered,eve_recovery_accuracy,"
    "eve_holds_key,copy_lag_ok";

namespace csv {

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Splits one CSV record; quoted fields may hold commas and doubled quotes.
inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  if (quoted) throw ConfigError("unterminated quote in CSV line");
  return out;
}

}  // namespace csv

inline std::string to_csv_line(const ResultRow& r) {
  auto verdict = [](const std::optional<VerdictKind>& v) {
    return v ? std::string(to_string(*v)) : std::string("NA");
  };
  auto num = [](const std::optional<double>& v) { return v ? csv::fixed(*v) : std::string("NA"); };
  auto flag = [](const std::optional<bool>& v) { return v ? std::string(*v ? "1" : "0") : std::string("NA"); };
  std::string s;
  s += csv::quote(r.scenario) + ',' + csv::quote(r.claim) + ',' + r.protocol + ',' + r.adversary + ',';
  s += std::to_string(r.seed) + ',';
  s += verdict(r.timing_verdict) + ',' + verdict(r.qber_verdict) + ',' + verdict(r.content_verdict) + ',';
  s += num(r.qber) + ',' + num(r.sift_rate) + ',';
  s += (r.max_slot_deviation ? std::to_string(r.max_slot_deviation->value) : std::string("NA")) + ',';
  s += flag(r.alice_delivered) + ',' + flag(r.bob_delivered) + ',';
  s += num(r.eve_recovery_accuracy) + ',' + flag(r.eve_holds_key) + ',' + flag(r.copy_lag_ok);
  return s;
}

inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultCsvHeader << '\n';
  for (const auto& r : rows) os << to_csv_line(r) << '\n';
}

inline std::string results_to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  write_results_csv(os, rows);
  return os.str();
}

inline std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultCsvHeader)
    throw ConfigError("result CSV: missing or unexpected header row");
  auto verdict = [](const std::string& s) -> std::optional<VerdictKind> {
    if (s == "NA") return std::nullopt;
    for (VerdictKind k : {VerdictKind::clean, VerdictKind::timing_violation, VerdictKind::qber_alarm,
                          VerdictKind::content_mismatch})
      if (to_string(k) == s) return k;
    throw ConfigError("result CSV: unknown verdict '" + s + "'");
  };
  auto num = [](const std::string& s) -> std::optional<double> {
    if (s == "NA") return std::nullopt;
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw ConfigError("result CSV: bad number '" + s + "'");
    }
  };
  auto flag = [](const std::string& s) -> std::optional<bool> {
    if (s == "NA") return std::nullopt;
    if (s == "1" || s == "0") return s == "1";
    throw ConfigError("result CSV: bad flag '" + s + "'");
  };
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 16)
      throw ConfigError("result CSV line " + std::to_string(line_no) + ": expected 16 fields, got " +
                        std::to_string(f.size()));
    ResultRow r;
    r.scenario = f[0];
    r.claim = f[1];
    r.protocol = f[2];
    r.adversary = f[3];
    try {
      r.seed = std::stoull(f[4]);
    } catch (const std::exception&) {
      throw ConfigError("result CSV line " + std::to_string(line_no) + ": bad seed");
    }
    r.timing_verdict = verdict(f[5]);
    r.qber_verdict = verdict(f[6]);
    r.content_verdict = verdict(f[7]);
    r.qber = num(f[8]);
    r.sift_rate = num(f[9]);
    if (f[10] != "NA") r.max_slot_deviation = Tick{static_cast<std::int64_t>(*num(f[10]))};
    r.alice_delivered = flag(f[11]);
    r.bob_delivered = flag(f[12]);
    r.eve_recovery_accuracy = num(f[13]);
    r.eve_holds_key = flag(f[14]);
    r.copy_lag_ok = flag(f[15]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------- runs

struct RunArtifacts {
  ResultRow row;
  Transcript transcript;  // interlock stage only for interlock_over_bb84_key
  std::optional<Bb84Outcome> bb84;
  std::optional<XorOutcome> xor_channel;
  std::optional<InterlockOutcome> interlock;
};

namespace detail {

inline void fill_bb84(ResultRow& row, const Bb84Outcome& o, double threshold) {
  row.qber = o.qber;
  row.sift_rate = o.sift_rate;
  row.qber_verdict = detect_qber(o, threshold).kind;
  row.eve_holds_key = o.eve_key && !o.sifted_alice.empty() && *o.eve_key == o.sifted_alice &&
                      *o.eve_key == o.sifted_bob;
}

inline void fill_interlock(ResultRow& row, const InterlockOutcome& o) {
  const Verdict t = detect_timing(o.transcript, o.config);
  row.timing_verdict = t.kind;
  row.max_slot_deviation = t.measured_tick;
  if (o.config.authentication_enabled) row.content_verdict = detect_content(o).kind;
  row.alice_delivered = o.alice_received && *o.alice_received == o.bob_sent;
  row.bob_delivered = o.bob_received && *o.bob_received == o.alice_sent;
  row.copy_lag_ok = copy_lag_respected(o);
}

}  // namespace detail

/// One run of `s` under `seed`. Deterministic in (s, seed).
inline RunArtifacts run_once(const Scenario& s, std::uint64_t seed) {
  RunArtifacts a;
  ResultRow& row = a.row;
  row.scenario = s.name;
  row.claim = s.claim;
  row.protocol = std::string(to_string(s.protocol));
  row.adversary = std::string(to_string(s.adversary.kind));
  row.seed = seed;

  const Bb84Options bopts{s.bb84.sample_fraction, s.clocks};
  const Rng base{seed};
  auto messages = [&] {
    Rng m = base.split(streams::messages);
    Rng ma = m.split(1), mb = m.split(2);
    return std::pair{ma.bytes(s.interlock.message_bytes), mb.bytes(s.interlock.message_bytes)};
  };

  switch (s.protocol) {
    case Protocol::bb84: {
      a.bb84 = run_bb84(s.bb84.n_qubits, s.adversary, seed, s.timing, bopts);
      detail::fill_bb84(row, *a.bb84, s.bb84.qber_threshold);
      a.transcript = a.bb84->transcript;
      break;
    }
    case Protocol::xor_dual_channel: {
      a.xor_channel = run_xor_dual_channel(s.xor_channel.message_bits, s.xor_channel.tapped, seed, s.timing);
      row.eve_recovery_accuracy = a.xor_channel->eve_accuracy;
      row.bob_delivered = a.xor_channel->bob_recovered == a.xor_channel->message;
      row.eve_holds_key = s.xor_channel.tapped.size() == 2;
      a.transcript = a.xor_channel->transcript;
      break;
    }
    case Protocol::interlock: {
      const auto [ma, mb] = messages();
      a.interlock = run_interlock(ma, mb, s.interlock_config(), s.adversary, s.timing, seed);
      detail::fill_interlock(row, *a.interlock);
      a.transcript = a.interlock->transcript;
      break;
    }
    case Protocol::interlock_over_bb84_key: {
      a.bb84 = run_bb84(s.bb84.n_qubits, s.adversary, seed, s.timing, bopts);
      detail::fill_bb84(row, *a.bb84, s.bb84.qber_threshold);
      SessionKeys keys;
      try {
        keys = SessionKeys::from_bb84(*a.bb84);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("scenario '" + s.name + "': " + e.what());
      }
      const auto [ma, mb] = messages();
      a.interlock = run_interlock(ma, mb, s.interlock_config(), s.adversary, s.timing,
                                  Rng{seed}.split(7).seed(), keys);
      detail::fill_interlock(row, *a.interlock);
      a.transcript = a.interlock->transcript;
      break;
    }
  }
  return a;
}

struct RunOptions {
  std::optional<std::uint64_t> base_seed;  // overrides the scenario's
  std::optional<std::uint32_t> n_runs;
  unsigned jobs = 0;  // 0: one per hardware thread
};

/// Rows for seeds base..base+n-1, in seed order whatever the completion order.
inline std::vector<ResultRow> run_scenario(const Scenario& s, const RunOptions& opts = {}) {
  s.validate();
  const std::uint64_t base = opts.base_seed.value_or(s.base_seed);
  const std::uint32_t n = opts.n_runs.value_or(s.n_runs);
  if (n < 1) throw ConfigError("scenario '" + s.name + "': n_runs must be >= 1");

  std::vector<ResultRow> rows(n);
  unsigned jobs = opts.jobs ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, n);
  std::atomic<std::uint32_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto worker = [&](unsigned w) {
    try {
      for (std::uint32_t i = next++; i < n; i = next++) rows[i] = run_once(s, base + i).row;
    } catch (...) {
      errors[w] = std::current_exception();
      next = n;
    }
  };
  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

// ---------------------------------------------------------------- report

struct SummaryRow {
  std::string claim;
  std::string scenario;
  std::size_t runs = 0;
  std::optional<double> timing_violation_rate;
  std::optional<double> qber_alarm_rate;
  std::optional<double> content_mismatch_rate;
  std::optional<double> mean_qber;
  std::optional<double> mean_sift_rate;
  std::optional<Tick> max_slot_deviation;
  std::optional<double> alice_delivered_rate;
  std::optional<double> bob_delivered_rate;
  std::optional<double> mean_eve_recovery_accuracy;
  std::optional<double> eve_holds_key_rate;
};

inline constexpr const char* kSummaryCsvHeader =
    "claim,scenario,runs,timing_violation_rate,qber_alarm_rate,content_mismatch_rate,mean_qber,"
    "mean_sift_rate,max_slot_deviation,alice_delivered_rate,bob_delivered_rate,"
    "mean_eve_recovery_accuracy,eve_holds_key_rate";

namespace detail {

struct Mean {
  double sum = 0;
  std::size_t n = 0;
  void add(double v) { sum += v, ++n; }
  std::optional<double> get() const { return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt; }
};

}  // namespace detail

/// Groups rows by (claim, scenario) in first-seen order.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  struct Acc {
    SummaryRow s;
    detail::Mean timing, qber_alarm, content, qber, sift, alice, bob, eve_acc, eve_key;
  };
  std::vector<Acc> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& r : rows) {
    const auto key = std::pair{r.claim, r.scenario};
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) {
      groups.emplace_back();
      groups.back().s.claim = r.claim;
      groups.back().s.scenario = r.scenario;
    }
    Acc& g = groups[it->second];
    ++g.s.runs;
    if (r.timing_verdict) g.timing.add(*r.timing_verdict == VerdictKind::timing_violation);
    if (r.qber_verdict) g.qber_alarm.add(*r.qber_verdict == VerdictKind::qber_alarm);
    if (r.content_verdict) g.content.add(*r.content_verdict == VerdictKind::content_mismatch);
    if (r.qber) g.qber.add(*r.qber);
    if (r.sift_rate) g.sift.add(*r.sift_rate);
    if (r.max_slot_deviation)
      g.s.max_slot_deviation = max(g.s.max_slot_deviation.value_or(Tick{0}), *r.max_slot_deviation);
    if (r.alice_delivered) g.alice.add(*r.alice_delivered);
    if (r.bob_delivered) g.bob.add(*r.bob_delivered);
    if (r.eve_recovery_accuracy) g.eve_acc.add(*r.eve_recovery_accuracy);
    if (r.eve_holds_key) g.eve_key.add(*r.eve_holds_key);
  }
  std::vector<SummaryRow> out;
  for (auto& g : groups) {
    g.s.timing_violation_rate = g.timing.get();
    g.s.qber_alarm_rate = g.qber_alarm.get();
    g.s.content_mismatch_rate = g.content.get();
    g.s.mean_qber = g.qber.get();
    g.s.mean_sift_rate = g.sift.get();
    g.s.alice_delivered_rate = g.alice.get();
    g.s.bob_delivered_rate = g.bob.get();
    g.s.mean_eve_recovery_accuracy = g.eve_acc.get();
    g.s.eve_holds_key_rate = g.eve_key.get();
    out.push_back(std::move(g.s));
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  auto num = [](const std::optional<double>& v) { return v ? csv::fixed(*v) : std::string("NA"); };
  os << kSummaryCsvHeader << '\n';
  for (const auto& r : rows) {
    os << csv::quote(r.claim) << ',' << csv::quote(r.scenario) << ',' << r.runs << ','
       << num(r.timing_violation_rate) << ',' << num(r.qber_alarm_rate) << ','
       << num(r.content_mismatch_rate) << ',' << num(r.mean_qber) << ',' << num(r.mean_sift_rate) << ','
       << (r.max_slot_deviation ? std::to_string(r.max_slot_deviation->value) : std::string("NA")) << ','
       << num(r.alice_delivered_rate) << ',' << num(r.bob_delivered_rate) << ','
       << num(r.mean_eve_recovery_accuracy) << ',' << num(r.eve_holds_key_rate) << '\n';
  }
}

// ---------------------------------------------------------------- bundled

inline std::filesystem::path default_scenario_dir() {
  if (const char* env = std::getenv("QMITM_SCENARIO_DIR"); env && *env) return env;
#ifdef QMITM_DEFAULT_SCENARIO_DIR
  return QMITM_DEFAULT_SCENARIO_DIR;
#else
  return "scenarios";
#endif
}

/// Scenario files in `dir`, sorted by file name.
inline std::vector<std::filesystem::path> list_scenario_files(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("scenario directory not found: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace qmitm
