#pragma once

// Post-hoc detectors over finished runs. Each returns a Verdict; a verdict
// is clean exactly when it carries no evidence.

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmitm/bb84.hpp"
#include "qmitm/interlock.hpp"
#include "qmitm/kernel.hpp"
#include "qmitm/session.hpp"

namespace qmitm {

enum class VerdictKind : std::uint8_t { clean, timing_violation, qber_alarm, content_mismatch };

constexpr std::string_view to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::clean: return "clean";
    case VerdictKind::timing_violation: return "timing_violation";
    case VerdictKind::qber_alarm: return "qber_alarm";
    case VerdictKind::content_mismatch: return "content_mismatch";
  }
  return "?";
}

struct Verdict {
  VerdictKind kind = VerdictKind::clean;
  std::vector<std::size_t> evidence;
  std::optional<double> measured_fraction;
  std::optional<Tick> measured_tick;

  bool clean() const { return kind == VerdictKind::clean; }
};

class MalformedTranscript : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DetectorPrecondition : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::optional<std::size_t> last_record_of(const Transcript& t, Party p,
                                                 std::optional<RecordKind> kind = std::nullopt) {
  for (std::size_t i = t.size(); i-- > 0;)
    if (t[i].actor == p && (!kind || t[i].kind == *kind)) return i;
  return std::nullopt;
}

inline Tick outside_by(Tick t, Tick lo, Tick hi) {
  if (t < lo) return lo - t;
  if (t > hi) return t - hi;
  return Tick{0};
}

}  // namespace detail

/// Checks every slot a legitimate party expects to receive in: the delivery's
/// local time must lie in [slot_start - eps, slot_end + eps]. A slot that was
/// never filled is also a violation. measured_tick is the largest distance of
/// any delivery from its nominal slot (eps not applied).
inline Verdict detect_timing(const Transcript& transcript, const InterlockConfig& cfg) {
  if (transcript.count(RecordKind::phase) == 0)
    throw MalformedTranscript("detect_timing: transcript has no phase marks");
  const SlotSchedule schedule{cfg.n_packets, cfg.slot_length};
  const Tick eps = cfg.epsilon();

  Verdict v;
  Tick worst{0};
  for (Party p : {Party::alice, Party::bob}) {
    std::vector<bool> filled(static_cast<std::size_t>(schedule.last_slot()) + 1, false);
    for (std::size_t i = 0; i < transcript.size(); ++i) {
      const auto& r = transcript[i];
      if (r.kind != RecordKind::deliver || r.actor != p || r.channel != ChannelKind::classical || !r.slot)
        continue;
      const int slot = *r.slot;
      if (slot < 1 || slot > schedule.last_slot() || SlotSchedule::receiver_of(slot) != p) {
        v.evidence.push_back(i);
        continue;
      }
      filled[static_cast<std::size_t>(slot)] = true;
      const Tick lo = schedule.start(slot);
      const Tick hi = schedule.end(slot);
      worst = max(worst, detail::outside_by(r.local_tick, lo, hi));
      if (detail::outside_by(r.local_tick, lo - eps, hi + eps) > Tick{0}) v.evidence.push_back(i);
    }
    for (int slot : schedule.inbound_slots(p)) {
      if (filled[static_cast<std::size_t>(slot)]) continue;
      auto idx = detail::last_record_of(transcript, p, RecordKind::timeout);
      if (!idx) idx = detail::last_record_of(transcript, p);
      v.evidence.push_back(idx.value_or(transcript.size() - 1));
    }
  }
  std::sort(v.evidence.begin(), v.evidence.end());
  v.evidence.erase(std::unique(v.evidence.begin(), v.evidence.end()), v.evidence.end());
  v.measured_tick = worst;
  if (!v.evidence.empty()) v.kind = VerdictKind::timing_violation;
  return v;
}

/// Alarm when the sifted-key error rate exceeds `threshold`.
inline Verdict detect_qber(const Bb84Outcome& outcome, double threshold) {
  if (outcome.sifted_alice.empty() || outcome.sifted_bob.empty())
    throw DetectorPrecondition("detect_qber: sifted keys are empty");
  Verdict v;
  v.measured_fraction = outcome.qber;
  if (outcome.qber > threshold) {
    v.kind = VerdictKind::qber_alarm;
    // The reconciliation messages that exposed the mismatch.
    for (std::size_t i = 0; i < outcome.transcript.size(); ++i) {
      const auto& r = outcome.transcript[i];
      if (r.kind == RecordKind::deliver && r.channel == ChannelKind::classical &&
          (r.actor == Party::alice || r.actor == Party::bob))
        v.evidence.push_back(i);
    }
    if (v.evidence.empty()) v.evidence.push_back(outcome.transcript.size() ? outcome.transcript.size() - 1 : 0);
  }
  return v;
}

struct ExpectedTokens {
  AuthToken alice;
  AuthToken bob;
};

/// Each side's reassembled message must begin with the counterpart's token.
inline Verdict detect_content(const InterlockOutcome& outcome, const ExpectedTokens& expected) {
  if (!outcome.config.authentication_enabled)
    throw DetectorPrecondition("detect_content: session ran without authentication");
  Verdict v;
  auto check = [&](Party receiver, const std::optional<Bytes>& got, const AuthToken& token) {
    if (got && starts_with_token(*got, token)) return;
    auto idx = detail::last_record_of(outcome.transcript, receiver, RecordKind::phase);
    if (!idx) idx = detail::last_record_of(outcome.transcript, receiver);
    v.evidence.push_back(idx.value_or(outcome.transcript.size() ? outcome.transcript.size() - 1 : 0));
  };
  check(Party::alice, outcome.alice_received, expected.bob);
  check(Party::bob, outcome.bob_received, expected.alice);
  if (!v.evidence.empty()) v.kind = VerdictKind::content_mismatch;
  return v;
}

inline Verdict detect_content(const InterlockOutcome& outcome) {
  if (!outcome.alice_token || !outcome.bob_token)
    throw DetectorPrecondition("detect_content: session ran without authentication");
  return detect_content(outcome, ExpectedTokens{*outcome.alice_token, *outcome.bob_token});
}

/// Eve's first faithful packet towards Bob is not emitted before Alice's
/// last packet reached her. Vacuously true when Eve never forwarded.
inline bool copy_lag_respected(const InterlockOutcome& o) {
  if (!o.eve.first_forward) return true;
  return o.eve.last_alice_arrival && *o.eve.first_forward >= *o.eve.last_alice_arrival;
}

/// Every quantum delivery ends in exactly one measurement.
inline bool quantum_audit_balanced(const Transcript& t) {
  return t.count(RecordKind::deliver, ChannelKind::quantum) ==
         t.count(RecordKind::measure, ChannelKind::quantum);
}

}  // namespace qmitm
