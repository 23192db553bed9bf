#include <gtest/gtest.h>

#include "qmitm/detection.hpp"

using namespace qmitm;

namespace {
const ChannelTiming kTiming{Tick{1}, Tick{1}, Tick{2}};

InterlockConfig config(std::uint32_t n, std::size_t len = 48) {
  InterlockConfig c;
  c.n_packets = n;
  c.slot_length = InterlockConfig::packet_transit(kTiming, len);
  return c;
}

std::pair<Bytes, Bytes> messages(std::uint64_t seed) {
  Rng r{seed};
  return {r.bytes(32), r.bytes(32)};
}

bool is_subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}
}  // namespace

TEST(DetectTiming, CleanRunPerfectClocks) {
  const auto [a, b] = messages(1);
  for (std::uint32_t n : {2u, 4u}) {
    const auto o = run_interlock(a, b, config(n), EveStrategy::absent(), kTiming, 1);
    const Verdict v = detect_timing(o.transcript, o.config);
    EXPECT_TRUE(v.clean());
    EXPECT_TRUE(v.evidence.empty());
    EXPECT_EQ(v.measured_tick, Tick{0});
  }
}

TEST(DetectTiming, CopyFlagsBobsFirstSlot) {
  const auto [a, b] = messages(2);
  const auto cfg = config(2, 32);
  const auto o = run_interlock(a, b, cfg, EveStrategy::of(EveKind::mitm_copy, Tick{1}), kTiming, 2);
  const Verdict v = detect_timing(o.transcript, cfg);
  ASSERT_EQ(v.kind, VerdictKind::timing_violation);
  bool slot1 = false;
  for (std::size_t i : v.evidence) {
    const auto& r = o.transcript[i];
    slot1 |= r.actor == Party::bob && r.kind == RecordKind::deliver && r.slot == 1;
  }
  EXPECT_TRUE(slot1);
  // Alice's last packet lands at the end of slot 3, Eve waits one tick, and
  // the re-encrypted first packet then needs one slot to cross: it arrives
  // 3L + 1 past the end of slot 1.
  EXPECT_GE(v.measured_tick.value(), cfg.slot_length * 3 + Tick{1});
}

TEST(DetectTiming, JitterWithinToleranceIsClean) {
  auto cfg = config(4);
  cfg.clock_sync = ClockModel::gps_jitter(Tick{3});
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto [a, b] = messages(seed);
    const auto o = run_interlock(a, b, cfg, EveStrategy::absent(), kTiming, seed);
    const Verdict v = detect_timing(o.transcript, cfg);
    ASSERT_TRUE(v.clean()) << "seed " << seed;
    EXPECT_LE(v.measured_tick.value(), Tick{3});
  }
}

TEST(DetectTiming, EnlargingEpsilonOnlyShrinksEvidence) {
  const auto [a, b] = messages(3);
  auto cfg = config(4);
  cfg.clock_sync = ClockModel::gps_jitter(Tick{5});
  for (EveKind k : {EveKind::absent, EveKind::mitm_copy, EveKind::mitm_packet_delay}) {
    const auto o = run_interlock(a, b, cfg, EveStrategy::of(k, Tick{1}), kTiming, 4);
    std::vector<std::size_t> prev;
    bool was_clean = false;
    for (std::int64_t e = 0; e <= 200; e += 5) {
      cfg.tolerance_epsilon = Tick{e};
      const Verdict v = detect_timing(o.transcript, cfg);
      if (e > 0) {
        EXPECT_TRUE(is_subset(v.evidence, prev)) << to_string(k) << " eps " << e;
      }
      if (was_clean) {
        EXPECT_TRUE(v.clean());
      }
      was_clean = v.clean();
      prev = v.evidence;
    }
    cfg.tolerance_epsilon.reset();
  }
}

TEST(DetectTiming, UnsynchronizedClocksShowTheOffset) {
  const auto [a, b] = messages(5);
  auto cfg = config(2, 32);  // no slack inside the slots
  cfg.clock_sync = ClockModel::unsynchronized({{Party::alice, Tick{0}}, {Party::bob, Tick{50}}});
  const auto o = run_interlock(a, b, cfg, EveStrategy::absent(), kTiming, 5);
  const Verdict v = detect_timing(o.transcript, cfg);
  EXPECT_EQ(v.kind, VerdictKind::timing_violation);
  EXPECT_EQ(v.measured_tick, Tick{50});
  cfg.tolerance_epsilon = Tick{50};
  EXPECT_TRUE(detect_timing(o.transcript, cfg).clean());
}

TEST(DetectTiming, TranscriptWithoutPhasesIsMalformed) {
  EXPECT_THROW(detect_timing(Transcript{}, config(2)), MalformedTranscript);
  const auto o = run_bb84(50, EveStrategy::absent(), 1, kTiming);
  EXPECT_THROW(detect_timing(o.transcript, config(2)), MalformedTranscript);
}

TEST(DetectQber, Examples) {
  const auto ir = run_bb84(10000, EveStrategy::of(EveKind::intercept_resend), 1, kTiming);
  const Verdict alarm = detect_qber(ir, 0.11);
  EXPECT_EQ(alarm.kind, VerdictKind::qber_alarm);
  EXPECT_NEAR(alarm.measured_fraction.value(), 0.25, 0.02);
  EXPECT_FALSE(alarm.evidence.empty());

  const auto mitm = run_bb84(10000, EveStrategy::of(EveKind::mitm_copy), 1, kTiming);
  EXPECT_TRUE(detect_qber(mitm, 0.11).clean());
  EXPECT_EQ(*mitm.eve_key, mitm.sifted_bob);

  const Verdict none = detect_qber(run_bb84(2000, EveStrategy::absent(), 1, kTiming), 0.11);
  EXPECT_TRUE(none.clean());
  EXPECT_EQ(none.measured_fraction, 0.0);
}

TEST(DetectQber, EmptySiftedKeys) {
  Bb84Outcome o;
  EXPECT_THROW(detect_qber(o, 0.11), DetectorPrecondition);
}

TEST(DetectContent, NeedsAuthentication) {
  const auto [a, b] = messages(6);
  const auto o = run_interlock(a, b, config(2), EveStrategy::absent(), kTiming, 6);
  EXPECT_THROW(detect_content(o), DetectorPrecondition);
}

TEST(DetectContent, Examples) {
  const auto [a, b] = messages(7);
  auto cfg = config(4, 48);
  cfg.authentication_enabled = true;
  const auto clean = run_interlock(a, b, cfg, EveStrategy::absent(), kTiming, 7);
  EXPECT_TRUE(detect_content(clean).clean());

  const auto lie = run_interlock(a, b, cfg, EveStrategy::misinform(Bytes(40, 'z')), kTiming, 7);
  EXPECT_EQ(detect_content(lie).kind, VerdictKind::content_mismatch);
  EXPECT_TRUE(detect_timing(lie.transcript, cfg).clean());

  const auto delay = run_interlock(a, b, cfg, EveStrategy::of(EveKind::mitm_packet_delay), kTiming, 7);
  EXPECT_EQ(detect_content(delay).kind, VerdictKind::content_mismatch);
  EXPECT_TRUE(detect_timing(delay.transcript, cfg).clean());
  EXPECT_EQ(detect_content(delay).evidence.size(), 2u);
}

TEST(DetectContent, WrongExpectedTokens) {
  const auto [a, b] = messages(8);
  auto cfg = config(2, 48);
  cfg.authentication_enabled = true;
  const auto o = run_interlock(a, b, cfg, EveStrategy::absent(), kTiming, 8);
  const ExpectedTokens swapped{*o.bob_token, *o.alice_token};
  EXPECT_EQ(detect_content(o, swapped).kind, VerdictKind::content_mismatch);
}

TEST(Audits, CopyLagAndQuantumBalance) {
  const auto [a, b] = messages(9);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto o = run_interlock(a, b, config(4), EveStrategy::of(EveKind::mitm_copy, Tick{1}), kTiming, seed);
    EXPECT_TRUE(copy_lag_respected(o));
  }
  InterlockOutcome forged;
  forged.eve.first_forward = Tick{5};
  EXPECT_FALSE(copy_lag_respected(forged));
  forged.eve.last_alice_arrival = Tick{6};
  EXPECT_FALSE(copy_lag_respected(forged));
  forged.eve.last_alice_arrival = Tick{5};
  EXPECT_TRUE(copy_lag_respected(forged));

  EXPECT_TRUE(quantum_audit_balanced(run_bb84(200, EveStrategy::of(EveKind::mitm_copy), 1, kTiming).transcript));
}
