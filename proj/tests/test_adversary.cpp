#include <gtest/gtest.h>

#include "qmitm/adversary.hpp"
#include "qmitm/bb84.hpp"
#include "qmitm/detection.hpp"
#include "qmitm/session.hpp"

using namespace qmitm;

namespace {
const ChannelTiming kTiming{Tick{1}, Tick{1}, Tick{2}};

InterlockConfig config(std::uint32_t n, const ChannelTiming& t = kTiming, std::size_t len = 48) {
  InterlockConfig c;
  c.n_packets = n;
  c.slot_length = InterlockConfig::packet_transit(t, len);
  return c;
}

// Transcript without Eve's read annotations.
std::string without_reads(const Transcript& t) {
  Transcript out;
  for (const auto& r : t)
    if (r.kind != RecordKind::read) out.append(r);
  return out.to_csv();
}
}  // namespace

TEST(EveStrategy, Validation) {
  EXPECT_NO_THROW(EveStrategy::absent().validate());
  EXPECT_NO_THROW(EveStrategy::misinform(Bytes{1}).validate());
  EXPECT_THROW(EveStrategy::of(EveKind::mitm_misinform).validate(), std::invalid_argument);
  EveStrategy s = EveStrategy::of(EveKind::mitm_copy);
  s.misinform_payload = Bytes{1};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_THROW(EveStrategy::of(EveKind::mitm_copy, Tick{-1}).validate(), std::invalid_argument);
  EXPECT_THROW(EveStrategy::misinform(Bytes{}).validate(), std::invalid_argument);
  EXPECT_EQ(eve_kind_from_string("mitm_packet_delay"), EveKind::mitm_packet_delay);
  EXPECT_THROW(eve_kind_from_string("mitm"), std::invalid_argument);
}

TEST(EveHandleQubit, PassiveTapCannotCopyAQubit) {
  Rng r{1};
  EXPECT_THROW(eve_handle_qubit(prepare_qubit(Bit::one, Basis::diagonal),
                                EveStrategy::of(EveKind::passive_classical), r, Tick{0}),
               std::logic_error);
}

TEST(EveHandleQubit, InterceptResendMatchedBasisCarriesAlicesBit) {
  Rng r{7};
  int matched = 0;
  for (int i = 0; i < 2000; ++i) {
    const Bit bit = r.bit();
    const Basis basis = r.basis();
    auto h = eve_handle_qubit(prepare_qubit(bit, basis), EveStrategy::of(EveKind::intercept_resend, Tick{4}), r,
                              Tick{10});
    ASSERT_TRUE(h.reemitted);
    EXPECT_EQ(h.at, Tick{14});
    EXPECT_EQ(h.reemitted->encoding_basis(), *h.eve_basis);
    if (*h.eve_basis == basis) {
      ++matched;
      EXPECT_EQ(h.reemitted->encoded_bit(), bit);
    }
  }
  EXPECT_GT(matched, 900);
}

TEST(EveHandleQubit, InterceptResendDownstreamQber) {
  Rng r{21};
  std::size_t sifted = 0, errors = 0;
  for (int i = 0; i < 10000; ++i) {
    const Bit bit = r.bit();
    const Basis a = r.basis(), b = r.basis();
    auto h = eve_handle_qubit(prepare_qubit(bit, a), EveStrategy::of(EveKind::intercept_resend), r, Tick{0});
    const Bit got = measure_qubit(*h.reemitted, b, r);
    if (a == b) {
      ++sifted;
      errors += got != bit;
    }
  }
  EXPECT_NEAR(static_cast<double>(errors) / static_cast<double>(sifted), 0.25, 0.02);
}

TEST(EveHandleQubit, MitmAbsorbs) {
  Rng r{1};
  Qubit q = prepare_qubit(Bit::one, Basis::rectilinear);
  auto h = eve_handle_qubit(std::move(q), EveStrategy::of(EveKind::mitm_copy), r, Tick{0});
  EXPECT_FALSE(h.reemitted);
  EXPECT_TRUE(h.measured);
  EXPECT_TRUE(q.spent());  // NOLINT(bugprone-use-after-move)
}

TEST(EveBb84, MitmCopyAbsorbsEveryQubit) {
  const auto o = run_bb84(1000, EveStrategy::of(EveKind::mitm_copy), 2, kTiming);
  std::size_t alice_to_bob_at_bob = 0, eve_measures = 0;
  for (const auto& r : o.transcript) {
    if (r.channel == ChannelKind::quantum && r.kind == RecordKind::deliver && r.from == Party::alice &&
        r.actor == Party::bob)
      ++alice_to_bob_at_bob;
    if (r.kind == RecordKind::measure && r.actor == Party::eve) ++eve_measures;
  }
  EXPECT_EQ(alice_to_bob_at_bob, 0u);
  EXPECT_EQ(eve_measures, 1000u);
  EXPECT_TRUE(quantum_audit_balanced(o.transcript));
}

TEST(EveBb84, InterceptResendKeepsQuantumAuditBalanced) {
  const auto o = run_bb84(500, EveStrategy::of(EveKind::intercept_resend), 2, kTiming);
  EXPECT_TRUE(quantum_audit_balanced(o.transcript));
  EXPECT_EQ(o.transcript.count(RecordKind::measure, ChannelKind::quantum), 1000u);
}

TEST(PassiveTap, Bb84TranscriptOnlyGainsReads) {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto clean = run_bb84(400, EveStrategy::absent(), seed, kTiming);
    const auto tapped = run_bb84(400, EveStrategy::of(EveKind::passive_classical), seed, kTiming);
    EXPECT_GT(tapped.transcript.count(RecordKind::read), 0u);
    EXPECT_EQ(without_reads(tapped.transcript), clean.transcript.to_csv());
    EXPECT_EQ(tapped.sifted_bob, clean.sifted_bob);
  }
}

TEST(PassiveTap, InterlockTranscriptOnlyGainsReads) {
  Rng r{3};
  const Bytes a = r.bytes(48), b = r.bytes(48);
  for (auto clocks : {ClockModel::perfect(), ClockModel::gps_jitter(Tick{3})}) {
    auto cfg = config(4);
    cfg.clock_sync = clocks;
    const auto clean = run_interlock(a, b, cfg, EveStrategy::absent(), kTiming, 5);
    const auto tapped = run_interlock(a, b, cfg, EveStrategy::of(EveKind::passive_classical), kTiming, 5);
    EXPECT_EQ(tapped.transcript.count(RecordKind::read), 8u);
    EXPECT_EQ(without_reads(tapped.transcript), clean.transcript.to_csv());
    EXPECT_EQ(tapped.eve.packets_read, 8u);
  }
}

TEST(EveInterlock, CopyForwardsOnlyAfterAlicesLastPacket) {
  Rng r{4};
  const Bytes a = r.bytes(48), b = r.bytes(48);
  for (std::uint32_t n : {2u, 4u}) {
    const auto o = run_interlock(a, b, config(n), EveStrategy::of(EveKind::mitm_copy, Tick{1}), kTiming, 8);
    ASSERT_TRUE(o.eve.first_forward);
    ASSERT_TRUE(o.eve.last_alice_arrival);
    EXPECT_GE(*o.eve.first_forward, *o.eve.last_alice_arrival + Tick{1});
    EXPECT_EQ(o.bob_received, a);  // Eve delivers Alice's real message, late
    EXPECT_NE(o.alice_received, b);
    EXPECT_EQ(o.eve.alice_plaintext, a);
  }
}

TEST(EveInterlock, MisinformWithZeroDelayStaysInSlot) {
  Rng r{4};
  const Bytes a = r.bytes(48), b = r.bytes(48);
  const Bytes lie(48, 'x');
  const auto cfg = config(4);
  const auto o = run_interlock(a, b, cfg, EveStrategy::misinform(lie), kTiming, 2);
  EXPECT_EQ(o.bob_received, lie);
  EXPECT_EQ(o.alice_received, lie);
  const SlotSchedule sched{cfg.n_packets, cfg.slot_length};
  for (const auto& rec : o.transcript)
    if (rec.kind == RecordKind::deliver && rec.actor == Party::bob && rec.slot) {
      EXPECT_GE(rec.local_tick, sched.start(*rec.slot));
      EXPECT_LE(rec.local_tick, sched.end(*rec.slot));
    }
}

TEST(EveInterlock, PacketDelayRelaysGenuinePacketsOneSlotLate) {
  Rng r{6};
  const Bytes a = r.bytes(48), b = r.bytes(48);
  const auto o = run_interlock(a, b, config(4), EveStrategy::of(EveKind::mitm_packet_delay), kTiming, 3);
  const PacketSet& bob_in = o.inbound.at(Party::bob);
  const PacketSet& alice_out = o.outbound.at(Party::alice);
  ASSERT_EQ(bob_in.packets.size(), 4u);
  // Bob's slots 1..4 carry (fake, genuine 1, genuine 2, genuine 3).
  EXPECT_NE(bob_in.packets[0].block, alice_out.packets[0].block);
  for (std::size_t k = 1; k < 4; ++k) {
    EXPECT_EQ(bob_in.packets[k].index, k + 1);
    EXPECT_EQ(bob_in.packets[k].block, alice_out.packets[k - 1].block);
  }
  EXPECT_NE(o.bob_received, a);
  EXPECT_NE(o.alice_received, b);
}
