#pragma once

// Eve against the interlock protocol.
//
// Under every mitm kind Eve captures both directions of the classical
// channel and answers each side herself: as a fake Bob towards Alice and as
// a fake Alice towards Bob. She holds one session key per side and knows the
// public slot schedule and message lengths.
//
//   mitm_copy          decode Alice's full message, re-encrypt it for Bob,
//                      then interlock with Bob from that point on. Alice is
//                      answered in-slot with a placeholder so that she keeps
//                      releasing packets.
//   mitm_misinform     answer both sides in-slot with the misinform payload.
//   mitm_packet_delay  send a forged first packet to each side, then relay
//                      the counterpart's genuine packet k-1 in the slot of
//                      packet k. The last genuine packet of each side is
//                      never delivered.
//   passive_classical  read every packet, change nothing.

#include <map>
#include <optional>
#include <vector>

#include "qmitm/adversary.hpp"
#include "qmitm/channels.hpp"
#include "qmitm/ciphers.hpp"
#include "qmitm/interlock.hpp"

namespace qmitm {

struct EveInterlockKeys {
  std::optional<CipherKey> alice_side;  // key Alice encrypts under
  std::optional<CipherKey> bob_side;    // key Bob encrypts under
};

struct EveInterlockReport {
  std::optional<Bytes> alice_plaintext;  // what Eve decoded from Alice
  std::optional<Bytes> bob_plaintext;
  std::optional<Tick> last_alice_arrival;  // Alice's final packet reaching Eve
  std::optional<Tick> first_forward;       // first re-encrypted copy emitted to Bob
  std::size_t packets_read = 0;
};

class EveInterlock {
 public:
  EveInterlock(Network& net, const InterlockConfig& cfg, EveStrategy strategy, EveInterlockKeys keys,
               std::size_t alice_length, std::size_t bob_length, Rng rng)
      : net_(&net),
        cfg_(&cfg),
        schedule_{cfg.n_packets, cfg.slot_length},
        strategy_(std::move(strategy)),
        keys_(keys),
        alice_length_(alice_length),
        bob_length_(bob_length),
        rng_(rng) {}

  const EveInterlockReport& report() const { return report_; }

  void install() {
    switch (strategy_.kind) {
      case EveKind::absent:
      case EveKind::intercept_resend:
        return;
      case EveKind::passive_classical:
        for (Party from : {Party::alice, Party::bob})
          net_->install_classical_tap(ChannelKind::classical, from, counterpart(from), TapMode::passive,
                                      [this](const ClassicalDelivery& d) { observe(d); });
        return;
      case EveKind::mitm_copy:
      case EveKind::mitm_misinform:
      case EveKind::mitm_packet_delay:
        for (Party from : {Party::alice, Party::bob})
          net_->install_classical_tap(ChannelKind::classical, from, counterpart(from), TapMode::active,
                                      [this](const ClassicalDelivery& d) { capture(d); });
        start();
        return;
    }
  }

 private:
  // Packets Eve emits towards `to` in the slot reserved for packet k.
  void emit(Party to, std::uint32_t k, Packet p, Tick not_before, bool faithful) {
    const int slot = SlotSchedule::slot_for(counterpart(to), k);
    const Tick at = std::max(not_before, schedule_.start(slot)) + strategy_.processing_delay;
    p.index = k;
    net_->kernel().schedule(at, Party::eve, "eve-emit", [this, to, slot, p = std::move(p), faithful] {
      if (faithful) {
        TranscriptRecord r;
        r.actor = Party::eve;
        r.channel = ChannelKind::classical;
        r.from = Party::eve;
        r.to = to;
        r.kind = RecordKind::forward;
        r.slot = slot;
        r.payload_len = wire_size(p.block.size() - kLengthHeaderBytes);
        r.digest = fnv1a64(encode_packet(p));
        const Tick now = net_->kernel().now();
        net_->kernel().record(r);
        if (to == Party::bob && !report_.first_forward) report_.first_forward = now;
      }
      net_->send_classical(packet_frame(p, slot), Party::eve, to, net_->kernel().now());
    });
  }

  void start() {
    const std::uint32_t n = cfg_->n_packets;
    switch (strategy_.kind) {
      case EveKind::mitm_copy:
        to_alice_ = aont_encrypt(Bytes(bob_length_, 0), alice_key(), n, rng_);
        break;
      case EveKind::mitm_misinform:
        to_alice_ = aont_encrypt(*strategy_.misinform_payload, alice_key(), n, rng_);
        to_bob_ = aont_encrypt(*strategy_.misinform_payload, bob_key(), n, rng_);
        emit(Party::bob, 1, to_bob_->packets[0], Tick{0}, false);
        break;
      case EveKind::mitm_packet_delay: {
        const PacketSet forged_for_alice = aont_encrypt(Bytes(bob_length_, 0), alice_key(), n, rng_);
        const PacketSet forged_for_bob = aont_encrypt(Bytes(alice_length_, 0), bob_key(), n, rng_);
        forged_alice_first_ = forged_for_alice.packets[0];
        emit(Party::bob, 1, forged_for_bob.packets[0], Tick{0}, false);
        break;
      }
      default:
        break;
    }
  }

  CipherKey alice_key() const { return keys_.alice_side.value_or(CipherKey{}); }
  CipherKey bob_key() const { return keys_.bob_side.value_or(CipherKey{}); }

  void observe(const ClassicalDelivery& d) {
    ++report_.packets_read;
    Packet p;
    try {
      p = decode_packet(d.frame.bytes);
    } catch (const MalformedPacket&) {
      return;
    }
    PacketSet& set = d.from == Party::alice ? from_alice_ : from_bob_;
    absorb_into(set, std::move(p));
  }

  static void absorb_into(PacketSet& set, Packet p) {
    if (set.packets.empty()) {
      set.count = p.count;
      set.plaintext_length = p.block.size() - kLengthHeaderBytes;
    }
    set.packets.push_back(std::move(p));
  }

  std::optional<Bytes> try_decode(const PacketSet& set, const std::optional<CipherKey>& key) {
    if (!key) return std::nullopt;
    try {
      return aont_decrypt(set, *key);
    } catch (const std::runtime_error&) {
      return std::nullopt;
    }
  }

  void capture(const ClassicalDelivery& d) {
    ++report_.packets_read;
    Packet p;
    try {
      p = decode_packet(d.frame.bytes);
    } catch (const MalformedPacket&) {
      return;
    }
    const std::uint32_t k = p.index;
    const std::uint32_t n = cfg_->n_packets;
    const Tick now = net_->kernel().now();
    if (d.from == Party::alice) {
      absorb_into(from_alice_, p);
      if (k == n) report_.last_alice_arrival = now;
      on_alice_packet(k, std::move(p), now);
      if (from_alice_.packets.size() == n) report_.alice_plaintext = try_decode(from_alice_, keys_.alice_side);
    } else {
      absorb_into(from_bob_, p);
      on_bob_packet(k, std::move(p), now);
      if (from_bob_.packets.size() == n) report_.bob_plaintext = try_decode(from_bob_, keys_.bob_side);
    }
  }

  void on_alice_packet(std::uint32_t k, Packet p, Tick now) {
    const std::uint32_t n = cfg_->n_packets;
    switch (strategy_.kind) {
      case EveKind::mitm_copy:
        emit(Party::alice, k, to_alice_->packets[k - 1], now, false);
        if (k == n) {
          // Nothing can be forwarded before the whole message is in hand.
          auto plain = try_decode(from_alice_, keys_.alice_side);
          if (!plain) return;
          to_bob_ = aont_encrypt(*plain, bob_key(), n, rng_);
          emit(Party::bob, 1, to_bob_->packets[0], now, true);
        }
        break;
      case EveKind::mitm_misinform:
        emit(Party::alice, k, to_alice_->packets[k - 1], now, false);
        break;
      case EveKind::mitm_packet_delay:
        if (k == 1) emit(Party::alice, 1, *forged_alice_first_, now, false);
        if (k < n) emit(Party::bob, k + 1, std::move(p), now, false);
        break;
      default:
        break;
    }
  }

  void on_bob_packet(std::uint32_t k, Packet p, Tick now) {
    const std::uint32_t n = cfg_->n_packets;
    switch (strategy_.kind) {
      case EveKind::mitm_copy:
        if (to_bob_ && k < n) emit(Party::bob, k + 1, to_bob_->packets[k], now, true);
        break;
      case EveKind::mitm_misinform:
        if (k < n) emit(Party::bob, k + 1, to_bob_->packets[k], now, false);
        break;
      case EveKind::mitm_packet_delay:
        if (k < n) emit(Party::alice, k + 1, std::move(p), now, false);
        break;
      default:
        break;
    }
  }

  Network* net_;
  const InterlockConfig* cfg_;
  SlotSchedule schedule_;
  EveStrategy strategy_;
  EveInterlockKeys keys_;
  std::size_t alice_length_;
  std::size_t bob_length_;
  Rng rng_;
  PacketSet from_alice_;
  PacketSet from_bob_;
  std::optional<PacketSet> to_alice_;
  std::optional<PacketSet> to_bob_;
  std::optional<Packet> forged_alice_first_;
  EveInterlockReport report_;
};

}  // namespace qmitm
