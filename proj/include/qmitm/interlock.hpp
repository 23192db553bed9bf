#pragma once

// The interlock protocol over the classical channel.
//
// Phases per party:
//   (1) encrypt the whole message with the all-or-nothing packet cipher
//   (2) send the first packet
//   (3) send each remaining packet only after the counterpart's previous
//       packet has arrived
//   (4) reassemble once every inbound packet is in and every outbound packet
//       is on the wire
//
// Slots alternate: Alice's packet k owns slot 2k-1, Bob's packet k owns slot
// 2k. Slot s spans [s * L, (s + 1) * L] on the owner's local clock. Alice's
// packet k (k >= 2) waits for Bob's packet k-1; Bob's packet k waits for
// Alice's packet k.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qmitm/channels.hpp"
#include "qmitm/ciphers.hpp"
#include "qmitm/core.hpp"
#include "qmitm/kernel.hpp"

namespace qmitm {

struct InterlockConfig {
  std::uint32_t n_packets = 2;
  Tick slot_length{0};
  std::optional<Tick> tolerance_epsilon;  // defaults to the jitter bound
  ClockModel clock_sync;
  bool authentication_enabled = false;
  // Slots a party keeps waiting past an expected slot's end before giving
  // up; 0 means 4 * n_packets.
  std::uint32_t timeout_slots = 0;

  Tick epsilon() const { return tolerance_epsilon.value_or(clock_sync.jitter_bound); }
  std::uint32_t effective_timeout_slots() const {
    return timeout_slots == 0 ? 4 * n_packets : timeout_slots;
  }

  // Time to push one packet of `message_length` plaintext bytes across.
  static Tick packet_transit(const ChannelTiming& timing, std::size_t message_length) {
    return timing.classical_latency(8 * wire_size(message_length));
  }

  void validate(const ChannelTiming& timing, std::size_t longest_message) const {
    if (n_packets < 2) throw std::invalid_argument("interlock config: n_packets must be >= 2");
    if (tolerance_epsilon && *tolerance_epsilon < Tick{0})
      throw std::invalid_argument("interlock config: tolerance_epsilon must be >= 0");
    clock_sync.validate();
    const Tick need = packet_transit(timing, longest_message);
    if (slot_length < need || slot_length < Tick{1})
      throw std::invalid_argument(
          "interlock config: slot_length " + std::to_string(slot_length.value) +
          " is shorter than the minimal packet transmission time " + std::to_string(need.value));
  }
};

struct SlotSchedule {
  std::uint32_t n_packets;
  Tick slot_length;

  static constexpr int alice_slot(std::uint32_t k) { return static_cast<int>(2 * k - 1); }
  static constexpr int bob_slot(std::uint32_t k) { return static_cast<int>(2 * k); }
  static constexpr int slot_for(Party sender, std::uint32_t k) {
    return sender == Party::alice ? alice_slot(k) : bob_slot(k);
  }
  // Party that should be receiving in slot s.
  static constexpr Party receiver_of(int slot) { return slot % 2 == 1 ? Party::bob : Party::alice; }
  static constexpr std::uint32_t packet_of(int slot) {
    return static_cast<std::uint32_t>((slot + 1) / 2);
  }

  Tick start(int slot) const { return slot_length * slot; }
  Tick end(int slot) const { return slot_length * (slot + 1); }
  int last_slot() const { return static_cast<int>(2 * n_packets); }

  std::vector<int> inbound_slots(Party receiver) const {
    std::vector<int> out;
    for (std::uint32_t k = 1; k <= n_packets; ++k)
      out.push_back(slot_for(counterpart(receiver), k));
    return out;
  }
};

// Fixed-format authentication token: "QAUT" followed by a 12-byte tag keyed
// by the secret Alice and Bob share out of band.
inline constexpr std::size_t kAuthTokenBytes = 16;
using AuthToken = std::array<std::uint8_t, kAuthTokenBytes>;

inline AuthToken auth_token(std::uint64_t secret, Party party) {
  AuthToken t{'Q', 'A', 'U', 'T'};
  const std::uint64_t a = Rng::mix(secret ^ (0xa0761d6478bd642fULL * (1 + static_cast<unsigned>(party))));
  const std::uint64_t b = Rng::mix(a ^ secret);
  for (std::size_t i = 0; i < 8; ++i) t[4 + i] = static_cast<std::uint8_t>(a >> (56 - 8 * i));
  for (std::size_t i = 0; i < 4; ++i) t[12 + i] = static_cast<std::uint8_t>(b >> (56 - 8 * i));
  return t;
}

inline Bytes with_token(const AuthToken& token, const Bytes& message) {
  Bytes out(token.begin(), token.end());
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

inline bool starts_with_token(const Bytes& message, const AuthToken& token) {
  return message.size() >= token.size() && std::equal(token.begin(), token.end(), message.begin());
}

/// One packet per slot; delegates to aont_encrypt.
inline PacketSet packetize(const Bytes& message, const CipherKey& key, std::uint32_t n, Rng& rng) {
  return aont_encrypt(message, key, n, rng);
}

/// Delegates to aont_decrypt; an incomplete set throws DecryptionImpossible.
inline Bytes reassemble(const PacketSet& received, const CipherKey& key) {
  return aont_decrypt(received, key);
}

inline ClassicalFrame packet_frame(const Packet& p, int slot) {
  ClassicalFrame f = ClassicalFrame::from_bytes(encode_packet(p));
  f.slot = slot;
  f.phase = p.index == 1 ? 2 : 3;
  return f;
}

enum class ReceptionStatus : std::uint8_t { pending, ok, timeout, corrupt };

constexpr std::string_view to_string(ReceptionStatus s) {
  switch (s) {
    case ReceptionStatus::pending: return "pending";
    case ReceptionStatus::ok: return "ok";
    case ReceptionStatus::timeout: return "timeout";
    case ReceptionStatus::corrupt: return "corrupt";
  }
  return "?";
}

using PhaseMarks = std::vector<std::pair<int, Tick>>;

/// Alice or Bob. Sends are triggered by two conditions, the local clock
/// reaching the packet's slot and the interlock gate opening; whichever comes
/// last fires the send. Late packets are accepted and recorded, leaving the
/// verdict to the detectors.
class InterlockParty {
 public:
  InterlockParty(Party self, Network& net, const InterlockConfig& cfg, Bytes plaintext,
                 CipherKey key, Rng rng)
      : self_(self),
        net_(&net),
        cfg_(&cfg),
        schedule_{cfg.n_packets, cfg.slot_length},
        plaintext_(std::move(plaintext)),
        key_(key),
        rng_(rng),
        slot_reached_(cfg.n_packets + 1, false),
        sent_(cfg.n_packets + 1, false) {
    if (self_ == Party::eve) throw std::invalid_argument("InterlockParty: Eve is not a legitimate party");
    inbound_.count = cfg.n_packets;
  }

  Party self() const { return self_; }
  ReceptionStatus status() const { return status_; }
  const std::optional<Bytes>& received() const { return received_; }
  const PhaseMarks& phases() const { return phases_; }
  const PacketSet& inbound() const { return inbound_; }
  const PacketSet& outbound() const { return outbound_; }
  std::uint32_t sent_count() const { return next_to_send_ - 1; }

  void start() {
    Kernel& k = net_->kernel();
    k.schedule(Tick{0}, self_, "encrypt", [this] {
      outbound_ = packetize(plaintext_, key_, cfg_->n_packets, rng_);
      mark(1);
    });
    PartyClock& clock = k.clock(self_);
    for (std::uint32_t i = 1; i <= cfg_->n_packets; ++i) {
      const int slot = SlotSchedule::slot_for(self_, i);
      const Tick due = std::max(Tick{0}, clock.global_for(schedule_.start(slot)));
      k.schedule(due, self_, "slot", [this, i] {
        slot_reached_[i] = true;
        try_send();
      });
    }
    const Tick grace = cfg_->slot_length * static_cast<std::int64_t>(cfg_->effective_timeout_slots());
    for (std::uint32_t i = 1; i <= cfg_->n_packets; ++i) {
      const int slot = SlotSchedule::slot_for(counterpart(self_), i);
      const Tick due = std::max(Tick{0}, clock.global_for(schedule_.end(slot) + grace));
      k.schedule(due, self_, "deadline", [this, i] {
        if (status_ == ReceptionStatus::pending && received_count() < i) give_up(slot_for_inbound(i));
      });
    }
  }

  void on_classical(const ClassicalDelivery& d) {
    if (status_ != ReceptionStatus::pending) return;
    Packet p;
    try {
      p = decode_packet(d.frame.bytes);
    } catch (const MalformedPacket&) {
      corrupt();
      return;
    }
    if (p.count != cfg_->n_packets || p.index < 1 || p.index > cfg_->n_packets) {
      corrupt();
      return;
    }
    if (inbound_.packets.empty()) inbound_.plaintext_length = p.block.size() - kLengthHeaderBytes;
    inbound_.packets.push_back(std::move(p));
    try_send();
    maybe_finish();
  }

 private:
  std::uint32_t received_count() const { return static_cast<std::uint32_t>(inbound_.packets.size()); }
  int slot_for_inbound(std::uint32_t k) const { return SlotSchedule::slot_for(counterpart(self_), k); }

  bool gate_open(std::uint32_t k) const {
    return self_ == Party::alice ? received_count() >= k - 1 : received_count() >= k;
  }

  void try_send() {
    while (status_ == ReceptionStatus::pending && next_to_send_ <= cfg_->n_packets &&
           slot_reached_[next_to_send_] && gate_open(next_to_send_) && !outbound_.packets.empty()) {
      const std::uint32_t k = next_to_send_++;
      const Packet& p = outbound_.packets[k - 1];
      if (k <= 2) mark(k == 1 ? 2 : 3);
      const ClassicalFrame f = packet_frame(p, SlotSchedule::slot_for(self_, k));
      const Tick now = net_->kernel().now();
      last_send_done_ = now + std::max(Tick{1}, net_->timing().classical_serialization(f.bits));
      net_->send_classical(f, self_, counterpart(self_), now);
      sent_[k] = true;
      if (k == cfg_->n_packets) maybe_finish();
    }
  }

  void maybe_finish() {
    if (finish_scheduled_ || status_ != ReceptionStatus::pending) return;
    if (received_count() < cfg_->n_packets || next_to_send_ <= cfg_->n_packets) return;
    finish_scheduled_ = true;
    const Tick at = std::max(net_->kernel().now(), last_send_done_);
    net_->kernel().schedule(at, self_, "reassemble", [this] {
      if (status_ != ReceptionStatus::pending) return;
      mark(4);
      try {
        received_ = reassemble(inbound_, key_);
        status_ = ReceptionStatus::ok;
      } catch (const std::runtime_error&) {
        status_ = ReceptionStatus::corrupt;
      }
    });
  }

  void give_up(int slot) {
    status_ = ReceptionStatus::timeout;
    TranscriptRecord r;
    r.actor = self_;
    r.from = self_;
    r.to = self_;
    r.kind = RecordKind::timeout;
    r.slot = slot;
    net_->kernel().record(r);
  }

  void corrupt() { status_ = ReceptionStatus::corrupt; }

  void mark(int phase) {
    net_->kernel().mark_phase(self_, phase);
    phases_.emplace_back(phase, net_->kernel().now());
  }

  Party self_;
  Network* net_;
  const InterlockConfig* cfg_;
  SlotSchedule schedule_;
  Bytes plaintext_;
  CipherKey key_;
  Rng rng_;
  PacketSet outbound_;
  PacketSet inbound_;
  std::vector<bool> slot_reached_;
  std::vector<bool> sent_;
  std::uint32_t next_to_send_ = 1;
  Tick last_send_done_{0};
  bool finish_scheduled_ = false;
  ReceptionStatus status_ = ReceptionStatus::pending;
  std::optional<Bytes> received_;
  PhaseMarks phases_;
};

}  // namespace qmitm
