#pragma once

// Quantum and classical channels with tap points.
//
// Every send produces exactly one delivery record, appended when the payload
// lands (so the transcript stays in global time order). An active tap
// captures the payload instead of the receiver; a passive classical tap gets
// a copy alongside the receiver.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <utility>

#include "qmitm/core.hpp"
#include "qmitm/kernel.hpp"

namespace qmitm {

struct ChannelTiming {
  Tick tau_q{1};        // per qubit
  Tick tau_c{1};        // per classical bit
  Tick propagation{0};  // per hop

  void validate() const {
    if (tau_q < Tick{1}) throw std::invalid_argument("channel timing: tau_q must be >= 1");
    if (tau_c < Tick{0}) throw std::invalid_argument("channel timing: tau_c must be >= 0");
    if (propagation < Tick{0})
      throw std::invalid_argument("channel timing: propagation must be >= 0");
  }

  Tick quantum_latency() const { return tau_q + propagation; }
  Tick classical_latency(std::size_t bits) const {
    return tau_c * static_cast<std::int64_t>(bits) + propagation;
  }
  // Time the sender spends putting `bits` on the wire.
  Tick classical_serialization(std::size_t bits) const {
    return tau_c * static_cast<std::int64_t>(bits);
  }
};

/// Classical payload. Bit strings are packed MSB-first; `bits` is the
/// on-wire length that drives transmission time.
struct ClassicalFrame {
  Bytes bytes;
  std::size_t bits = 0;
  std::optional<int> slot;
  std::optional<int> phase;

  static ClassicalFrame from_bytes(Bytes b) {
    ClassicalFrame f;
    f.bits = b.size() * 8;
    f.bytes = std::move(b);
    return f;
  }

  static ClassicalFrame from_bits(const BitString& s) {
    ClassicalFrame f;
    f.bits = s.size();
    f.bytes.assign((s.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] == Bit::one) f.bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    return f;
  }

  BitString to_bits() const {
    BitString out(bits);
    for (std::size_t i = 0; i < bits; ++i)
      out[i] = to_bit((bytes[i / 8] >> (7 - i % 8)) & 1u);
    return out;
  }

  std::uint64_t digest() const { return fnv1a64(bytes); }
};

struct QubitDelivery {
  Qubit qubit;
  Party from;
  Party to;  // intended receiver
  Tick at;
};

struct ClassicalDelivery {
  ClassicalFrame frame;
  ChannelKind channel;
  Party from;
  Party to;  // intended receiver
  Tick at;
};

enum class TapMode : std::uint8_t { active, passive };

class Network {
 public:
  using QubitHandler = std::function<void(QubitDelivery&&)>;
  using ClassicalHandler = std::function<void(const ClassicalDelivery&)>;

  Network(Kernel& kernel, ChannelTiming timing) : kernel_(&kernel), timing_(timing) {
    timing_.validate();
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  Kernel& kernel() { return *kernel_; }
  const ChannelTiming& timing() const { return timing_; }

  void on_qubit(Party p, QubitHandler h) { qubit_handlers_[p] = std::move(h); }
  void on_classical(Party p, ClassicalHandler h) { classical_handlers_[p] = std::move(h); }

  // Quantum taps are always active: a live qubit cannot be copied.
  void install_quantum_tap(Party from, Party to, QubitHandler h) {
    quantum_taps_[{from, to}] = std::move(h);
  }

  void install_classical_tap(ChannelKind channel, Party from, Party to, TapMode mode,
                             ClassicalHandler h) {
    if (channel != ChannelKind::classical && channel != ChannelKind::classical_aux)
      throw std::invalid_argument("install_classical_tap: not a classical channel");
    classical_taps_[{channel, from, to}] = ClassicalTap{mode, std::move(h)};
  }

  bool quantum_tapped(Party from, Party to) const { return quantum_taps_.contains({from, to}); }

  /// Returns the delivery tick: at + tau_q + propagation on an idle link.
  Tick send_quantum(Qubit&& q, Party from, Party to, Tick at) {
    if (q.spent()) throw QubitReuseError("send_quantum: qubit already spent");
    const Tick due = occupy({ChannelKind::quantum, from, to}, at, timing_.tau_q);
    const std::uint64_t id = next_flight_++;
    const std::uint64_t digest = qubit_digest(q);
    in_flight_.emplace(id, std::move(q));
    kernel_->schedule(due, to, "qdeliver", [this, id, from, to, due, digest] {
      auto node = in_flight_.extract(id);
      auto tap = quantum_taps_.find({from, to});
      const Party actor = tap != quantum_taps_.end() ? Party::eve : to;
      TranscriptRecord r;
      r.actor = actor;
      r.channel = ChannelKind::quantum;
      r.from = from;
      r.to = to;
      r.kind = RecordKind::deliver;
      r.payload_len = 1;
      r.digest = digest;
      kernel_->record(r);
      QubitDelivery d{std::move(node.mapped()), from, to, due};
      if (tap != quantum_taps_.end()) {
        tap->second(std::move(d));
      } else if (auto h = qubit_handlers_.find(to); h != qubit_handlers_.end()) {
        h->second(std::move(d));
      }
    });
    return due;
  }

  /// Returns the delivery tick: at + tau_c * bits + propagation on an idle
  /// link.
  Tick send_classical(ClassicalFrame frame, Party from, Party to, Tick at,
                      ChannelKind channel = ChannelKind::classical) {
    const Tick due = occupy({channel, from, to}, at, timing_.classical_serialization(frame.bits));
    kernel_->schedule(due, to, "cdeliver",
                      [this, frame = std::move(frame), channel, from, to, due] {
                        deliver_classical(frame, channel, from, to, due);
                      });
    return due;
  }

  // Terminal measurement with an audit record.
  Bit measure(Party who, Qubit& q, Basis basis, Rng& rng) {
    const std::uint64_t digest = qubit_digest(q);
    const Bit b = measure_qubit(q, basis, rng);
    record_measurement(who, digest);
    return b;
  }

  // For callers that measured through another path (eve_handle_qubit).
  void record_measurement(Party who, std::uint64_t digest) {
    TranscriptRecord r;
    r.actor = who;
    r.channel = ChannelKind::quantum;
    r.from = who;
    r.to = who;
    r.kind = RecordKind::measure;
    r.payload_len = 1;
    r.digest = digest;
    kernel_->record(r);
  }

  static std::uint64_t qubit_digest(const Qubit& q) {
    const std::uint8_t b = static_cast<std::uint8_t>((to_uint(q.encoded_bit()) << 1) |
                                                     static_cast<unsigned>(q.encoding_basis()));
    return fnv1a64(&b, 1);
  }

 private:
  struct ClassicalTap {
    TapMode mode;
    ClassicalHandler handler;
  };

  using Link = std::tuple<ChannelKind, Party, Party>;

  // A link serializes one item at a time, so a send waits for the previous
  // one to leave the sender. This keeps every link FIFO.
  Tick occupy(const Link& link, Tick at, Tick serialization) {
    Tick& free = link_free_[link];
    const Tick start = max(at, free);
    free = start + serialization;
    return free + timing_.propagation;
  }

  void deliver_classical(const ClassicalFrame& frame, ChannelKind channel, Party from, Party to,
                         Tick due) {
    auto tap = classical_taps_.find({channel, from, to});
    const bool active = tap != classical_taps_.end() && tap->second.mode == TapMode::active;
    TranscriptRecord r;
    r.actor = active ? Party::eve : to;
    r.channel = channel;
    r.from = from;
    r.to = to;
    r.kind = RecordKind::deliver;
    r.payload_len = frame.bytes.size();
    r.digest = frame.digest();
    r.slot = frame.slot;
    r.phase = frame.phase;
    kernel_->record(r);

    const ClassicalDelivery d{frame, channel, from, to, due};
    if (tap != classical_taps_.end() && tap->second.mode == TapMode::passive) {
      TranscriptRecord read = r;
      read.actor = Party::eve;
      read.kind = RecordKind::read;
      kernel_->record(read);
      tap->second.handler(d);
    }
    if (active) {
      tap->second.handler(d);
    } else if (auto h = classical_handlers_.find(to); h != classical_handlers_.end()) {
      h->second(d);
    }
  }

  Kernel* kernel_;
  ChannelTiming timing_;
  std::map<Party, QubitHandler> qubit_handlers_;
  std::map<Party, ClassicalHandler> classical_handlers_;
  std::map<std::pair<Party, Party>, QubitHandler> quantum_taps_;
  std::map<std::tuple<ChannelKind, Party, Party>, ClassicalTap> classical_taps_;
  std::map<Link, Tick> link_free_;
  std::map<std::uint64_t, Qubit> in_flight_;
  std::uint64_t next_flight_ = 0;
};

}  // namespace qmitm
