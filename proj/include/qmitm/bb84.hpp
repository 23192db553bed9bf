#pragma once

// BB84 key establishment: Alice and Bob endpoints, sifting, sampled QBER
// estimation, and Eve's attacks on key generation.
//
// Message flow (batch sifting):
//   1. Alice emits n qubits back to back, one every tau_q.
//   2. Each side announces its bases once its quantum phase is over.
//   3. Each side sifts on receipt of the other's announcement.
//   4. Alice discloses a random sample of her sifted bits; Bob replies with
//      his bits at the same positions. Disclosed positions leave the key.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qmitm/adversary.hpp"
#include "qmitm/channels.hpp"
#include "qmitm/core.hpp"
#include "qmitm/kernel.hpp"

namespace qmitm {

/// Positions where the two basis strings agree, ascending.
inline std::vector<std::size_t> sift(const BasisString& a, const BasisString& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sift: basis strings differ in length");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i]) out.push_back(i);
  return out;
}

inline BitString select(const BitString& bits, const std::vector<std::size_t>& positions) {
  BitString out;
  out.reserve(positions.size());
  for (std::size_t i : positions) out.push_back(bits.at(i));
  return out;
}

/// ceil(fraction * n) distinct positions in [0, n), ascending, drawn by a
/// partial Fisher-Yates shuffle.
inline std::vector<std::size_t> sample_positions(std::size_t n, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("sample_positions: fraction must be in (0, 1]");
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct QberEstimate {
  double qber = 0.0;
  std::vector<std::size_t> positions;  // disclosed
  std::vector<bool> disclosed;         // mask over the key
};

inline QberEstimate estimate_qber(const BitString& key_a, const BitString& key_b,
                                  double sample_fraction, Rng& rng) {
  if (key_a.size() != key_b.size()) throw std::invalid_argument("estimate_qber: length mismatch");
  if (key_a.empty()) throw std::invalid_argument("estimate_qber: empty keys");
  QberEstimate e;
  e.positions = sample_positions(key_a.size(), sample_fraction, rng);
  e.disclosed.assign(key_a.size(), false);
  std::size_t errors = 0;
  for (std::size_t i : e.positions) {
    e.disclosed[i] = true;
    errors += (key_a[i] != key_b[i]);
  }
  e.qber = static_cast<double>(errors) / static_cast<double>(e.positions.size());
  return e;
}

inline BitString drop_disclosed(const BitString& key, const std::vector<bool>& disclosed) {
  BitString out;
  for (std::size_t i = 0; i < key.size(); ++i)
    if (!disclosed[i]) out.push_back(key[i]);
  return out;
}

struct Bb84Outcome {
  std::size_t n_qubits = 0;
  BitString sifted_alice;
  BitString sifted_bob;
  double sift_rate = 0.0;
  double qber = 0.0;  // Hamming(sifted_alice, sifted_bob) / length
  std::optional<BitString> eve_key;
  std::optional<double> estimated_qber;  // what the sampled check reported
  BitString final_alice;                 // sifted minus disclosed sample
  BitString final_bob;
  Transcript transcript;
};

struct Bb84Options {
  double sample_fraction = 0.1;
  ClockModel clocks = {};
};

namespace bb84_wire {

enum class Type : std::uint8_t { bases = 1, sample = 2, sample_reply = 3 };

inline void put_bits(Bytes& out, const BitString& bits) {
  const ClassicalFrame f = ClassicalFrame::from_bits(bits);
  out.insert(out.end(), f.bytes.begin(), f.bytes.end());
}

inline BitString get_bits(const Bytes& in, std::size_t offset, std::size_t n) {
  BitString out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = to_bit((in.at(offset + i / 8) >> (7 - i % 8)) & 1u);
  return out;
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const Bytes& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | in.at(offset + i);
  return v;
}

// [type][u32 count][packed bases]
inline ClassicalFrame bases(const BasisString& b) {
  BitString as_bits(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) as_bits[i] = to_bit(static_cast<unsigned>(b[i]));
  Bytes out{static_cast<std::uint8_t>(Type::bases)};
  put_u32(out, static_cast<std::uint32_t>(b.size()));
  put_bits(out, as_bits);
  ClassicalFrame f;
  f.bits = 8 + 32 + b.size();
  f.bytes = std::move(out);
  return f;
}

inline BasisString parse_bases(const Bytes& in) {
  const std::size_t n = get_u32(in, 1);
  const BitString bits = get_bits(in, 5, n);
  BasisString out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = bits[i] == Bit::one ? Basis::diagonal : Basis::rectilinear;
  return out;
}

// [type][u32 count][count x u32 position][packed bits]
inline ClassicalFrame sample(const std::vector<std::size_t>& positions, const BitString& bits) {
  Bytes out{static_cast<std::uint8_t>(Type::sample)};
  put_u32(out, static_cast<std::uint32_t>(positions.size()));
  for (std::size_t p : positions) put_u32(out, static_cast<std::uint32_t>(p));
  put_bits(out, bits);
  ClassicalFrame f;
  f.bits = 8 + 32 + 32 * positions.size() + bits.size();
  f.bytes = std::move(out);
  return f;
}

struct Sample {
  std::vector<std::size_t> positions;
  BitString bits;
};

inline Sample parse_sample(const Bytes& in) {
  const std::size_t n = get_u32(in, 1);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) s.positions.push_back(get_u32(in, 5 + 4 * i));
  s.bits = get_bits(in, 5 + 4 * n, n);
  return s;
}

// [type][u32 count][packed bits]
inline ClassicalFrame sample_reply(const BitString& bits) {
  Bytes out{static_cast<std::uint8_t>(Type::sample_reply)};
  put_u32(out, static_cast<std::uint32_t>(bits.size()));
  put_bits(out, bits);
  ClassicalFrame f;
  f.bits = 8 + 32 + bits.size();
  f.bytes = std::move(out);
  return f;
}

inline BitString parse_sample_reply(const Bytes& in) { return get_bits(in, 5, get_u32(in, 1)); }

inline Type type_of(const Bytes& in) {
  if (in.empty()) throw std::invalid_argument("bb84 message: empty frame");
  return static_cast<Type>(in[0]);
}

}  // namespace bb84_wire

/// Legitimate endpoint. The peer is always the counterpart party; whether an
/// announcement really came from it is exactly what the protocol cannot tell.
class Bb84Endpoint {
 public:
  Bb84Endpoint(Party self, Network& net, std::size_t n, double sample_fraction, Rng rng)
      : self_(self), net_(&net), n_(n), sample_fraction_(sample_fraction), rng_(rng) {
    bases_ = rng_.bases(n);
    if (self_ == Party::alice) bits_ = rng_.bits(n);
    else bits_.assign(n, Bit::zero);
  }

  Party self() const { return self_; }
  const BasisString& bases() const { return bases_; }
  const BitString& raw_bits() const { return bits_; }
  const BitString& sifted() const { return sifted_; }
  const BitString& final_key() const { return final_key_; }
  std::optional<double> estimated_qber() const { return estimated_qber_; }
  std::size_t received() const { return received_; }

  // Alice only: schedule the qubit train and the basis announcement.
  void start() {
    if (self_ != Party::alice) throw std::logic_error("Bb84Endpoint::start: only Alice transmits");
    Kernel& k = net_->kernel();
    const Tick tau_q = net_->timing().tau_q;
    for (std::size_t i = 0; i < n_; ++i) {
      const Tick at = tau_q * static_cast<std::int64_t>(i);
      k.schedule(at, self_, "emit", [this, i, at] {
        net_->send_quantum(prepare_qubit(bits_[i], bases_[i]), self_, Party::bob, at);
      });
    }
    const Tick done = tau_q * static_cast<std::int64_t>(n_);
    k.schedule(done, self_, "announce", [this] { announce(); });
  }

  // Bob only.
  void on_qubit(QubitDelivery&& d) {
    if (received_ >= n_) throw std::logic_error("Bb84Endpoint: more qubits than expected");
    bits_[received_] = net_->measure(self_, d.qubit, bases_[received_], rng_);
    if (++received_ == n_) announce();
  }

  void on_classical(const ClassicalDelivery& d) {
    switch (bb84_wire::type_of(d.frame.bytes)) {
      case bb84_wire::Type::bases: {
        const BasisString peer = bb84_wire::parse_bases(d.frame.bytes);
        kept_ = sift(bases_, peer);
        sifted_ = select(bits_, kept_);
        sifted_done_ = true;
        if (self_ == Party::alice) disclose_sample();
        break;
      }
      case bb84_wire::Type::sample: {
        if (!sifted_done_) throw std::logic_error("Bb84Endpoint: sample before sifting");
        const auto s = bb84_wire::parse_sample(d.frame.bytes);
        BitString mine;
        std::size_t errors = 0;
        disclosed_.assign(sifted_.size(), false);
        for (std::size_t i = 0; i < s.positions.size(); ++i) {
          const std::size_t p = s.positions[i];
          if (p >= sifted_.size()) throw std::out_of_range("Bb84Endpoint: sample position past key");
          mine.push_back(sifted_[p]);
          errors += (sifted_[p] != s.bits[i]);
          disclosed_[p] = true;
        }
        finish(s.positions.empty() ? 0.0 : static_cast<double>(errors) / s.positions.size());
        net_->send_classical(bb84_wire::sample_reply(mine), self_, counterpart(self_),
                             net_->kernel().now());
        break;
      }
      case bb84_wire::Type::sample_reply: {
        const BitString theirs = bb84_wire::parse_sample_reply(d.frame.bytes);
        std::size_t errors = 0;
        for (std::size_t i = 0; i < sample_.size(); ++i) errors += (sifted_[sample_[i]] != theirs.at(i));
        finish(sample_.empty() ? 0.0 : static_cast<double>(errors) / sample_.size());
        break;
      }
    }
  }

 private:
  void announce() {
    net_->send_classical(bb84_wire::bases(bases_), self_, counterpart(self_), net_->kernel().now());
  }

  void disclose_sample() {
    disclosed_.assign(sifted_.size(), false);
    if (sifted_.empty()) {
      finish(0.0);
      return;
    }
    sample_ = sample_positions(sifted_.size(), sample_fraction_, rng_);
    for (std::size_t p : sample_) disclosed_[p] = true;
    net_->send_classical(bb84_wire::sample(sample_, select(sifted_, sample_)), self_,
                         counterpart(self_), net_->kernel().now());
  }

  void finish(double estimate) {
    estimated_qber_ = estimate;
    final_key_ = drop_disclosed(sifted_, disclosed_);
  }

  Party self_;
  Network* net_;
  std::size_t n_;
  double sample_fraction_;
  Rng rng_;
  BasisString bases_;
  BitString bits_;
  std::size_t received_ = 0;
  std::vector<std::size_t> kept_;
  BitString sifted_;
  bool sifted_done_ = false;
  std::vector<std::size_t> sample_;
  std::vector<bool> disclosed_;
  BitString final_key_;
  std::optional<double> estimated_qber_;
};

/// Eve against key generation. intercept_resend sits on the quantum link
/// only. The mitm kinds run a fake-Bob session with Alice and a fake-Alice
/// session with Bob concurrently, and steer both basis announcements so that
/// each side keeps exactly the positions where all three bases line up.
class EveBb84 {
 public:
  EveBb84(Network& net, EveStrategy strategy, std::size_t n, Rng rng)
      : net_(&net), strategy_(std::move(strategy)), n_(n), rng_(rng) {
    if (is_mitm(strategy_.kind)) {
      measured_.assign(n, Bit::zero);
      eve_bases_.assign(n, Basis::rectilinear);
      bob_side_bases_ = rng_.bases(n);
    }
  }

  void install() {
    switch (strategy_.kind) {
      case EveKind::absent: return;
      case EveKind::passive_classical:
        for (auto [from, to] : {std::pair{Party::alice, Party::bob}, std::pair{Party::bob, Party::alice}})
          net_->install_classical_tap(ChannelKind::classical, from, to, TapMode::passive,
                                      [this](const ClassicalDelivery& d) { observe(d); });
        return;
      case EveKind::intercept_resend:
        net_->install_quantum_tap(Party::alice, Party::bob,
                                  [this](QubitDelivery&& d) { intercept(std::move(d)); });
        return;
      case EveKind::mitm_copy:
      case EveKind::mitm_misinform:
      case EveKind::mitm_packet_delay:
        net_->install_quantum_tap(Party::alice, Party::bob,
                                  [this](QubitDelivery&& d) { absorb(std::move(d)); });
        for (auto [from, to] : {std::pair{Party::alice, Party::bob}, std::pair{Party::bob, Party::alice}})
          net_->install_classical_tap(ChannelKind::classical, from, to, TapMode::active,
                                      [this](const ClassicalDelivery& d) { relay(d); });
        return;
    }
  }

  const std::optional<BitString>& key() const { return key_; }
  std::size_t absorbed() const { return absorbed_; }
  const std::vector<BasisString>& observed_announcements() const { return observed_; }

 private:
  void observe(const ClassicalDelivery& d) {
    if (bb84_wire::type_of(d.frame.bytes) == bb84_wire::Type::bases)
      observed_.push_back(bb84_wire::parse_bases(d.frame.bytes));
  }

  void intercept(QubitDelivery&& d) {
    const std::uint64_t digest = Network::qubit_digest(d.qubit);
    QubitHandling h = eve_handle_qubit(std::move(d.qubit), strategy_, rng_, d.at);
    net_->record_measurement(Party::eve, digest);
    Kernel& k = net_->kernel();
    auto q = std::make_shared<Qubit>(std::move(*h.reemitted));
    k.schedule(h.at, Party::eve, "resend",
               [this, q, at = h.at] { net_->send_quantum(std::move(*q), Party::eve, Party::bob, at); });
  }

  void absorb(QubitDelivery&& d) {
    if (absorbed_ >= n_) throw std::logic_error("EveBb84: more qubits than expected");
    const std::size_t i = absorbed_++;
    const std::uint64_t digest = Network::qubit_digest(d.qubit);
    QubitHandling h = eve_handle_qubit(std::move(d.qubit), strategy_, rng_, d.at);
    net_->record_measurement(Party::eve, digest);
    measured_[i] = *h.measured;
    eve_bases_[i] = *h.eve_basis;
    // Fake-Alice session: a fresh qubit for Bob carrying the measured bit in
    // an independently chosen basis.
    const Tick at = d.at + strategy_.processing_delay;
    net_->kernel().schedule(at, Party::eve, "fake-alice-emit", [this, i, at] {
      net_->send_quantum(prepare_qubit(measured_[i], bob_side_bases_[i]), Party::eve, Party::bob, at);
    });
  }

  void relay(const ClassicalDelivery& d) {
    const Tick at = d.at + strategy_.processing_delay;
    switch (bb84_wire::type_of(d.frame.bytes)) {
      case bb84_wire::Type::bases:
        (d.from == Party::alice ? alice_bases_ : bob_bases_) = bb84_wire::parse_bases(d.frame.bytes);
        if (alice_bases_ && bob_bases_) steer(at);
        break;
      case bb84_wire::Type::sample:
      case bb84_wire::Type::sample_reply:
        net_->send_classical(d.frame, Party::eve, d.to, at);
        break;
    }
  }

  void steer(Tick at) {
    const BasisString& a = *alice_bases_;
    const BasisString& b = *bob_bases_;
    BasisString to_alice(n_), to_bob(n_);
    BitString key;
    for (std::size_t i = 0; i < n_; ++i) {
      const bool keep = a[i] == eve_bases_[i] && bob_side_bases_[i] == b[i];
      to_alice[i] = keep ? a[i] : conjugate(a[i]);
      to_bob[i] = keep ? b[i] : conjugate(b[i]);
      if (keep) key.push_back(measured_[i]);
    }
    key_ = std::move(key);
    net_->send_classical(bb84_wire::bases(to_alice), Party::eve, Party::alice, at);
    net_->send_classical(bb84_wire::bases(to_bob), Party::eve, Party::bob, at);
  }

  Network* net_;
  EveStrategy strategy_;
  std::size_t n_;
  Rng rng_;
  std::size_t absorbed_ = 0;
  BitString measured_;
  BasisString eve_bases_;
  BasisString bob_side_bases_;
  std::optional<BasisString> alice_bases_;
  std::optional<BasisString> bob_bases_;
  std::optional<BitString> key_;
  std::vector<BasisString> observed_;
};

inline Bb84Outcome run_bb84(std::size_t n_qubits, const EveStrategy& adversary, std::uint64_t seed,
                            const ChannelTiming& timing, const Bb84Options& options = {}) {
  if (n_qubits < 1) throw std::invalid_argument("run_bb84: n_qubits must be >= 1");
  adversary.validate();
  const Rng base{seed};
  Kernel kernel{options.clocks, base.split(streams::clocks).seed()};
  Network net{kernel, timing};

  Bb84Endpoint alice{Party::alice, net, n_qubits, options.sample_fraction, base.split(streams::alice)};
  Bb84Endpoint bob{Party::bob, net, n_qubits, options.sample_fraction, base.split(streams::bob)};
  EveBb84 eve{net, adversary, n_qubits, base.split(streams::eve)};

  net.on_qubit(Party::bob, [&bob](QubitDelivery&& d) { bob.on_qubit(std::move(d)); });
  net.on_classical(Party::alice, [&alice](const ClassicalDelivery& d) { alice.on_classical(d); });
  net.on_classical(Party::bob, [&bob](const ClassicalDelivery& d) { bob.on_classical(d); });
  eve.install();

  alice.start();
  kernel.run_until_idle();

  Bb84Outcome out;
  out.n_qubits = n_qubits;
  out.sifted_alice = alice.sifted();
  out.sifted_bob = bob.sifted();
  if (out.sifted_alice.size() != out.sifted_bob.size())
    throw std::logic_error("run_bb84: sifted keys differ in length");
  out.sift_rate = static_cast<double>(out.sifted_alice.size()) / static_cast<double>(n_qubits);
  out.qber = out.sifted_alice.empty()
                 ? 0.0
                 : static_cast<double>(hamming_distance(out.sifted_alice, out.sifted_bob)) /
                       static_cast<double>(out.sifted_alice.size());
  out.eve_key = eve.key();
  out.estimated_qber = bob.estimated_qber();
  out.final_alice = alice.final_key();
  out.final_bob = bob.final_key();
  out.transcript = kernel.transcript();
  return out;
}

}  // namespace qmitm
