#pragma once

// Two-channel XOR transfer: the pad x travels on one classical channel and
// z = x XOR y on another. Eve reads whichever channels she taps and guesses y.

#include <set>
#include <stdexcept>
#include <string>

#include "qmitm/channels.hpp"
#include "qmitm/ciphers.hpp"
#include "qmitm/kernel.hpp"

namespace qmitm {

enum class XorLane : std::uint8_t { x, z };

struct XorOutcome {
  BitString message;
  std::optional<BitString> bob_recovered;
  BitString eve_guess;
  double eve_accuracy = 0.0;
  Transcript transcript;
};

inline double bit_accuracy(const BitString& truth, const BitString& guess) {
  if (truth.size() != guess.size()) throw std::invalid_argument("bit_accuracy: length mismatch");
  if (truth.empty()) return 1.0;
  return 1.0 - static_cast<double>(hamming_distance(truth, guess)) / static_cast<double>(truth.size());
}

/// Eve's best guess: with both lanes she XORs them; with a single lane the
/// observed bits are independent of y, so she reports them as they are;
/// with none she guesses uniformly.
inline XorOutcome run_xor_dual_channel(std::size_t message_bits, const std::set<XorLane>& tapped,
                                       std::uint64_t seed, const ChannelTiming& timing) {
  const Rng base{seed};
  Rng alice_rng = base.split(streams::alice);
  Rng eve_rng = base.split(streams::eve);
  Rng msg_rng = base.split(streams::messages);

  Kernel kernel{ClockModel::perfect(), base.split(streams::clocks).seed()};
  Network net{kernel, timing};

  XorOutcome out;
  out.message = msg_rng.bits(message_bits);

  std::optional<BitString> bob_x, bob_z, eve_x, eve_z;
  net.on_classical(Party::bob, [&](const ClassicalDelivery& d) {
    (d.channel == ChannelKind::classical ? bob_x : bob_z) = d.frame.to_bits();
  });
  auto tap = [&](ChannelKind ch, std::optional<BitString>& slot) {
    net.install_classical_tap(ch, Party::alice, Party::bob, TapMode::passive,
                              [&slot](const ClassicalDelivery& d) { slot = d.frame.to_bits(); });
  };
  if (tapped.contains(XorLane::x)) tap(ChannelKind::classical, eve_x);
  if (tapped.contains(XorLane::z)) tap(ChannelKind::classical_aux, eve_z);

  kernel.schedule(Tick{0}, Party::alice, "xor-send", [&] {
    const XorShares s = xor_split(out.message, alice_rng);
    net.send_classical(ClassicalFrame::from_bits(s.x), Party::alice, Party::bob, Tick{0},
                       ChannelKind::classical);
    net.send_classical(ClassicalFrame::from_bits(s.z), Party::alice, Party::bob, Tick{0},
                       ChannelKind::classical_aux);
  });
  kernel.run_until_idle();

  if (bob_x && bob_z) out.bob_recovered = xor_recover(*bob_x, *bob_z);
  if (eve_x && eve_z) out.eve_guess = xor_recover(*eve_x, *eve_z);
  else if (eve_x) out.eve_guess = *eve_x;
  else if (eve_z) out.eve_guess = *eve_z;
  else out.eve_guess = eve_rng.bits(message_bits);
  out.eve_accuracy = bit_accuracy(out.message, out.eve_guess);
  out.transcript = kernel.transcript();
  return out;
}

}  // namespace qmitm
