#pragma once

// One complete interlock run, optionally keyed by a preceding BB84 run.

#include <map>
#include <optional>
#include <stdexcept>

#include "qmitm/adversary.hpp"
#include "qmitm/bb84.hpp"
#include "qmitm/channels.hpp"
#include "qmitm/ciphers.hpp"
#include "qmitm/eve_interlock.hpp"
#include "qmitm/interlock.hpp"
#include "qmitm/kernel.hpp"

namespace qmitm {

/// Session keys held by each participant.
struct SessionKeys {
  CipherKey alice;
  CipherKey bob;
  EveInterlockKeys eve;

  // Keys from an unauthenticated exchange: a mitm Eve ends up with one key
  // per side; any other Eve learns nothing.
  static SessionKeys simulated_exchange(EveKind eve_kind, Rng rng) {
    SessionKeys k;
    k.alice = CipherKey::random(rng);
    if (is_mitm(eve_kind)) {
      k.bob = CipherKey::random(rng);
      k.eve = {k.alice, k.bob};
    } else {
      k.bob = k.alice;
    }
    return k;
  }

  // Keys taken from the first 128 bits of each side's final BB84 key. Eve
  // knows a side's key when her BB84 key matched that side's sifted key.
  static SessionKeys from_bb84(const Bb84Outcome& o) {
    if (o.final_alice.size() < 128 || o.final_bob.size() < 128)
      throw std::invalid_argument("session keys: BB84 run produced fewer than 128 final key bits");
    SessionKeys k;
    k.alice = CipherKey::from_bits(o.final_alice);
    k.bob = CipherKey::from_bits(o.final_bob);
    if (o.eve_key && *o.eve_key == o.sifted_alice) k.eve.alice_side = k.alice;
    if (o.eve_key && *o.eve_key == o.sifted_bob) k.eve.bob_side = k.bob;
    return k;
  }
};

struct InterlockOutcome {
  InterlockConfig config;
  Bytes alice_sent;  // plaintexts as encrypted, tokens included
  Bytes bob_sent;
  std::optional<Bytes> alice_received;
  std::optional<Bytes> bob_received;
  ReceptionStatus alice_status = ReceptionStatus::pending;
  ReceptionStatus bob_status = ReceptionStatus::pending;
  std::map<Party, PhaseMarks> phase_timestamps;
  std::map<Party, PacketSet> outbound;  // what each party encrypted
  std::map<Party, PacketSet> inbound;   // what each party collected
  std::optional<AuthToken> alice_token;
  std::optional<AuthToken> bob_token;
  EveInterlockReport eve;
  Transcript transcript;
};

inline InterlockOutcome run_interlock(const Bytes& alice_msg, const Bytes& bob_msg,
                                      const InterlockConfig& cfg, const EveStrategy& adversary,
                                      const ChannelTiming& timing, std::uint64_t seed,
                                      std::optional<SessionKeys> keys = std::nullopt) {
  if (alice_msg.empty() || bob_msg.empty())
    throw std::invalid_argument("run_interlock: both messages must be non-empty");
  adversary.validate();
  timing.validate();

  const Rng base{seed};
  InterlockOutcome out;
  out.config = cfg;
  out.alice_sent = alice_msg;
  out.bob_sent = bob_msg;
  if (cfg.authentication_enabled) {
    const std::uint64_t secret = base.split(streams::keys).split(1).seed();
    out.alice_token = auth_token(secret, Party::alice);
    out.bob_token = auth_token(secret, Party::bob);
    out.alice_sent = with_token(*out.alice_token, alice_msg);
    out.bob_sent = with_token(*out.bob_token, bob_msg);
  }
  cfg.validate(timing, std::max(out.alice_sent.size(), out.bob_sent.size()));
  if (adversary.misinform_payload)
    cfg.validate(timing, adversary.misinform_payload->size());

  const SessionKeys k = keys ? *keys : SessionKeys::simulated_exchange(adversary.kind, base.split(streams::keys));

  Kernel kernel{cfg.clock_sync, base.split(streams::clocks).seed()};
  Network net{kernel, timing};
  InterlockParty alice{Party::alice, net, out.config, out.alice_sent, k.alice, base.split(streams::alice)};
  InterlockParty bob{Party::bob, net, out.config, out.bob_sent, k.bob, base.split(streams::bob)};
  EveInterlock eve{net, out.config, adversary, k.eve, out.alice_sent.size(), out.bob_sent.size(),
                   base.split(streams::eve)};

  net.on_classical(Party::alice, [&alice](const ClassicalDelivery& d) { alice.on_classical(d); });
  net.on_classical(Party::bob, [&bob](const ClassicalDelivery& d) { bob.on_classical(d); });
  alice.start();
  bob.start();
  eve.install();
  kernel.run_until_idle();

  out.alice_received = alice.received();
  out.bob_received = bob.received();
  out.alice_status = alice.status();
  out.bob_status = bob.status();
  out.phase_timestamps[Party::alice] = alice.phases();
  out.phase_timestamps[Party::bob] = bob.phases();
  out.outbound[Party::alice] = alice.outbound();
  out.outbound[Party::bob] = bob.outbound();
  out.inbound[Party::alice] = alice.inbound();
  out.inbound[Party::bob] = bob.inbound();
  out.eve = eve.report();
  out.transcript = kernel.transcript();
  return out;
}

}  // namespace qmitm
