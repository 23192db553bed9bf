#pragma once

// Eve's strategy description and her per-qubit handling rule.
// Protocol-specific Eve actors live next to the protocols they attack
// (bb84.hpp, eve_interlock.hpp).

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "qmitm/core.hpp"

namespace qmitm {

enum class EveKind : std::uint8_t {
  absent,
  passive_classical,
  intercept_resend,
  mitm_copy,
  mitm_misinform,
  mitm_packet_delay,
};

constexpr std::string_view to_string(EveKind k) {
  switch (k) {
    case EveKind::absent: return "absent";
    case EveKind::passive_classical: return "passive_classical";
    case EveKind::intercept_resend: return "intercept_resend";
    case EveKind::mitm_copy: return "mitm_copy";
    case EveKind::mitm_misinform: return "mitm_misinform";
    case EveKind::mitm_packet_delay: return "mitm_packet_delay";
  }
  return "?";
}

inline EveKind eve_kind_from_string(std::string_view s) {
  for (EveKind k : {EveKind::absent, EveKind::passive_classical, EveKind::intercept_resend,
                    EveKind::mitm_copy, EveKind::mitm_misinform, EveKind::mitm_packet_delay})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown adversary kind '" + std::string(s) + "'");
}

constexpr bool is_mitm(EveKind k) {
  return k == EveKind::mitm_copy || k == EveKind::mitm_misinform ||
         k == EveKind::mitm_packet_delay;
}

struct EveStrategy {
  EveKind kind = EveKind::absent;
  Tick processing_delay{0};
  std::optional<Bytes> misinform_payload;

  static EveStrategy absent() { return {}; }
  static EveStrategy of(EveKind k, Tick delay = Tick{0}) { return {k, delay, std::nullopt}; }
  static EveStrategy misinform(Bytes payload, Tick delay = Tick{0}) {
    return {EveKind::mitm_misinform, delay, std::move(payload)};
  }

  void validate() const {
    if (processing_delay < Tick{0})
      throw std::invalid_argument("adversary: processing_delay must be >= 0");
    if ((kind == EveKind::mitm_misinform) != misinform_payload.has_value())
      throw std::invalid_argument("adversary: misinform_payload is required for, and only for, mitm_misinform");
    if (misinform_payload && misinform_payload->empty())
      throw std::invalid_argument("adversary: misinform_payload must be non-empty");
  }
};

struct QubitHandling {
  std::optional<Qubit> reemitted;
  Tick at;                    // re-emission time when reemitted
  std::optional<Bit> measured;
  std::optional<Basis> eve_basis;
};

/// What Eve does with a qubit captured at her quantum tap.
///  - intercept_resend: measure in a uniform basis, re-prepare the result in
///    that basis, emit after the processing delay.
///  - mitm_*: absorb at her fake-Bob endpoint (measure, no re-emission).
///  - passive_classical: impossible; a live qubit cannot be copied.
inline QubitHandling eve_handle_qubit(Qubit&& q, const EveStrategy& strategy, Rng& rng, Tick at) {
  if (q.spent()) throw QubitReuseError("eve_handle_qubit: qubit already spent");
  QubitHandling out;
  out.at = at;
  switch (strategy.kind) {
    case EveKind::absent:
      out.reemitted.emplace(std::move(q));
      return out;
    case EveKind::passive_classical:
      throw std::logic_error("eve_handle_qubit: a passive tap cannot copy a live qubit");
    case EveKind::intercept_resend: {
      const Basis b = rng.basis();
      const Bit m = measure_qubit(q, b, rng);
      out.measured = m;
      out.eve_basis = b;
      out.reemitted.emplace(prepare_qubit(m, b));
      out.at = at + strategy.processing_delay;
      return out;
    }
    case EveKind::mitm_copy:
    case EveKind::mitm_misinform:
    case EveKind::mitm_packet_delay: {
      const Basis b = rng.basis();
      out.measured = measure_qubit(q, b, rng);
      out.eve_basis = b;
      return out;
    }
  }
  return out;
}

}  // namespace qmitm
