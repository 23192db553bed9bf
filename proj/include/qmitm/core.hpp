#pragma once

// Bits, bases, qubits, virtual time and the deterministic random source.
//
// Qubits are classical records with measure-once discipline: matched-basis
// measurement returns the encoded bit, mismatched-basis measurement returns a
// uniform bit. A Qubit is move-only, so no code path can produce two live
// carriers from one.

#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qmitm {

enum class Bit : std::uint8_t { zero = 0, one = 1 };

constexpr Bit operator^(Bit a, Bit b) noexcept {
  return static_cast<Bit>(static_cast<std::uint8_t>(a) ^ static_cast<std::uint8_t>(b));
}

constexpr Bit to_bit(unsigned v) noexcept { return (v & 1u) ? Bit::one : Bit::zero; }
constexpr unsigned to_uint(Bit b) noexcept { return static_cast<unsigned>(b); }

enum class Basis : std::uint8_t { rectilinear = 0, diagonal = 1 };

constexpr Basis conjugate(Basis b) noexcept {
  return b == Basis::rectilinear ? Basis::diagonal : Basis::rectilinear;
}

using BitString = std::vector<Bit>;
using BasisString = std::vector<Basis>;
using Bytes = std::vector<std::uint8_t>;

// "0101" <-> BitString. Any character other than '0'/'1' is rejected.
inline BitString bits_from_string(std::string_view s) {
  BitString out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw std::invalid_argument("bit string may only contain 0 and 1");
    out.push_back(c == '1' ? Bit::one : Bit::zero);
  }
  return out;
}

inline std::string to_string(const BitString& bits) {
  std::string out;
  out.reserve(bits.size());
  for (Bit b : bits) out.push_back(b == Bit::one ? '1' : '0');
  return out;
}

// "RD" <-> BasisString (R = rectilinear, D = diagonal).
inline BasisString bases_from_string(std::string_view s) {
  BasisString out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == 'R') out.push_back(Basis::rectilinear);
    else if (c == 'D') out.push_back(Basis::diagonal);
    else throw std::invalid_argument("basis string may only contain R and D");
  }
  return out;
}

inline std::size_t hamming_distance(const BitString& a, const BitString& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
  return d;
}

/// Virtual time in integer ticks. Global kernel time never goes below zero;
/// a party's local reading is global time plus its clock offset.
struct Tick {
  std::int64_t value = 0;

  constexpr Tick() = default;
  constexpr explicit Tick(std::int64_t v) : value(v) {}

  constexpr auto operator<=>(const Tick&) const = default;

  constexpr Tick& operator+=(Tick o) { value += o.value; return *this; }
  constexpr Tick& operator-=(Tick o) { value -= o.value; return *this; }
  friend constexpr Tick operator+(Tick a, Tick b) { return Tick{a.value + b.value}; }
  friend constexpr Tick operator-(Tick a, Tick b) { return Tick{a.value - b.value}; }
  friend constexpr Tick operator*(Tick a, std::int64_t k) { return Tick{a.value * k}; }
  friend constexpr Tick operator*(std::int64_t k, Tick a) { return Tick{a.value * k}; }
};

constexpr Tick max(Tick a, Tick b) { return a < b ? b : a; }

/// Counter-based generator: output i is splitmix64(seed + i * gamma).
/// Streams derived with split() are independent of each other's draw counts,
/// so adding an actor never shifts another actor's randomness.
class Rng {
 public:
  constexpr explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  constexpr std::uint64_t seed() const { return seed_; }
  constexpr std::uint64_t counter() const { return counter_; }

  constexpr std::uint64_t next_u64() { return mix(seed_ + (++counter_) * kGamma); }

  // Unbiased integer in [0, bound) by rejection.
  constexpr std::uint64_t uniform(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::uniform: bound must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  // Uniform integer in the closed range [lo, hi].
  constexpr std::int64_t uniform_range(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("Rng::uniform_range: empty range");
    return lo + static_cast<std::int64_t>(uniform(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform double in [0, 1) from the top 53 bits.
  constexpr double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  constexpr Bit bit() { return to_bit(static_cast<unsigned>(next_u64() >> 63)); }
  constexpr Basis basis() { return (next_u64() >> 63) ? Basis::diagonal : Basis::rectilinear; }
  constexpr std::uint8_t byte() { return static_cast<std::uint8_t>(next_u64() >> 56); }

  BitString bits(std::size_t n) {
    BitString out(n);
    for (auto& b : out) b = bit();
    return out;
  }
  BasisString bases(std::size_t n) {
    BasisString out(n);
    for (auto& b : out) b = basis();
    return out;
  }
  Bytes bytes(std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = byte();
    return out;
  }

  // Child stream keyed by (this seed, stream id); does not advance this stream.
  constexpr Rng split(std::uint64_t stream) const {
    return Rng{mix(seed_ ^ mix(stream * kGamma + 0x5851f42d4c957f2dULL))};
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Raised when a qubit is measured or sent after it has been spent.
class QubitReuseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Qubit {
 public:
  Qubit(Bit bit, Basis basis) : bit_(bit), basis_(basis) {}

  Qubit(const Qubit&) = delete;
  Qubit& operator=(const Qubit&) = delete;

  // Moving transfers the carrier; the source is left spent.
  Qubit(Qubit&& other) noexcept
      : bit_(other.bit_), basis_(other.basis_), spent_(std::exchange(other.spent_, true)) {}
  Qubit& operator=(Qubit&& other) noexcept {
    bit_ = other.bit_;
    basis_ = other.basis_;
    spent_ = std::exchange(other.spent_, true);
    return *this;
  }

  bool spent() const { return spent_; }
  bool live() const { return !spent_; }

  // Simulator-side introspection for tests and transcript digests. Protocol
  // actors never call these.
  Bit encoded_bit() const { return bit_; }
  Basis encoding_basis() const { return basis_; }

  friend Bit measure_qubit(Qubit& q, Basis basis, Rng& rng);

 private:
  Bit bit_;
  Basis basis_;
  bool spent_ = false;
};

inline Qubit prepare_qubit(Bit bit, Basis basis) { return Qubit{bit, basis}; }

/// Matched basis returns the encoded bit without touching rng; mismatched
/// basis draws a uniform bit. The qubit is spent either way.
inline Bit measure_qubit(Qubit& q, Basis basis, Rng& rng) {
  if (q.spent_) throw QubitReuseError("measure_qubit: qubit already spent");
  q.spent_ = true;
  if (basis == q.basis_) return q.bit_;
  return rng.bit();
}

enum class Party : std::uint8_t { alice = 0, bob = 1, eve = 2 };

constexpr std::string_view to_string(Party p) {
  switch (p) {
    case Party::alice: return "alice";
    case Party::bob: return "bob";
    case Party::eve: return "eve";
  }
  return "?";
}

constexpr Party counterpart(Party p) { return p == Party::alice ? Party::bob : Party::alice; }

// Stream ids used to split a run seed into per-actor generators.
namespace streams {
inline constexpr std::uint64_t alice = 1;
inline constexpr std::uint64_t bob = 2;
inline constexpr std::uint64_t eve = 3;
inline constexpr std::uint64_t clocks = 4;
inline constexpr std::uint64_t keys = 5;
inline constexpr std::uint64_t messages = 6;

constexpr std::uint64_t of(Party p) {
  switch (p) {
    case Party::alice: return alice;
    case Party::bob: return bob;
    case Party::eve: return eve;
  }
  return 0;
}
}  // namespace streams

// 64-bit FNV-1a; used as the payload fingerprint in transcripts.
inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}
inline std::uint64_t fnv1a64(const Bytes& b) { return fnv1a64(b.data(), b.size()); }

inline std::string hex16(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace qmitm
