#pragma once

// Two-channel XOR split and the all-or-nothing packet cipher.
//
// aont_encrypt stream-ciphers [8-byte big-endian length][message] and splits
// the result into n XOR shares: n-1 uniform blocks plus one block that XORs
// them back to the ciphertext. Any n-1 shares are uniform and independent of
// the message, so nothing can be decoded until every packet is present.
//
// The keystream comes from the deterministic Rng keyed by the CipherKey. It
// is adequate for simulation only and is not a cryptographic cipher.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qmitm/core.hpp"

namespace qmitm {

struct CipherKey {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  auto operator<=>(const CipherKey&) const = default;

  static CipherKey random(Rng& rng) {
    const std::uint64_t hi = rng.next_u64();
    return CipherKey{hi, rng.next_u64()};
  }

  // First 128 bits of a key string; throws if the string is shorter.
  static CipherKey from_bits(const BitString& bits) {
    if (bits.size() < 128) throw std::invalid_argument("CipherKey::from_bits: need at least 128 bits");
    CipherKey k;
    for (std::size_t i = 0; i < 64; ++i) k.hi = (k.hi << 1) | to_uint(bits[i]);
    for (std::size_t i = 64; i < 128; ++i) k.lo = (k.lo << 1) | to_uint(bits[i]);
    return k;
  }

  Rng keystream() const { return Rng{Rng::mix(hi) ^ Rng::mix(lo + 0x632be59bd9b4e019ULL)}; }
};

inline void xor_into(Bytes& dst, const Bytes& src) {
  if (dst.size() != src.size()) throw std::invalid_argument("xor_into: length mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= src[i];
}

inline Bytes keystream_bytes(const CipherKey& key, std::size_t n) {
  Rng ks = key.keystream();
  return ks.bytes(n);
}

struct XorShares {
  BitString x;  // uniform pad
  BitString z;  // x XOR y
};

inline XorShares xor_split(const BitString& y, Rng& rng) {
  XorShares s{rng.bits(y.size()), BitString(y.size())};
  for (std::size_t i = 0; i < y.size(); ++i) s.z[i] = s.x[i] ^ y[i];
  return s;
}

inline BitString xor_recover(const BitString& x, const BitString& z) {
  if (x.size() != z.size()) throw std::invalid_argument("xor_recover: length mismatch");
  BitString y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] ^ z[i];
  return y;
}

inline constexpr std::size_t kLengthHeaderBytes = 8;
inline constexpr std::size_t kPacketHeaderBytes = 16;

struct Packet {
  std::uint32_t index = 0;  // 1-based
  std::uint32_t count = 0;
  Bytes block;

  bool operator==(const Packet&) const = default;
};

/// A full or partial set of packets from one encryption. `count` is the
/// declared total; `packets` holds whatever has arrived so far.
struct PacketSet {
  std::uint32_t count = 0;
  std::uint64_t plaintext_length = 0;
  std::vector<Packet> packets;

  std::size_t block_length() const { return plaintext_length + kLengthHeaderBytes; }
  bool complete() const;
};

class DecryptionImpossible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Decoded length header disagrees with the block size: wrong key, forged or
// misordered-share input.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedPacket : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool PacketSet::complete() const {
  if (count < 2 || packets.size() != count) return false;
  std::vector<bool> seen(count + 1, false);
  for (const auto& p : packets) {
    if (p.index < 1 || p.index > count || seen[p.index] || p.count != count) return false;
    if (p.block.size() != block_length()) return false;
    seen[p.index] = true;
  }
  return true;
}

inline PacketSet aont_encrypt(const Bytes& message, const CipherKey& key, std::uint32_t n,
                              Rng& rng) {
  if (n < 2) throw std::invalid_argument("aont_encrypt: packet count must be >= 2");
  if (message.empty()) throw std::invalid_argument("aont_encrypt: message must be non-empty");

  const std::size_t block = message.size() + kLengthHeaderBytes;
  Bytes last(block);
  const std::uint64_t len = message.size();
  for (std::size_t i = 0; i < kLengthHeaderBytes; ++i)
    last[i] = static_cast<std::uint8_t>(len >> (8 * (kLengthHeaderBytes - 1 - i)));
  std::copy(message.begin(), message.end(), last.begin() + kLengthHeaderBytes);
  xor_into(last, keystream_bytes(key, block));

  PacketSet set{n, len, {}};
  set.packets.reserve(n);
  for (std::uint32_t i = 1; i < n; ++i) {
    Bytes share = rng.bytes(block);
    xor_into(last, share);
    set.packets.push_back(Packet{i, n, std::move(share)});
  }
  set.packets.push_back(Packet{n, n, std::move(last)});
  return set;
}

inline Bytes aont_decrypt(const PacketSet& set, const CipherKey& key) {
  if (!set.complete())
    throw DecryptionImpossible("aont_decrypt: have " + std::to_string(set.packets.size()) + " of " +
                               std::to_string(set.count) + " packets");
  Bytes acc(set.block_length(), 0);
  for (const auto& p : set.packets) xor_into(acc, p.block);
  xor_into(acc, keystream_bytes(key, acc.size()));

  std::uint64_t len = 0;
  for (std::size_t i = 0; i < kLengthHeaderBytes; ++i) len = (len << 8) | acc[i];
  if (len != set.plaintext_length)
    throw IntegrityError("aont_decrypt: length header does not match block size");
  return Bytes(acc.begin() + kLengthHeaderBytes, acc.end());
}

// Wire format, all big-endian:
//   [4-byte index][4-byte count][8-byte block length][block bytes]
inline Bytes encode_packet(const Packet& p) {
  Bytes out;
  out.reserve(kPacketHeaderBytes + p.block.size());
  auto put = [&out](std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put(p.index, 4);
  put(p.count, 4);
  put(p.block.size(), 8);
  out.insert(out.end(), p.block.begin(), p.block.end());
  return out;
}

inline Packet decode_packet(const Bytes& wire) {
  if (wire.size() < kPacketHeaderBytes) throw MalformedPacket("decode_packet: short header");
  auto get = [&wire](std::size_t off, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | wire[off + static_cast<std::size_t>(i)];
    return v;
  };
  Packet p;
  p.index = static_cast<std::uint32_t>(get(0, 4));
  p.count = static_cast<std::uint32_t>(get(4, 4));
  const std::uint64_t len = get(8, 8);
  if (len != wire.size() - kPacketHeaderBytes)
    throw MalformedPacket("decode_packet: block length field disagrees with frame size");
  p.block.assign(wire.begin() + kPacketHeaderBytes, wire.end());
  return p;
}

inline std::size_t wire_size(std::size_t message_length) {
  return kPacketHeaderBytes + message_length + kLengthHeaderBytes;
}

}  // namespace qmitm
