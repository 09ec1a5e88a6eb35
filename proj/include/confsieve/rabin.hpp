#pragma once

// Rabin fingerprints over GF(2)[x] modulo a degree-64 irreducible polynomial.
//
// The polynomial is stored without its leading x^64 term. The fingerprint of
// a byte string m (first byte most significant) is m(x) * x^64 mod P, which
// is what the byte-at-a-time table method computes; it is a bijection on
// 64-bit strings, so uniform windows give uniform fingerprints.

#include <array>
#include <cstdint>

#include "confsieve/types.hpp"

namespace confsieve::rabin {

// First irreducible polynomial at or above the fractional hex digits of pi
// (0x243F6A8885A308D3), plus the implicit x^64 term.
inline constexpr std::uint64_t kDefaultPolynomial = 0x243F6A8885A30907ULL;

// a * x mod P
constexpr std::uint64_t mul_x(std::uint64_t a, std::uint64_t poly) noexcept {
  const bool carry = (a >> 63) != 0;
  a <<= 1;
  return carry ? a ^ poly : a;
}

// a * b mod P
constexpr std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t poly) noexcept {
  std::uint64_t r = 0;
  for (int bit = 63; bit >= 0; --bit) {
    r = mul_x(r, poly);
    if ((b >> bit) & 1) r ^= a;
  }
  return r;
}

// x^e mod P
constexpr std::uint64_t x_pow(std::uint64_t e, std::uint64_t poly) noexcept {
  std::uint64_t r = 1;
  for (std::uint64_t i = 0; i < e; ++i) r = mul_x(r, poly);
  return r;
}

class Tables {
 public:
  Tables(std::uint64_t poly, std::size_t window_bytes) : poly_(poly), window_(window_bytes) {
    const std::uint64_t x64 = mul_x(x_pow(63, poly), poly);
    const std::uint64_t out_shift = mul_mod(x64, x_pow(8 * window_bytes, poly), poly);
    for (std::uint64_t b = 0; b < 256; ++b) {
      push_[b] = mul_mod(b, x64, poly);
      pop_[b] = mul_mod(b, out_shift, poly);
    }
  }

  std::uint64_t polynomial() const noexcept { return poly_; }
  std::size_t window_bytes() const noexcept { return window_; }

  // Fingerprint after appending `in` to a string with fingerprint `fp`.
  std::uint64_t append(std::uint64_t fp, std::byte in) const noexcept {
    return (fp << 8) ^ push_[fp >> 56] ^ push_[static_cast<std::uint8_t>(in)];
  }

  // Slide a full window: append `in`, drop `out` (the oldest byte).
  std::uint64_t slide(std::uint64_t fp, std::byte out, std::byte in) const noexcept {
    return append(fp, in) ^ pop_[static_cast<std::uint8_t>(out)];
  }

  // Fingerprint of an arbitrary string from scratch.
  std::uint64_t fingerprint(ByteView data) const noexcept {
    std::uint64_t fp = 0;
    for (std::byte b : data) fp = append(fp, b);
    return fp;
  }

 private:
  std::uint64_t poly_;
  std::size_t window_;
  std::array<std::uint64_t, 256> push_{};
  std::array<std::uint64_t, 256> pop_{};
};

}  // namespace confsieve::rabin
