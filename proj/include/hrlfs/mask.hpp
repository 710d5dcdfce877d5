#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hrlfs/error.hpp"

namespace hrlfs {

// Feature-selection mask; mask[i] is true when feature i is selected.
using Mask = std::vector<bool>;

inline std::size_t popcount(const Mask& m) {
  std::size_t c = 0;
  for (bool b : m) c += b ? 1 : 0;
  return c;
}

// Hex encoding of the mask read as an unsigned integer whose bit i is
// feature i. Most significant digit first; ceil(n/4) digits.
inline std::string mask_to_hex(const Mask& m) {
  static constexpr char digits[] = "0123456789abcdef";
  const std::size_t n_digits = (m.size() + 3) / 4;
  std::string out(n_digits, '0');
  for (std::size_t d = 0; d < n_digits; ++d) {
    unsigned v = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      const std::size_t i = d * 4 + b;
      if (i < m.size() && m[i]) v |= 1u << b;
    }
    out[n_digits - 1 - d] = digits[v];
  }
  return out;
}

inline Mask mask_from_hex(const std::string& hex, std::size_t n) {
  if (hex.size() != (n + 3) / 4) throw InputError("mask hex \"" + hex + "\" has wrong length for " + std::to_string(n) + " features");
  Mask m(n, false);
  for (std::size_t d = 0; d < hex.size(); ++d) {
    const char c = hex[hex.size() - 1 - d];
    unsigned v = 0;
    if (c >= '0' && c <= '9') v = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f') v = static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v = static_cast<unsigned>(c - 'A' + 10);
    else throw InputError("invalid hex digit in mask");
    for (std::size_t b = 0; b < 4; ++b) {
      const std::size_t i = d * 4 + b;
      if (v & (1u << b)) {
        if (i >= n) throw InputError("mask hex sets a bit beyond the feature count");
        m[i] = true;
      }
    }
  }
  return m;
}

}  // namespace hrlfs
