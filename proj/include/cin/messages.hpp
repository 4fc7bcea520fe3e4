#pragma once

#include <string>

#include "cin/dem.hpp"

namespace cin {

// Message text forms: a 0/1 string of exactly L bits, or a hex string whose
// value fits in L bits (most-significant bit first).
inline BitMessage parse_message(const std::string& text, int msg_len) {
  const bool binary =
      text.find_first_not_of("01") == std::string::npos &&
      static_cast<int>(text.size()) == msg_len;
  BitMessage bits(msg_len, 0);
  if (binary) {
    for (int i = 0; i < msg_len; ++i) bits[i] = text[i] == '1';
    return bits;
  }
  std::string hex = text;
  if (hex.rfind("0x", 0) == 0 || hex.rfind("0X", 0) == 0) hex = hex.substr(2);
  require(!hex.empty() && hex.find_first_not_of("0123456789abcdefABCDEF") ==
                              std::string::npos,
          "message '" + text + "' is neither " + std::to_string(msg_len) +
              " binary digits nor a hex string");
  // Hex nibbles to a bit string, then right-align into L bits.
  std::string all;
  all.reserve(hex.size() * 4);
  for (char c : hex) {
    const int v = c <= '9' ? c - '0' : (std::tolower(c) - 'a' + 10);
    for (int b = 3; b >= 0; --b) all.push_back((v >> b) & 1 ? '1' : '0');
  }
  const auto first_one = all.find('1');
  const size_t used = first_one == std::string::npos ? 0 : all.size() - first_one;
  require(used <= static_cast<size_t>(msg_len),
          "message '" + text + "' needs " + std::to_string(used) +
              " bits but the model carries " + std::to_string(msg_len));
  for (size_t i = 0; i < all.size(); ++i) {
    const size_t pos = msg_len - (all.size() - i);
    if (all[i] == '1') bits[pos] = 1;
  }
  return bits;
}

inline std::string message_to_hex(const BitMessage& bits) {
  const int L = static_cast<int>(bits.size());
  const int digits = (L + 3) / 4;
  std::string out(digits, '0');
  for (int i = 0; i < L; ++i) {
    if (!bits[i]) continue;
    const int bitpos = L - 1 - i;              // value of this bit
    const int digit = digits - 1 - bitpos / 4;
    const int v = out[digit] <= '9' ? out[digit] - '0'
                                    : out[digit] - 'a' + 10;
    const int nv = v | (1 << (bitpos % 4));
    out[digit] = nv < 10 ? static_cast<char>('0' + nv)
                         : static_cast<char>('a' + nv - 10);
  }
  return out;
}

inline std::string message_to_binary(const BitMessage& bits) {
  std::string out(bits.size(), '0');
  for (size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i] = '1';
  return out;
}

inline TensorF message_to_tensor(const BitMessage& bits) {
  ArrayX<float> a(static_cast<Index>(bits.size()));
  for (size_t i = 0; i < bits.size(); ++i) a[static_cast<Index>(i)] = bits[i];
  return TensorF::from_array({1, static_cast<Index>(bits.size())}, std::move(a),
                             false);
}

}  // namespace cin
