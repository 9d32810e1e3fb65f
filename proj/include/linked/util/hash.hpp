#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace linked::util {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
std::string sha256_hex(std::string_view data);

// Maps a key to a uniform draw in [0, 1) using its SHA-256 digest. Stable
// across platforms and runs, so it can seed reproducible simulations.
double unit_draw(std::string_view key);

// Uniform integer in [0, bound) derived from `key`.
std::uint64_t bounded_draw(std::string_view key, std::uint64_t bound);

// Length-prefixed concatenation, so distinct part lists never collide.
class KeyBuilder {
 public:
  KeyBuilder& add(std::string_view part);
  KeyBuilder& add(std::int64_t value);
  KeyBuilder& add(int value) { return add(static_cast<std::int64_t>(value)); }
  KeyBuilder& add(std::uint64_t value);
  KeyBuilder& add(double value);
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

}  // namespace linked::util
