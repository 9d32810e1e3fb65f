#include "linked/util/hash.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

#include <openssl/evp.h>

namespace linked::util {

Digest sha256(std::string_view data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  const Digest d = sha256(data);
  std::string out;
  out.reserve(d.size() * 2);
  for (auto byte : d) {
    out.push_back(kHex[byte >> 4]);
    out.push_back(kHex[byte & 0xf]);
  }
  return out;
}

namespace {

std::uint64_t leading_u64(const Digest& d) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x = (x << 8) | d[i];
  return x;
}

}  // namespace

double unit_draw(std::string_view key) {
  return static_cast<double>(leading_u64(sha256(key)) >> 11) * 0x1.0p-53;
}

std::uint64_t bounded_draw(std::string_view key, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("bounded_draw: bound must be positive");
  // 64 random bits against small bounds: modulo bias is below 2^-50.
  return leading_u64(sha256(key)) % bound;
}

KeyBuilder& KeyBuilder::add(std::string_view part) {
  buf_ += std::to_string(part.size());
  buf_ += ':';
  buf_ += part;
  buf_ += ';';
  return *this;
}

KeyBuilder& KeyBuilder::add(std::int64_t value) { return add(std::string_view(std::to_string(value))); }

KeyBuilder& KeyBuilder::add(std::uint64_t value) { return add(std::string_view(std::to_string(value))); }

KeyBuilder& KeyBuilder::add(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return add(std::string_view(buf));
}

}  // namespace linked::util
