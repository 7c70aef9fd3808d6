#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace cocoa {

/// FNV-1a, 64-bit. Used for dataset/parameter fingerprints.
struct Fnv1a {
  std::uint64_t state = 0xcbf29ce484222325ULL;

  void update(const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
      state ^= p[i];
      state *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update(std::span<const double> xs) { update(xs.data(), xs.size() * sizeof(double)); }
  template <typename T>
  void update_value(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    update(&v, sizeof(T));
  }
  std::uint64_t digest() const { return state; }
};

}  // namespace cocoa
