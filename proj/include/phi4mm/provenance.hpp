#pragma once

#include <cstdint>
#include <string_view>

#include <nlohmann/json.hpp>

namespace phi4mm {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical (key-sorted, compact) JSON form of a configuration.
inline std::uint64_t config_hash(const nlohmann::json& config) { return fnv1a(config.dump()); }

}  // namespace phi4mm
