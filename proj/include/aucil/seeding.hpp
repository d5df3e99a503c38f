#pragma once

#include <cstdint>

namespace aucil {

// splitmix64 mixer. Used for deriving independent sub-seeds so that
// per-class and per-restart RNG streams do not depend on execution order.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return mix64(base ^ mix64(salt));
}

// Stable per-class fit seed: global seed XOR a mixed class id, so training
// order and thread schedule cannot influence any class model.
inline std::uint64_t class_seed(std::uint64_t global_seed, int class_id) {
  return global_seed ^ mix64(static_cast<std::uint64_t>(class_id));
}

}  // namespace aucil
