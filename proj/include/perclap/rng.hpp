#pragma once

#include <cstdint>

namespace perclap {

// Counter-based random stream: every draw is a pure function of
// (key, counter), so draws can be evaluated in any order or in parallel.
// The mixer is the SplitMix64 finalizer applied to a keyed counter,
// followed by a second round keyed by the first output.
namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// 64 random bits for position `counter` of the stream keyed by `key`.
constexpr std::uint64_t counter_bits(std::uint64_t key, std::uint64_t counter) noexcept {
  const std::uint64_t k = detail::mix64(key + detail::golden_gamma);
  const std::uint64_t first = detail::mix64(k ^ ((counter + 1) * detail::golden_gamma));
  return detail::mix64(first + k);
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return static_cast<double>(counter_bits(key, counter) >> 11) * 0x1.0p-53;
}

/// Positional child seed: stream `index` of `master`. Adding indices never
/// changes the seeds of existing ones.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return counter_bits(master ^ 0x5eed5eed5eed5eedULL, index);
}

}  // namespace perclap
