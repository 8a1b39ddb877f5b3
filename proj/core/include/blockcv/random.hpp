#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace blockcv {

using Stream = std::mt19937_64;

/// What a substream is used for. Streams for different purposes never
/// share state, so e.g. fold clustering cannot perturb the data draws.
enum class StreamPurpose : std::uint64_t {
  covariates = 1,
  data = 2,
  folds = 3,
  retry = 4,
};

std::string_view to_string(StreamPurpose purpose);

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent substream keyed by (master seed, replication, purpose, lane).
/// Data and covariate streams depend only on (master, replication) so every
/// fold design sees the same dataset.
Stream derive_stream(std::uint64_t master_seed, std::uint64_t replication,
                     StreamPurpose purpose, std::uint64_t lane = 0);

} // namespace blockcv
