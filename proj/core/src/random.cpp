#include "blockcv/random.hpp"

#include <array>

namespace blockcv {

std::string_view to_string(StreamPurpose purpose) {
  switch (purpose) {
  case StreamPurpose::covariates:
    return "covariates";
  case StreamPurpose::data:
    return "data";
  case StreamPurpose::folds:
    return "folds";
  case StreamPurpose::retry:
    return "retry";
  }
  return "unknown";
}

Stream derive_stream(std::uint64_t master_seed, std::uint64_t replication,
                     StreamPurpose purpose, std::uint64_t lane) {
  std::uint64_t key = mix64(master_seed);
  key = mix64(key ^ mix64(replication + 0x632be59bd9b4e019ULL));
  key = mix64(key ^ mix64(static_cast<std::uint64_t>(purpose) * 0x8cb92ba72f3d8dd7ULL));
  key = mix64(key ^ mix64(lane + 0xd1b54a32d192ed03ULL));

  std::array<std::uint32_t, 8> words{};
  std::uint64_t state = key;
  for (std::size_t i = 0; i < words.size(); i += 2) {
    const std::uint64_t v = mix64(state += 0x9e3779b97f4a7c15ULL);
    words[i] = static_cast<std::uint32_t>(v);
    words[i + 1] = static_cast<std::uint32_t>(v >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Stream(seq);
}

} // namespace blockcv
