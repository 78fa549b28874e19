#pragma once

#include <cstdint>
#include <random>

namespace rpsc {

// Keyed random streams. A stream is a pure function of (seed, stream id), so
// the draws of one stream never depend on how many other streams exist or in
// which order they are consumed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

}  // namespace rpsc
