#pragma once

// ueval/digest.hpp — SHA-256 content digests (hex), backed by OpenSSL.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ueval {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

// splitmix64 step; used to derive per-stage seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t state);

// Deterministic seed for a named stage/round under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t round);

}  // namespace ueval
