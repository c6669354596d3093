#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace feddr {

// ---------------------------------------------------------------------------
// Error taxonomy. Exit-code mapping for the CLI: config 2, protocol 3,
// numeric 4 (see tools/).
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : ConfigError {
    using ConfigError::ConfigError;
};

struct UsageError : ConfigError {
    using ConfigError::ConfigError;
};

struct IoError : ConfigError {
    using ConfigError::ConfigError;
};

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG streams. A stream is identified by a 64-bit seed; named
// substreams are derived by hashing the label into the parent seed, so two
// operations never share draws and replays are exact regardless of call
// interleaving across streams.
// ---------------------------------------------------------------------------

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), eng_(mix64(seed)) {}

    RngStream fork(std::string_view label) const {
        return RngStream(mix64(seed_ ^ fnv1a64(label)));
    }
    RngStream fork(std::string_view label, std::uint64_t index) const {
        return RngStream(mix64(mix64(seed_ ^ fnv1a64(label)) + index));
    }

    std::uint64_t seed() const { return seed_; }
    std::mt19937_64& engine() { return eng_; }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    // inclusive bounds
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
    }
    double normal(double mean, double sd) {
        return std::normal_distribution<double>(mean, sd)(eng_);
    }
    bool bernoulli(double p) { return std::bernoulli_distribution(p)(eng_); }

    template <class It>
    void shuffle(It first, It last) {
        std::shuffle(first, last, eng_);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Content hashing (SHA-256 via OpenSSL). Used for checkpoint config hashes,
// round-record checksums and run manifests.
// ---------------------------------------------------------------------------

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(const void* data, std::size_t len);
Sha256 sha256(const std::vector<std::uint8_t>& bytes);
Sha256 sha256(std::string_view text);
std::string to_hex(const Sha256& digest);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file_hex(const std::string& path);

}  // namespace feddr
