#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sinr {

// Precondition / interface violations (dimension mismatch, bad config, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Query embedder does not match the one the index was built with.
struct FingerprintMismatch : ContractError {
    using ContractError::ContractError;
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConflictError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Remote provider failures. retryable distinguishes transient transport
// problems from contract violations reported by the peer.
struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& msg, bool retryable = true)
        : std::runtime_error(msg), retryable(retryable) {}
    bool retryable;
};

inline constexpr std::uint64_t kFnv64Offset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnv64Prime = 1099511628211ull;

// FNV-1a, 64 bit. The project-wide hash: content ids, feature hashing and
// mapping-log keys all go through this.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = kFnv64Offset) {
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnv64Prime;
    }
    return h;
}

inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t len,
                                   std::uint64_t h = kFnv64Offset) {
    return fnv1a64(std::string_view(static_cast<const char*>(data), len), h);
}

// splitmix64 finalizer; used to derive independent bit streams from one hash.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string to_hex16(std::uint64_t v);

}  // namespace sinr
