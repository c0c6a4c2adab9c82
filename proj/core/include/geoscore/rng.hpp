#pragma once

#include <cstdint>
#include <string_view>

namespace geoscore {

// Deterministic random stream addressed by (seed, hierarchical path).
//
// Substreams are derived from an immutable 64-bit key, never from consumed
// state, so the stream produced by a given (seed, path) does not depend on
// how much any ancestor stream has been read. The raw u64 stream is pure
// integer arithmetic (xoshiro256++ seeded via splitmix64) and is therefore
// byte-identical across platforms.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    // Derive the substream labelled (purpose, index) under this stream.
    RngStream child(std::string_view purpose, std::uint64_t index = 0) const;

    std::uint64_t next_u64();
    // Uniform on [0, 1), 53-bit resolution.
    double uniform01();
    // Standard normal via a 128-layer ziggurat.
    double normal();
    void fill_normal(double* dst, std::size_t n);

    std::uint64_t key() const { return key_; }

private:
    RngStream(std::uint64_t key, int /*tag*/);
    void init_state();
    double normal_slow_path(std::uint32_t iz, std::int32_t hz);

    std::uint64_t key_;
    std::uint64_t s_[4];
};

} // namespace geoscore
