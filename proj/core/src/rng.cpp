#include "geoscore/rng.hpp"

#include <cmath>
#include <cstdlib>

namespace geoscore {

namespace {

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

inline std::uint64_t splitmix_step(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) {
    std::uint64_t s = x;
    return splitmix_step(s);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Ziggurat tables for the standard normal (128 layers, 32-bit grid).
struct ZigguratTables {
    std::uint32_t kn[128];
    double wn[128];
    double fn[128];

    ZigguratTables() {
        const double m1 = 2147483648.0;
        double dn = 3.442619855899;
        double tn = dn;
        const double vn = 9.91256303526217e-3;

        double q = vn / std::exp(-0.5 * dn * dn);
        kn[0] = static_cast<std::uint32_t>((dn / q) * m1);
        kn[1] = 0;
        wn[0] = q / m1;
        wn[127] = dn / m1;
        fn[0] = 1.0;
        fn[127] = std::exp(-0.5 * dn * dn);
        for (int i = 126; i >= 1; --i) {
            dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
            kn[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
            tn = dn;
            fn[i] = std::exp(-0.5 * dn * dn);
            wn[i] = dn / m1;
        }
    }
};

const ZigguratTables& zig() {
    static const ZigguratTables tables;
    return tables;
}

constexpr double kZigR = 3.442619855899;

} // namespace

RngStream::RngStream(std::uint64_t seed) : key_(mix64(seed ^ 0x67656f73636f7265ULL)) {
    init_state();
}

RngStream::RngStream(std::uint64_t key, int) : key_(key) {
    init_state();
}

void RngStream::init_state() {
    std::uint64_t sm = key_;
    for (auto& w : s_) w = splitmix_step(sm);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

RngStream RngStream::child(std::string_view purpose, std::uint64_t index) const {
    std::uint64_t k = key_;
    k = mix64(k ^ fnv1a64(purpose));
    k = mix64(k ^ (index * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
    return RngStream(k, 0);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl64(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl64(s_[3], 45);
    return result;
}

double RngStream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    const auto& t = zig();
    for (;;) {
        const std::uint64_t u = next_u64();
        const auto hz = static_cast<std::int32_t>(u >> 32);
        const std::uint32_t iz = static_cast<std::uint32_t>(u) & 127u;
        const std::uint32_t ahz =
            hz < 0 ? static_cast<std::uint32_t>(-static_cast<std::int64_t>(hz))
                   : static_cast<std::uint32_t>(hz);
        if (ahz < t.kn[iz]) return hz * t.wn[iz];
        const double x = normal_slow_path(iz, hz);
        if (!std::isnan(x)) return x;
    }
}

double RngStream::normal_slow_path(std::uint32_t iz, std::int32_t hz) {
    const auto& t = zig();
    double x = hz * t.wn[iz];
    if (iz == 0) {
        // Tail beyond +-r.
        double y;
        do {
            x = -std::log(1.0 - uniform01()) / kZigR;
            y = -std::log(1.0 - uniform01());
        } while (y + y < x * x);
        return hz > 0 ? kZigR + x : -(kZigR + x);
    }
    if (t.fn[iz] + uniform01() * (t.fn[iz - 1] - t.fn[iz]) < std::exp(-0.5 * x * x)) {
        return x;
    }
    return std::nan("");
}

void RngStream::fill_normal(double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = normal();
}

} // namespace geoscore
