#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "protosent/errors.hpp"

namespace protosent {

// Deterministic random source. The generator is a std::mt19937_64 (bit-exact
// across conforming standard libraries); all distributions are produced here
// by explicit arithmetic rather than std::*_distribution, whose output is
// implementation-defined. Same seed, same build => same stream.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling keeps the result unbiased.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw ContractError("uniform_int: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_int(i)]);
        }
    }

    // Textual engine state plus the Box-Muller cache, for checkpoints.
    std::string serialize() const {
        std::ostringstream os;
        os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
        os.precision(17);
        os << spare_;
        return os.str();
    }

    static Rng deserialize(const std::string& s) {
        Rng r;
        std::istringstream is(s);
        int spare_flag = 0;
        is >> r.engine_ >> spare_flag >> r.spare_;
        if (!is) throw ParseError("Rng::deserialize: malformed state string");
        r.has_spare_ = spare_flag != 0;
        return r;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives independent streams from one master seed; stream ids keep the
// purposes (init / shuffle / dropout / data) from ever sharing state.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 of (seed, stream) so nearby seeds do not collide.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
}

}  // namespace protosent
