#pragma once

#include "boltzgen/common.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace boltzgen {

// Counter-based generator: every output is a hash of (key, counter), so
// streams can be split arbitrarily — derive(child ids...) gives a stream
// that is independent of how much the parent has been consumed. Output is
// identical across platforms (pure integer mixing + libm for normals).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ kKeyInit)) {}

    Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) : Rng(seed) {
        for (std::uint64_t s : stream) key_ = mix(key_ ^ mix(s ^ kStreamSalt));
    }

    // Child stream keyed by additional ids; independent of this->counter.
    Rng derive(std::initializer_list<std::uint64_t> stream) const {
        Rng child(*this);
        child.counter_ = 0;
        child.have_spare_ = false;
        for (std::uint64_t s : stream) child.key_ = mix(child.key_ ^ mix(s ^ kStreamSalt));
        return child;
    }

    std::uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }

    // Uniform on (0, 1); never returns 0 or 1 (safe for log/Box-Muller).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Vec normal_vec(Eigen::Index d) {
        Vec v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
        return v;
    }

    // d x n matrix of iid standard normals, filled column by column.
    Mat normal_mat(Eigen::Index d, Eigen::Index n) {
        Mat m(d, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < d; ++i) m(i, j) = normal();
        return m;
    }

    // Uniform index in [0, n).
    std::int64_t index(std::int64_t n) {
        return std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(uniform() * static_cast<double>(n)));
    }

    std::uint64_t state_counter() const { return counter_; }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kKeyInit = 0x8AE3B5D72F9C1E46ull;
    static constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ull;

    // SplitMix64 finalizer, applied twice for counter-mode use.
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= z >> 31;
        z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDull;
        z ^= z >> 33;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace boltzgen
