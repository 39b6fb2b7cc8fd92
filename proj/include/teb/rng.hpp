#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace teb {

/// Seeded random source used everywhere a random decision is made.
///
/// xoshiro256++ core with splitmix64 seeding. All distributions are derived
/// from the raw stream with explicit arithmetic (no std::*_distribution), so
/// a given seed produces the same sequence on every platform. The full state
/// is serializable, which lets agent checkpoints resume mid-stream.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        seed_ = seed;
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + uniform01() * (hi - lo);
    }

    /// Uniform integer in [0, n). Lemire reduction, no modulo bias to speak of.
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("RandomSource::index: n must be positive");
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Box-Muller draw. Consumes exactly two uniforms per call.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * radius * std::cos(2.0 * M_PI * u2);
    }

    /// Exponential with the given mean (inverse transform).
    double exponential(double mean) {
        double u = uniform01();
        if (u >= 1.0) u = std::nextafter(1.0, 0.0);
        return -mean * std::log1p(-u);
    }

    /// k indices drawn with replacement from [0, n).
    std::vector<std::size_t> bootstrap_indices(std::size_t n, std::size_t k) {
        std::vector<std::size_t> out(k);
        for (auto& i : out) i = index(n);
        return out;
    }

    /// First k entries of a Fisher-Yates shuffle of [0, n); k == n gives a
    /// full permutation, k < n a uniform sample without replacement.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + index(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        return sample_without_replacement(n, n);
    }

    std::string dump_state() const {
        std::ostringstream os;
        os << seed_;
        for (auto word : state_) os << ' ' << word;
        return os.str();
    }

    void load_state(const std::string& text) {
        std::istringstream is(text);
        std::uint64_t seed = 0;
        std::array<std::uint64_t, 4> st{};
        if (!(is >> seed >> st[0] >> st[1] >> st[2] >> st[3]))
            throw std::runtime_error("RandomSource::load_state: malformed state string");
        seed_ = seed;
        state_ = st;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace teb
