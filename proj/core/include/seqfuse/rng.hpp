#pragma once

#include <cstdint>

namespace seqfuse {

/// Deterministic 64-bit generator (splitmix64). Used everywhere randomness is
/// needed so that results are bit-identical across platforms and worker counts;
/// std:: distributions are implementation-defined and deliberately avoided.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + next_double() * (hi - lo);
    }

    /// Unbiased uniform integer in [0, n). n must be > 0.
    std::uint64_t bounded(std::uint64_t n) {
        // Rejection sampling on the top bits; rejects at most half the range.
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    std::uint64_t state_;
};

/// Mixes words into a single 64-bit stream key. Keying a generator by
/// (seed, proposal_id, frame) makes each (proposal, frame) draw independent of
/// execution order, so parallel scheduling cannot change sampling results.
inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    Rng r(a ^ 0x6a09e667f3bcc909ULL);
    std::uint64_t h = r.next_u64();
    h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    Rng r2(h);
    h = r2.next_u64();
    h ^= c + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    Rng r3(h);
    return r3.next_u64();
}

}  // namespace seqfuse
