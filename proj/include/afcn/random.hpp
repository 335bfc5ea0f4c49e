#pragma once

#include <cstdint>
#include <random>
#include <utility>

namespace afcn {

// Deterministic RNG. mt19937_64 has a fully pinned output sequence, but the
// standard <random> distributions do not, so every draw we depend on in
// tests is derived here from raw engine output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Uniform index in [0, n). Modulo bias is irrelevant at the n used here
    // and the result is deterministic, which is what the tests pin.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(gen_() % n);
    }

    // Fisher-Yates.
    template <typename Seq>
    void shuffle(Seq& seq) {
        for (std::size_t i = seq.size(); i > 1; --i) {
            std::size_t j = index(i);
            using std::swap;
            swap(seq[i - 1], seq[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Decorrelates (seed, stream) pairs, e.g. per-epoch shuffles. SplitMix64.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace afcn
