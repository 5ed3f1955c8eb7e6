#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace ccombat {

// Seeded random stream. The engine is std::mt19937_64; the variate
// transforms are written out here so that streams are reproducible across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent sub-stream keyed by (seed, key), e.g. one per site.
    static Rng substream(std::uint64_t seed, std::uint64_t key);

    std::uint64_t next_u64() { return engine_(); }
    double uniform();                                 // [0, 1)
    double uniform(double lo, double hi);
    double normal(double mean = 0.0, double sd = 1.0);
    std::size_t index(std::size_t n);                 // uniform in [0, n)

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_{false};
    double spare_{0.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ccombat
