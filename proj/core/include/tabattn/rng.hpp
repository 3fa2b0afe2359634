#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace tabattn {

// Portable seeded randomness. The standard distributions are
// implementation-defined, so everything that must reproduce bit-for-bit
// across toolchains goes through these helpers instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next() { return engine_(); }
    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }
    template <class T>
    void shuffle(std::vector<T>& items) { shuffle(std::span<T>(items)); }

private:
    std::mt19937_64 engine_;
};

// Stream tags keep independent consumers of one experiment seed apart.
enum class Stream : std::uint64_t {
    Split = 1,
    Holdout,
    Batches,
    Init,
    Dropout,
    RandomForest,
    Gbdt,
    KMeans,
    Baseline,
};

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t sub = 0) {
    return Rng(seed, (static_cast<std::uint64_t>(stream) << 32) ^ sub);
}

}  // namespace tabattn
