// Seeded xoshiro256** generator. All randomness in the repo flows through
// this class so that identical seeds give identical streams on every
// platform; std:: distributions are avoided on purpose (their output is
// implementation-defined).
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace xtrack {

class Rng {
public:
    static constexpr const char* kAlgorithm = "xoshiro256**";

    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);

    // Uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller (the spare value is cached, so the
    // draw sequence is part of the deterministic stream).
    double normal();
    double normal(double mean, double stddev);

    // Deterministic Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> state_{};
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace xtrack
