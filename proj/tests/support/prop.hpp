#pragma once

// Minimal property-test driver: runs a body over seeded random cases and reports the
// failing case index and seed through the gtest trace.

#include <cstdint>
#include <random>

#include <gtest/gtest.h>

namespace prop {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return integer(0, 1) == 1; }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

template <class Body>
void for_all(int cases, std::uint64_t seed, Body&& body) {
    for (int i = 0; i < cases; ++i) {
        const std::uint64_t case_seed = seed * 1000003ULL + static_cast<std::uint64_t>(i);
        SCOPED_TRACE(::testing::Message() << "case " << i << " seed " << case_seed);
        Gen gen(case_seed);
        body(gen);
        if (::testing::Test::HasFatalFailure()) return;
    }
}

}  // namespace prop
