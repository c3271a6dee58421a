#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xtrack {

struct CertCheck {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct CertificationReport {
    std::vector<CertCheck> checks;

    bool all_passed() const;
    std::string to_string() const;  // one line per check
};

// Gradient certification: every differentiable building block is compared
// against central finite differences at smooth interior points over 20 seeded
// draws, then the assembled model is checked end to end for both variants.
// `seed` offsets the per-op draws; the end-to-end case keeps a pinned seed so
// no activation lands on a LeakyReLU kink, where finite differences are
// one-sided.
CertificationReport run_certification(std::uint64_t seed);

}  // namespace xtrack
