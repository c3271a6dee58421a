#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xtrack/tensor.hpp"

namespace xtrack {

struct GradCheckReport {
    double max_rel_error = 0.0;
    int worst_input = -1;  // index into the checked input list
    int worst_coord = -1;  // flat coordinate within that input
    double analytic = 0.0;
    double numeric = 0.0;

    std::string to_string() const;
};

// Compares analytic gradients of a scalar-valued function against central
// finite differences, coordinate by coordinate. `fn` must read the listed
// inputs by value reference (captured Tensors share storage) and be
// deterministic; it is re-evaluated 2 per coordinate plus once analytically.
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
// Throws NumericError if fn ever produces a non-finite value.
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& fn,
                           const std::vector<Tensor>& inputs,
                           double epsilon = 1e-5);

}  // namespace xtrack
