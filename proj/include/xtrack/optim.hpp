#pragma once

#include <cstdint>
#include <vector>

#include "xtrack/tensor.hpp"

namespace xtrack {

// Bias-corrected Adam over a fixed parameter list. Moment buffers are
// allocated lazily on the first step and keyed by position, so the
// parameter list must not be reordered once stepping has begun.
class Adam {
public:
    struct Config {
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    explicit Adam(std::vector<Tensor> params) : Adam(std::move(params), Config()) {}
    Adam(std::vector<Tensor> params, Config config);

    // Applies one update in place and clears every grad. Every parameter
    // must carry a populated grad (throws UsageError otherwise).
    void step();

    std::int64_t step_count() const { return step_count_; }
    const Config& config() const { return config_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    Config config_;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
    std::int64_t step_count_ = 0;
};

}  // namespace xtrack
