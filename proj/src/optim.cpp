#include "xtrack/optim.hpp"

#include <cmath>

#include "xtrack/errors.hpp"

namespace xtrack {

Adam::Adam(std::vector<Tensor> params, Config config)
    : params_(std::move(params)), config_(config) {
    first_moment_.resize(params_.size());
    second_moment_.resize(params_.size());
    for (std::size_t p = 0; p < params_.size(); ++p) {
        const auto n = static_cast<std::size_t>(params_[p].size());
        first_moment_[p].assign(n, 0.0);
        second_moment_[p].assign(n, 0.0);
    }
}

void Adam::step() {
    for (std::size_t p = 0; p < params_.size(); ++p) {
        if (!params_[p].has_grad()) {
            throw UsageError("Adam::step: parameter " + std::to_string(p) +
                             " has no gradient; run backward first");
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        auto& param = params_[p];
        auto& m = first_moment_[p];
        auto& v = second_moment_[p];
        const auto& g = param.grad();
        const int n = param.size();
        for (int i = 0; i < n; ++i) {
            m[static_cast<std::size_t>(i)] =
                config_.beta1 * m[static_cast<std::size_t>(i)] + (1.0 - config_.beta1) * g[static_cast<std::size_t>(i)];
            v[static_cast<std::size_t>(i)] =
                config_.beta2 * v[static_cast<std::size_t>(i)] + (1.0 - config_.beta2) * g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
            const double m_hat = m[static_cast<std::size_t>(i)] / bc1;
            const double v_hat = v[static_cast<std::size_t>(i)] / bc2;
            param[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
        param.zero_grad();
    }
}

}  // namespace xtrack
