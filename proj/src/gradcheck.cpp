#include "xtrack/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xtrack/errors.hpp"

namespace xtrack {

namespace {

double eval_scalar(const std::function<Tensor(Tape&)>& fn) {
    Tape tape;
    tape.set_recording(false);
    Tensor out = fn(tape);
    if (out.size() != 1) {
        throw UsageError("grad_check: function must return a scalar, got " + out.shape_str());
    }
    const double v = out[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: function produced a non-finite value");
    return v;
}

}  // namespace

std::string GradCheckReport::to_string() const {
    std::ostringstream os;
    os << "max_rel_error=" << max_rel_error << " at input " << worst_input << " coord "
       << worst_coord << " (analytic=" << analytic << ", numeric=" << numeric << ")";
    return os.str();
}

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& fn,
                           const std::vector<Tensor>& inputs, double epsilon) {
    if (!(epsilon > 0.0)) throw UsageError("grad_check: epsilon must be positive");

    for (auto input : inputs) input.zero_grad();
    std::vector<std::vector<double>> analytic(inputs.size());
    {
        Tape tape;
        Tensor out = fn(tape);
        if (out.size() != 1) {
            throw UsageError("grad_check: function must return a scalar, got " + out.shape_str());
        }
        if (!std::isfinite(out[0])) {
            throw NumericError("grad_check: function produced a non-finite value");
        }
        tape.backward(out);
        for (std::size_t p = 0; p < inputs.size(); ++p) {
            Tensor t = inputs[p];
            t.ensure_grad();
            analytic[p] = t.grad();
        }
    }

    GradCheckReport report;
    for (std::size_t p = 0; p < inputs.size(); ++p) {
        Tensor t = inputs[p];
        const int n = t.size();
        for (int i = 0; i < n; ++i) {
            const double saved = t[i];
            t[i] = saved + epsilon;
            const double f_plus = eval_scalar(fn);
            t[i] = saved - epsilon;
            const double f_minus = eval_scalar(fn);
            t[i] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
            const double a = analytic[p][static_cast<std::size_t>(i)];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_input = static_cast<int>(p);
                report.worst_coord = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace xtrack
