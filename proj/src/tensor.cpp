#include "xtrack/tensor.hpp"

#include <cmath>
#include <sstream>

#include "xtrack/errors.hpp"

namespace xtrack {

namespace {

std::size_t shape_product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("tensor shape must have positive dimensions");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
    }
}

// Allocates grad buffers up front so backward closures can accumulate
// without checks.
void prepare(Tape& tape, std::initializer_list<Tensor> tensors) {
    if (!tape.recording()) return;
    for (auto t : tensors) t.ensure_grad();
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    const std::size_t n = shape_product(shape);
    Tensor t;
    t.data_ = std::make_shared<Data>();
    t.data_->shape = std::move(shape);
    t.data_->values.assign(n, value);
    t.data_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    const std::size_t n = shape_product(shape);
    if (values.size() != n) {
        throw DimensionError("Tensor::from: " + std::to_string(values.size()) +
                             " values for a shape of " + std::to_string(n) + " elements");
    }
    Tensor t;
    t.data_ = std::make_shared<Data>();
    t.data_->shape = std::move(shape);
    t.data_->values = std::move(values);
    t.data_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

std::vector<double>& Tensor::grad() const {
    ensure_grad();
    return data_->grad;
}

void Tensor::ensure_grad() const {
    if (data_->grad.empty()) data_->grad.assign(data_->values.size(), 0.0);
}

void Tensor::zero_grad() const {
    data_->grad.assign(data_->values.size(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data_->values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < data_->shape.size(); ++i) {
        if (i) os << ',';
        os << data_->shape[i];
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

void Tape::backward(Tensor root) {
    if (root.size() != 1) {
        throw UsageError("Tape::backward: root must be a scalar, got shape " +
                         root.shape_str());
    }
    root.ensure_grad();
    root.grad()[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = a[i] + b[i];
    prepare(tape, {a, b, y});
    tape.push([a, b, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) {
            a.grad()[i] += y.grad()[i];
            b.grad()[i] += y.grad()[i];
        }
    });
    return y;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = a[i] - b[i];
    prepare(tape, {a, b, y});
    tape.push([a, b, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) {
            a.grad()[i] += y.grad()[i];
            b.grad()[i] -= y.grad()[i];
        }
    });
    return y;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = a[i] * b[i];
    prepare(tape, {a, b, y});
    tape.push([a, b, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) {
            a.grad()[i] += y.grad()[i] * b[i];
            b.grad()[i] += y.grad()[i] * a[i];
        }
    });
    return y;
}

Tensor div(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape("div", a, b);
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = a[i] / b[i];
    prepare(tape, {a, b, y});
    tape.push([a, b, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) {
            a.grad()[i] += y.grad()[i] / b[i];
            b.grad()[i] -= y.grad()[i] * y[i] / b[i];
        }
    });
    return y;
}

Tensor scale(Tape& tape, const Tensor& a, double s) {
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = a[i] * s;
    prepare(tape, {a, y});
    tape.push([a, y, s]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) a.grad()[i] += y.grad()[i] * s;
    });
    return y;
}

Tensor shift(Tape& tape, const Tensor& a, double s) {
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = a[i] + s;
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) a.grad()[i] += y.grad()[i];
    });
    return y;
}

Tensor neg(Tape& tape, const Tensor& a) {
    return scale(tape, a, -1.0);
}

// ---------------------------------------------------------------------------
// Linear maps
// ---------------------------------------------------------------------------

Tensor linear_forward(Tape& tape, const Tensor& x, const Tensor& W, const Tensor& b) {
    if (W.shape().size() != 2) {
        throw DimensionError("linear_forward: W must be 2-D, got " + W.shape_str());
    }
    const int out = W.shape()[0];
    const int in = W.shape()[1];
    if (x.size() != in || b.size() != out) {
        throw DimensionError("linear_forward: W " + W.shape_str() + " incompatible with x " +
                             x.shape_str() + " and b " + b.shape_str());
    }
    Tensor y = Tensor::zeros({out});
    for (int i = 0; i < out; ++i) {
        double acc = b[i];
        for (int j = 0; j < in; ++j) acc += W[i * in + j] * x[j];
        y[i] = acc;
    }
    prepare(tape, {x, W, b, y});
    tape.push([x, W, b, y, out, in]() mutable {
        for (int i = 0; i < out; ++i) {
            const double gy = y.grad()[i];
            b.grad()[i] += gy;
            for (int j = 0; j < in; ++j) {
                W.grad()[i * in + j] += gy * x[j];
                x.grad()[j] += gy * W[i * in + j];
            }
        }
    });
    return y;
}

Tensor matvec(Tape& tape, const Tensor& W, const Tensor& x) {
    if (W.shape().size() != 2) {
        throw DimensionError("matvec: W must be 2-D, got " + W.shape_str());
    }
    const int out = W.shape()[0];
    const int in = W.shape()[1];
    if (x.size() != in) {
        throw DimensionError("matvec: W " + W.shape_str() + " incompatible with x " +
                             x.shape_str());
    }
    Tensor y = Tensor::zeros({out});
    for (int i = 0; i < out; ++i) {
        double acc = 0.0;
        for (int j = 0; j < in; ++j) acc += W[i * in + j] * x[j];
        y[i] = acc;
    }
    prepare(tape, {W, x, y});
    tape.push([W, x, y, out, in]() mutable {
        for (int i = 0; i < out; ++i) {
            const double gy = y.grad()[i];
            for (int j = 0; j < in; ++j) {
                W.grad()[i * in + j] += gy * x[j];
                x.grad()[j] += gy * W[i * in + j];
            }
        }
    });
    return y;
}

Tensor block_matvec(Tape& tape, const Tensor& R, const Tensor& x) {
    if (R.shape().size() != 3 || R.shape()[1] != R.shape()[2]) {
        throw DimensionError("block_matvec: R must be [H,k,k], got " + R.shape_str());
    }
    const int heads = R.shape()[0];
    const int k = R.shape()[1];
    if (x.size() != heads * k) {
        throw DimensionError("block_matvec: R " + R.shape_str() + " incompatible with x " +
                             x.shape_str());
    }
    Tensor y = Tensor::zeros({heads * k});
    for (int h = 0; h < heads; ++h) {
        const int base = h * k;
        for (int i = 0; i < k; ++i) {
            double acc = 0.0;
            for (int j = 0; j < k; ++j) acc += R[(base + i) * k + j] * x[base + j];
            y[base + i] = acc;
        }
    }
    prepare(tape, {R, x, y});
    tape.push([R, x, y, heads, k]() mutable {
        for (int h = 0; h < heads; ++h) {
            const int base = h * k;
            for (int i = 0; i < k; ++i) {
                const double gy = y.grad()[base + i];
                for (int j = 0; j < k; ++j) {
                    R.grad()[(base + i) * k + j] += gy * x[base + j];
                    x.grad()[base + j] += gy * R[(base + i) * k + j];
                }
            }
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

Tensor tanh(Tape& tape, const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = std::tanh(a[i]);
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) a.grad()[i] += y.grad()[i] * (1.0 - y[i] * y[i]);
    });
    return y;
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) {
        const double v = a[i];
        y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
    }
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) a.grad()[i] += y.grad()[i] * y[i] * (1.0 - y[i]);
    });
    return y;
}

Tensor exp(Tape& tape, const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = std::exp(a[i]);
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) a.grad()[i] += y.grad()[i] * y[i];
    });
    return y;
}

Tensor log_sigmoid(Tape& tape, const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) {
        const double v = a[i];
        y[i] = v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
    }
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) {
            const double v = a[i];
            const double sig_neg = v >= 0.0 ? std::exp(-v) / (1.0 + std::exp(-v))
                                            : 1.0 / (1.0 + std::exp(v));
            a.grad()[i] += y.grad()[i] * sig_neg;
        }
    });
    return y;
}

Tensor leaky_relu(Tape& tape, const Tensor& a, double negative_slope) {
    if (!std::isfinite(negative_slope)) {
        throw UsageError("leaky_relu: negative_slope must be finite");
    }
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = a[i] > 0.0 ? a[i] : negative_slope * a[i];
    prepare(tape, {a, y});
    tape.push([a, y, negative_slope]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) {
            a.grad()[i] += y.grad()[i] * (a[i] > 0.0 ? 1.0 : negative_slope);
        }
    });
    return y;
}

Tensor sin(Tape& tape, const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = std::sin(a[i]);
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) a.grad()[i] += y.grad()[i] * std::cos(a[i]);
    });
    return y;
}

Tensor cos(Tape& tape, const Tensor& a) {
    Tensor y = Tensor::zeros(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = std::cos(a[i]);
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const int n = y.size();
        for (int i = 0; i < n; ++i) a.grad()[i] -= y.grad()[i] * std::sin(a[i]);
    });
    return y;
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b) {
    Tensor y = Tensor::zeros({a.size() + b.size()});
    const int na = a.size();
    const int nb = b.size();
    for (int i = 0; i < na; ++i) y[i] = a[i];
    for (int i = 0; i < nb; ++i) y[na + i] = b[i];
    prepare(tape, {a, b, y});
    tape.push([a, b, y, na, nb]() mutable {
        for (int i = 0; i < na; ++i) a.grad()[i] += y.grad()[i];
        for (int i = 0; i < nb; ++i) b.grad()[i] += y.grad()[na + i];
    });
    return y;
}

Tensor pick(Tape& tape, const Tensor& a, int index) {
    if (index < 0 || index >= a.size()) {
        throw DimensionError("pick: index " + std::to_string(index) + " out of range for " +
                             a.shape_str());
    }
    Tensor y = Tensor::scalar(a[index]);
    prepare(tape, {a, y});
    tape.push([a, y, index]() mutable { a.grad()[index] += y.grad()[0]; });
    return y;
}

Tensor stack(Tape& tape, const std::vector<Tensor>& scalars) {
    const int k = static_cast<int>(scalars.size());
    if (k == 0) throw UsageError("stack: empty input");
    Tensor y = Tensor::zeros({k});
    for (int i = 0; i < k; ++i) {
        if (scalars[static_cast<std::size_t>(i)].size() != 1) {
            throw DimensionError("stack: element " + std::to_string(i) + " is not a scalar");
        }
        y[i] = scalars[static_cast<std::size_t>(i)][0];
    }
    if (tape.recording()) {
        for (auto s : scalars) s.ensure_grad();
        y.ensure_grad();
    }
    auto inputs = scalars;
    tape.push([inputs, y]() mutable {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            inputs[i].grad()[0] += y.grad()[static_cast<int>(i)];
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Reductions and contractions
// ---------------------------------------------------------------------------

Tensor dot(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape("dot", a, b);
    double acc = 0.0;
    const int n = a.size();
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    Tensor y = Tensor::scalar(acc);
    prepare(tape, {a, b, y});
    tape.push([a, b, y]() mutable {
        const double gy = y.grad()[0];
        const int n = a.size();
        for (int i = 0; i < n; ++i) {
            a.grad()[i] += gy * b[i];
            b.grad()[i] += gy * a[i];
        }
    });
    return y;
}

Tensor sum(Tape& tape, const Tensor& a) {
    double acc = 0.0;
    const int n = a.size();
    for (int i = 0; i < n; ++i) acc += a[i];
    Tensor y = Tensor::scalar(acc);
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const double gy = y.grad()[0];
        const int n = a.size();
        for (int i = 0; i < n; ++i) a.grad()[i] += gy;
    });
    return y;
}

Tensor outer(Tape& tape, const Tensor& u, const Tensor& v) {
    const int m = u.size();
    const int n = v.size();
    Tensor y = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) y[i * n + j] = u[i] * v[j];
    }
    prepare(tape, {u, v, y});
    tape.push([u, v, y, m, n]() mutable {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                const double gy = y.grad()[i * n + j];
                u.grad()[i] += gy * v[j];
                v.grad()[j] += gy * u[i];
            }
        }
    });
    return y;
}

Tensor smul(Tape& tape, const Tensor& s, const Tensor& a) {
    if (s.size() != 1) throw DimensionError("smul: s must be a scalar, got " + s.shape_str());
    Tensor y = Tensor::zeros(a.shape());
    const double sv = s[0];
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = sv * a[i];
    prepare(tape, {s, a, y});
    tape.push([s, a, y]() mutable {
        const double sv = s[0];
        const int n = a.size();
        for (int i = 0; i < n; ++i) {
            s.grad()[0] += y.grad()[i] * a[i];
            a.grad()[i] += y.grad()[i] * sv;
        }
    });
    return y;
}

Tensor sdiv(Tape& tape, const Tensor& a, const Tensor& s) {
    if (s.size() != 1) throw DimensionError("sdiv: s must be a scalar, got " + s.shape_str());
    Tensor y = Tensor::zeros(a.shape());
    const double sv = s[0];
    const int n = a.size();
    for (int i = 0; i < n; ++i) y[i] = a[i] / sv;
    prepare(tape, {a, s, y});
    tape.push([a, s, y]() mutable {
        const double sv = s[0];
        const int n = a.size();
        for (int i = 0; i < n; ++i) {
            a.grad()[i] += y.grad()[i] / sv;
            s.grad()[0] -= y.grad()[i] * y[i] / sv;
        }
    });
    return y;
}

Tensor softmax(Tape& tape, const Tensor& a) {
    const int n = a.size();
    Tensor y = Tensor::zeros(a.shape());
    double mx = a[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, a[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        y[i] = std::exp(a[i] - mx);
        z += y[i];
    }
    for (int i = 0; i < n; ++i) y[i] /= z;
    prepare(tape, {a, y});
    tape.push([a, y]() mutable {
        const int n = y.size();
        double inner = 0.0;
        for (int i = 0; i < n; ++i) inner += y.grad()[i] * y[i];
        for (int i = 0; i < n; ++i) a.grad()[i] += y[i] * (y.grad()[i] - inner);
    });
    return y;
}

Tensor weighted_sum(Tape& tape, const Tensor& w, const std::vector<Tensor>& feats) {
    const int k = w.size();
    if (k != static_cast<int>(feats.size())) {
        throw DimensionError("weighted_sum: " + std::to_string(k) + " weights for " +
                             std::to_string(feats.size()) + " features");
    }
    if (k == 0) throw UsageError("weighted_sum: empty input");
    const int d = feats[0].size();
    Tensor y = Tensor::zeros(feats[0].shape());
    for (int j = 0; j < k; ++j) {
        check_same_shape("weighted_sum", feats[0], feats[static_cast<std::size_t>(j)]);
        const double wj = w[j];
        for (int i = 0; i < d; ++i) y[i] += wj * feats[static_cast<std::size_t>(j)][i];
    }
    if (tape.recording()) {
        w.ensure_grad();
        for (auto f : feats) f.ensure_grad();
        y.ensure_grad();
    }
    auto fs = feats;
    Tensor wc = w;
    tape.push([wc, fs, y, k, d]() mutable {
        for (int j = 0; j < k; ++j) {
            auto& f = fs[static_cast<std::size_t>(j)];
            const double wj = wc[j];
            double acc = 0.0;
            for (int i = 0; i < d; ++i) {
                acc += y.grad()[i] * f[i];
                f.grad()[i] += y.grad()[i] * wj;
            }
            wc.grad()[j] += acc;
        }
    });
    return y;
}

Tensor abs_floor(Tape& tape, const Tensor& s, double floor_value) {
    if (s.size() != 1) throw DimensionError("abs_floor: expected a scalar, got " + s.shape_str());
    const double v = s[0];
    const double av = std::fabs(v);
    Tensor y = Tensor::scalar(av > floor_value ? av : floor_value);
    prepare(tape, {s, y});
    tape.push([s, y, floor_value]() mutable {
        const double v = s[0];
        if (std::fabs(v) > floor_value) {
            s.grad()[0] += y.grad()[0] * (v >= 0.0 ? 1.0 : -1.0);
        }
    });
    return y;
}

Tensor tanh_saturate(Tape& tape, const Tensor& a, double bound) {
    if (!(bound > 0.0)) throw UsageError("tanh_saturate: bound must be positive");
    return scale(tape, tanh(tape, scale(tape, a, 1.0 / bound)), bound);
}

}  // namespace xtrack
