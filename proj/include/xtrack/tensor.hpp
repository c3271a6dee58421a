// Reverse-mode differentiable tensor core.
//
// A Tensor is a dense row-major 64-bit array with a shape and a gradient
// slot; handles share storage. Every operation takes a Tape: the forward
// value is computed eagerly and the matching analytic backward closure is
// appended to the tape. Tape::backward seeds a scalar root with 1 and runs
// the closures in reverse, accumulating into each operand's grad buffer.
//
// A tape and everything recorded on it belong to one thread. Independent
// tapes over disjoint storage may run concurrently.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace xtrack {

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    // A Tensor is a handle onto shared storage: const on the handle does
    // not protect the pointee, so accessors that mutate only the shared
    // buffer are const-qualified (copies captured in backward closures
    // must still be able to accumulate gradients).
    bool defined() const { return data_ != nullptr; }
    const std::vector<int>& shape() const { return data_->shape; }
    int size() const { return static_cast<int>(data_->values.size()); }

    std::vector<double>& values() const { return data_->values; }
    double& operator[](int i) const { return data_->values[static_cast<std::size_t>(i)]; }

    // Gradient buffer. Allocated lazily; ops touching a recording tape
    // allocate it for every operand so backward can accumulate blindly.
    bool has_grad() const { return !data_->grad.empty(); }
    std::vector<double>& grad() const;
    void ensure_grad() const;
    void zero_grad() const;

    bool requires_grad() const { return data_->requires_grad; }
    void set_requires_grad(bool r) const { data_->requires_grad = r; }

    bool same_storage(const Tensor& other) const { return data_ == other.data_; }
    bool all_finite() const;
    std::string shape_str() const;

private:
    struct Data {
        std::vector<int> shape;
        std::vector<double> values;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Data> data_;
};

class Tape {
public:
    void push(std::function<void()> backward_fn) {
        if (recording_) ops_.push_back(std::move(backward_fn));
    }

    // Seeds root.grad with 1 (root must be a scalar) and runs every
    // recorded closure in reverse order.
    void backward(Tensor root);

    bool recording() const { return recording_; }
    void set_recording(bool r) { recording_ = r; }
    std::size_t num_ops() const { return ops_.size(); }
    void clear() { ops_.clear(); }

private:
    std::vector<std::function<void()>> ops_;
    bool recording_ = true;
};

// ---------------------------------------------------------------------------
// Primitive operations. Each computes the forward value and registers the
// analytic backward on the tape.
// ---------------------------------------------------------------------------

// Elementwise; operands must share a shape.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor div(Tape& tape, const Tensor& a, const Tensor& b);

Tensor scale(Tape& tape, const Tensor& a, double s);
Tensor shift(Tape& tape, const Tensor& a, double s);
Tensor neg(Tape& tape, const Tensor& a);

// y = W x + b with W [out, in], x [in], b [out].
Tensor linear_forward(Tape& tape, const Tensor& x, const Tensor& W, const Tensor& b);
Tensor matvec(Tape& tape, const Tensor& W, const Tensor& x);

// R holds H square blocks, shape [H, k, k]; x has length H*k. Output i of
// head h mixes only the k inputs of head h.
Tensor block_matvec(Tape& tape, const Tensor& R, const Tensor& x);

// Elementwise nonlinearities.
Tensor tanh(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor exp(Tape& tape, const Tensor& a);
Tensor log_sigmoid(Tape& tape, const Tensor& a);
Tensor leaky_relu(Tape& tape, const Tensor& a, double negative_slope);
Tensor sin(Tape& tape, const Tensor& a);
Tensor cos(Tape& tape, const Tensor& a);

// Shape plumbing.
Tensor concat(Tape& tape, const Tensor& a, const Tensor& b);
Tensor pick(Tape& tape, const Tensor& a, int index);           // scalar a[index]
Tensor stack(Tape& tape, const std::vector<Tensor>& scalars);  // [k] from k scalars

// Reductions and contractions.
Tensor dot(Tape& tape, const Tensor& a, const Tensor& b);      // scalar
Tensor sum(Tape& tape, const Tensor& a);                       // scalar
Tensor outer(Tape& tape, const Tensor& u, const Tensor& v);    // [m, n]
Tensor smul(Tape& tape, const Tensor& s, const Tensor& a);     // scalar * tensor
Tensor sdiv(Tape& tape, const Tensor& a, const Tensor& s);     // tensor / scalar

// Numerically stable softmax over a vector (shift by the max; the shift is
// value-preserving, so the result equals the mathematical softmax).
Tensor softmax(Tape& tape, const Tensor& a);

// y = sum_k w[k] * feats[k]; every feats[k] shares one shape.
Tensor weighted_sum(Tape& tape, const Tensor& w, const std::vector<Tensor>& feats);

// max(|s|, floor_value) for a scalar s; gradient is sign(s) where |s| wins.
Tensor abs_floor(Tape& tape, const Tensor& s, double floor_value);

// bound * tanh(a / bound): odd smooth saturation with |y| < bound.
Tensor tanh_saturate(Tape& tape, const Tensor& a, double bound);

}  // namespace xtrack
