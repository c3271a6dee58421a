#include "xtrack/cells.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "xtrack/errors.hpp"

namespace xtrack {

const char* to_string(CellKind kind) {
    switch (kind) {
        case CellKind::lstm: return "lstm";
        case CellKind::slstm: return "slstm";
        case CellKind::mlstm: return "mlstm";
    }
    throw UsageError("invalid cell kind");
}

CellKind cell_kind_from_string(const std::string& name) {
    if (name == "lstm") return CellKind::lstm;
    if (name == "slstm") return CellKind::slstm;
    if (name == "mlstm") return CellKind::mlstm;
    throw UsageError("unknown cell kind '" + name + "' (expected lstm, slstm, or mlstm)");
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Gate pre-activation W x + R h + b with the block-diagonal recurrent map.
Tensor preact(Tape& tape, const Tensor& W, const Tensor& R, const Tensor& b,
              const Tensor& x, const Tensor& h) {
    return add(tape, linear_forward(tape, x, W, b), block_matvec(tape, R, h));
}

Tensor uniform_tensor(Rng& rng, std::vector<int> shape, double bound) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

void check_cell_shapes(const char* cell, const Tensor& x, const Tensor& h,
                       const GateParams& p) {
    const int d = p.hidden_dim();
    if (x.size() != p.input_dim() || h.size() != d) {
        throw DimensionError(std::string(cell) + ": x " + x.shape_str() + ", h " +
                             h.shape_str() + " incompatible with W " + p.W_z.shape_str());
    }
    if (p.R_z.shape()[0] != p.num_heads || p.R_z.shape()[1] * p.num_heads != d) {
        throw DimensionError(std::string(cell) + ": recurrent blocks " + p.R_z.shape_str() +
                             " do not tile a " + std::to_string(d) + "-dim hidden state with " +
                             std::to_string(p.num_heads) + " heads");
    }
}

}  // namespace

std::vector<Tensor> GateParams::parameters() const {
    return {W_z, W_i, W_f, W_o, R_z, R_i, R_f, R_o, b_z, b_i, b_f, b_o};
}

std::vector<Tensor> MlstmParams::parameters() const {
    return {W_q, W_k, W_v, W_o, b_q, b_k, b_v, b_o, w_i, w_f, b_i, b_f};
}

LstmState lstm_init_state(int d) {
    return {Tensor::zeros({d}), Tensor::zeros({d})};
}

SLstmState slstm_init_state(int d) {
    return {Tensor::zeros({d}), Tensor::zeros({d}), Tensor::zeros({d}),
            Tensor::full({d}, kNegInf)};
}

MLstmState mlstm_init_state(int d) {
    return {Tensor::zeros({d, d}), Tensor::zeros({d}), Tensor::zeros({d}),
            Tensor::scalar(kNegInf)};
}

LstmState lstm_step(Tape& tape, const LstmState& state, const Tensor& x,
                    const GateParams& params) {
    check_cell_shapes("lstm_step", x, state.h, params);
    Tensor z = tanh(tape, preact(tape, params.W_z, params.R_z, params.b_z, x, state.h));
    Tensor i = sigmoid(tape, preact(tape, params.W_i, params.R_i, params.b_i, x, state.h));
    Tensor f = sigmoid(tape, preact(tape, params.W_f, params.R_f, params.b_f, x, state.h));
    Tensor o = sigmoid(tape, preact(tape, params.W_o, params.R_o, params.b_o, x, state.h));
    Tensor c = add(tape, mul(tape, f, state.c), mul(tape, i, z));
    Tensor h = mul(tape, o, tanh(tape, c));
    return {c, h};
}

SLstmState slstm_step(Tape& tape, const SLstmState& state, const Tensor& x,
                      const GateParams& params) {
    check_cell_shapes("slstm_step", x, state.h, params);
    const int d = params.hidden_dim();

    Tensor z = tanh(tape, preact(tape, params.W_z, params.R_z, params.b_z, x, state.h));
    Tensor i_pre = preact(tape, params.W_i, params.R_i, params.b_i, x, state.h);
    Tensor f_pre = preact(tape, params.W_f, params.R_f, params.b_f, x, state.h);
    Tensor o = sigmoid(tape, preact(tape, params.W_o, params.R_o, params.b_o, x, state.h));

    Tensor log_f = params.forget_activation == ForgetActivation::sigmoid
                       ? log_sigmoid(tape, f_pre)
                       : f_pre;

    // New stabilizer, from values only: m_t = max(log f_t + m_{t-1}, i_pre_t).
    // With m_0 = -inf the first step lands on the input branch, so n_1 = 1.
    Tensor m = Tensor::zeros({d});
    Tensor df = Tensor::zeros({d});  // m_{t-1} - m_t
    Tensor dm = Tensor::zeros({d});  // -m_t
    for (int k = 0; k < d; ++k) {
        m[k] = std::fmax(log_f[k] + state.m[k], i_pre[k]);
        df[k] = state.m[k] - m[k];
        dm[k] = -m[k];
    }

    // Stabilized gates: f' = exp(log f + m_{t-1} - m_t), i' = exp(i_pre - m_t).
    Tensor f = exp(tape, add(tape, log_f, df));
    Tensor i = exp(tape, add(tape, i_pre, dm));

    Tensor c = add(tape, mul(tape, f, state.c), mul(tape, i, z));
    Tensor n = add(tape, mul(tape, f, state.n), i);
    Tensor h = mul(tape, o, div(tape, c, n));
    return {c, n, h, m};
}

MLstmState mlstm_step(Tape& tape, const MLstmState& state, const Tensor& x,
                      const MlstmParams& params) {
    const int d = params.hidden_dim();
    if (x.size() != params.input_dim() || state.n.size() != d) {
        throw DimensionError("mlstm_step: x " + x.shape_str() + ", n " + state.n.shape_str() +
                             " incompatible with W " + params.W_q.shape_str());
    }

    Tensor q = linear_forward(tape, x, params.W_q, params.b_q);
    Tensor k = scale(tape, linear_forward(tape, x, params.W_k, params.b_k),
                     1.0 / std::sqrt(static_cast<double>(d)));
    Tensor v = linear_forward(tape, x, params.W_v, params.b_v);
    Tensor o = sigmoid(tape, linear_forward(tape, x, params.W_o, params.b_o));
    Tensor i_pre = linear_forward(tape, x, params.w_i, params.b_i);  // [1]
    Tensor f_pre = linear_forward(tape, x, params.w_f, params.b_f);  // [1]

    Tensor log_f = params.forget_activation == ForgetActivation::sigmoid
                       ? log_sigmoid(tape, f_pre)
                       : f_pre;

    const double m_new = std::fmax(log_f[0] + state.m[0], i_pre[0]);
    Tensor f = exp(tape, shift(tape, log_f, state.m[0] - m_new));
    Tensor i = exp(tape, shift(tape, i_pre, -m_new));

    Tensor C = add(tape, smul(tape, f, state.C), smul(tape, i, outer(tape, v, k)));
    Tensor n = add(tape, smul(tape, f, state.n), smul(tape, i, k));

    // The mathematical denominator is max(|n^T q|, 1); in the stabilized
    // frame the unit floor scales to exp(-m_t).
    Tensor denom = abs_floor(tape, dot(tape, n, q), std::exp(-m_new));
    Tensor h = mul(tape, o, sdiv(tape, matvec(tape, C, q), denom));
    return {C, n, h, Tensor::scalar(m_new)};
}

std::vector<Tensor> encode_sequence(Tape& tape, const std::vector<Tensor>& inputs,
                                    const CellParams& params) {
    if (inputs.empty()) throw DataError("encode_sequence: empty input sequence");
    const int d = params.hidden_dim();
    std::vector<Tensor> hidden;
    hidden.reserve(inputs.size());
    switch (params.kind) {
        case CellKind::lstm: {
            LstmState s = lstm_init_state(d);
            for (const Tensor& x : inputs) {
                s = lstm_step(tape, s, x, params.gate);
                hidden.push_back(s.h);
            }
            break;
        }
        case CellKind::slstm: {
            SLstmState s = slstm_init_state(d);
            for (const Tensor& x : inputs) {
                s = slstm_step(tape, s, x, params.gate);
                hidden.push_back(s.h);
            }
            break;
        }
        case CellKind::mlstm: {
            MLstmState s = mlstm_init_state(d);
            for (const Tensor& x : inputs) {
                s = mlstm_step(tape, s, x, params.mlstm);
                hidden.push_back(s.h);
            }
            break;
        }
    }
    return hidden;
}

GateParams make_gate_params(Rng& rng, int input_dim, int d, int num_heads,
                            ForgetActivation forget_activation) {
    if (input_dim <= 0 || d <= 0 || num_heads <= 0 || d % num_heads != 0) {
        throw UsageError("make_gate_params: need positive dims with num_heads dividing d (got in=" +
                         std::to_string(input_dim) + ", d=" + std::to_string(d) + ", heads=" +
                         std::to_string(num_heads) + ")");
    }
    const int block = d / num_heads;
    const double wb = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double rb = 1.0 / std::sqrt(static_cast<double>(block));

    GateParams p;
    p.num_heads = num_heads;
    p.forget_activation = forget_activation;
    p.W_z = uniform_tensor(rng, {d, input_dim}, wb);
    p.W_i = uniform_tensor(rng, {d, input_dim}, wb);
    p.W_f = uniform_tensor(rng, {d, input_dim}, wb);
    p.W_o = uniform_tensor(rng, {d, input_dim}, wb);
    p.R_z = uniform_tensor(rng, {num_heads, block, block}, rb);
    p.R_i = uniform_tensor(rng, {num_heads, block, block}, rb);
    p.R_f = uniform_tensor(rng, {num_heads, block, block}, rb);
    p.R_o = uniform_tensor(rng, {num_heads, block, block}, rb);
    p.b_z = Tensor::zeros({d}, true);
    p.b_i = Tensor::zeros({d}, true);
    p.b_f = forget_activation == ForgetActivation::sigmoid ? Tensor::full({d}, 1.0, true)
                                                           : Tensor::zeros({d}, true);
    p.b_o = Tensor::zeros({d}, true);
    return p;
}

MlstmParams make_mlstm_params(Rng& rng, int input_dim, int d,
                              ForgetActivation forget_activation) {
    if (input_dim <= 0 || d <= 0) {
        throw UsageError("make_mlstm_params: need positive dims");
    }
    const double wb = 1.0 / std::sqrt(static_cast<double>(input_dim));

    MlstmParams p;
    p.forget_activation = forget_activation;
    p.W_q = uniform_tensor(rng, {d, input_dim}, wb);
    p.W_k = uniform_tensor(rng, {d, input_dim}, wb);
    p.W_v = uniform_tensor(rng, {d, input_dim}, wb);
    p.W_o = uniform_tensor(rng, {d, input_dim}, wb);
    p.b_q = Tensor::zeros({d}, true);
    p.b_k = Tensor::zeros({d}, true);
    p.b_v = Tensor::zeros({d}, true);
    p.b_o = Tensor::zeros({d}, true);
    p.w_i = uniform_tensor(rng, {1, input_dim}, wb);
    p.w_f = uniform_tensor(rng, {1, input_dim}, wb);
    p.b_i = Tensor::zeros({1}, true);
    p.b_f = forget_activation == ForgetActivation::sigmoid ? Tensor::full({1}, 1.0, true)
                                                           : Tensor::zeros({1}, true);
    return p;
}

CellParams make_cell_params(Rng& rng, CellKind kind, int input_dim, int d, int num_heads,
                            ForgetActivation forget_activation) {
    CellParams p;
    p.kind = kind;
    if (kind == CellKind::mlstm) {
        p.mlstm = make_mlstm_params(rng, input_dim, d, forget_activation);
    } else {
        // The conventional LSTM always gates with sigmoids; +1 forget bias.
        p.gate = make_gate_params(rng, input_dim, d, num_heads,
                                  kind == CellKind::lstm ? ForgetActivation::sigmoid
                                                         : forget_activation);
    }
    return p;
}

}  // namespace xtrack
