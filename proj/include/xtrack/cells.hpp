// Recurrent cells: a conventional LSTM, an sLSTM with exponential gating
// and a normalizer state, and an mLSTM with matrix memory. All steps are
// recorded on a Tape and differentiable end to end.
//
// The exponential-gate cells are computed in a stabilized log-domain frame:
// a running maximum m_t of the log gate pre-activations is carried along,
// and c/n (sLSTM) or C/n (mLSTM) are stored scaled by exp(-m_t). The hidden
// state is invariant to that frame, so outputs equal the mathematical value
// of the unstabilized equations whenever the latter is representable. m is
// held as plain constants (never differentiated); this is exact because the
// output does not depend on m.
#pragma once

#include <string>
#include <vector>

#include "xtrack/rng.hpp"
#include "xtrack/tensor.hpp"

namespace xtrack {

enum class ForgetActivation { sigmoid, exp };
enum class CellKind { lstm, slstm, mlstm };

const char* to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& name);

// Gate parameters shared by the LSTM and sLSTM cells. Recurrent maps are
// stored as num_heads square blocks [H, d/H, d/H]: memory mixing is
// possible within a head but structurally impossible across heads.
struct GateParams {
    Tensor W_z, W_i, W_f, W_o;  // [d, in]
    Tensor R_z, R_i, R_f, R_o;  // [H, d/H, d/H]
    Tensor b_z, b_i, b_f, b_o;  // [d]
    int num_heads = 1;
    ForgetActivation forget_activation = ForgetActivation::exp;

    int hidden_dim() const { return W_z.shape()[0]; }
    int input_dim() const { return W_z.shape()[1]; }
    std::vector<Tensor> parameters() const;
};

// mLSTM parameters: query/key/value/output projections plus scalar input
// and forget gates. There are no recurrent weights.
struct MlstmParams {
    Tensor W_q, W_k, W_v, W_o;  // [d, in]
    Tensor b_q, b_k, b_v, b_o;  // [d]
    Tensor w_i, w_f;            // [1, in]
    Tensor b_i, b_f;            // [1]
    ForgetActivation forget_activation = ForgetActivation::exp;

    int hidden_dim() const { return W_q.shape()[0]; }
    int input_dim() const { return W_q.shape()[1]; }
    std::vector<Tensor> parameters() const;
};

// Wrapper selecting one concrete cell; exactly one of gate/mlstm is used.
struct CellParams {
    CellKind kind = CellKind::slstm;
    GateParams gate;    // lstm, slstm
    MlstmParams mlstm;  // mlstm

    int hidden_dim() const {
        return kind == CellKind::mlstm ? mlstm.hidden_dim() : gate.hidden_dim();
    }
    std::vector<Tensor> parameters() const {
        return kind == CellKind::mlstm ? mlstm.parameters() : gate.parameters();
    }
};

struct LstmState {
    Tensor c, h;  // [d]
};

struct SLstmState {
    Tensor c, n, h;  // [d]; c and n live in the stabilized frame
    Tensor m;        // [d] log-domain running maximum, plain constants
};

struct MLstmState {
    Tensor C;     // [d, d] matrix memory, stabilized frame
    Tensor n, h;  // [d]
    Tensor m;     // [1] scalar stabilizer, plain constant
};

// Zero initial states. The stabilizer starts at -infinity, the identity of
// the running maximum, which makes the first step's normalizer exactly 1.
LstmState lstm_init_state(int d);
SLstmState slstm_init_state(int d);
MLstmState mlstm_init_state(int d);

LstmState lstm_step(Tape& tape, const LstmState& state, const Tensor& x,
                    const GateParams& params);
SLstmState slstm_step(Tape& tape, const SLstmState& state, const Tensor& x,
                      const GateParams& params);
MLstmState mlstm_step(Tape& tape, const MLstmState& state, const Tensor& x,
                      const MlstmParams& params);

// Left-to-right unroll from a zero initial state; returns every hidden
// state (the final one is .back()). Throws DataError on an empty sequence.
std::vector<Tensor> encode_sequence(Tape& tape, const std::vector<Tensor>& inputs,
                                    const CellParams& params);

// Initialization: weights ~ uniform(+-1/sqrt(fan_in)); recurrent blocks use
// fan_in = d/H; forget bias +1 for sigmoid forget, 0 for exp; other biases 0.
GateParams make_gate_params(Rng& rng, int input_dim, int d, int num_heads,
                            ForgetActivation forget_activation);
MlstmParams make_mlstm_params(Rng& rng, int input_dim, int d,
                              ForgetActivation forget_activation);
CellParams make_cell_params(Rng& rng, CellKind kind, int input_dim, int d, int num_heads,
                            ForgetActivation forget_activation);

}  // namespace xtrack
