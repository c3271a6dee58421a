// The two prediction models. Both share one pipeline: per-vehicle feature
// embedding, a shared recurrent encoder, graph attention over the star
// topology at the last observed step, and a recurrent decoder driven by
// [target encoding ; interaction vector] at every future step.
//
//   xtraj:  the decoder head emits positions directly.
//   xtrack: the head emits (a_x, psi_dot), smoothly clamped to the motion
//           limits, and positions come out of the kinematic rollout. The
//           rollout stays on the tape, so training differentiates through it
//           and predicted motion is feasible for any parameter values.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "xtrack/cells.hpp"
#include "xtrack/graph.hpp"
#include "xtrack/kinematics.hpp"
#include "xtrack/scenario.hpp"
#include "xtrack/tensor.hpp"

namespace xtrack {

enum class Variant { xtraj, xtrack };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct ModelConfig {
    Variant variant = Variant::xtraj;
    CellKind encoder_cell = CellKind::slstm;
    CellKind decoder_cell = CellKind::lstm;
    int embed_dim = 32;
    int encoder_hidden = 64;   // also the interaction vector width
    int decoder_hidden = 128;
    int gat_heads = 4;
    double leaky_slope = 0.1;
    int t_obs = 15;
    int t_f = 25;
    std::uint64_t seed = 1;

    // 4 observed features (x, y, v, a) for xtraj; 2 derived controls
    // (a_x, psi_dot) for xtrack.
    int input_features() const { return variant == Variant::xtraj ? 4 : 2; }

    // Canonical key=value string of every shape-affecting field. Checkpoints
    // store it and refuse to load into a model with a different one.
    std::string fingerprint() const;

    void validate() const;
};

struct ModelParams {
    Tensor W_emb, b_emb;            // [embed_dim, input_features], [embed_dim]
    CellParams encoder;             // embed_dim -> encoder_hidden, shared by all vehicles
    InteractionParams interaction;  // encoder_hidden -> encoder_hidden
    CellParams decoder;             // 2*encoder_hidden -> decoder_hidden
    Tensor W_out, b_out;            // [2, decoder_hidden], [2]
    ModelConfig config;

    // Fixed serialization/optimizer order.
    std::vector<Tensor> parameters() const;
};

ModelParams init_model(const ModelConfig& config);

// Differentiable forward pass: per-step position tensors (shape [2]) and,
// for xtrack, the clamped per-step control tensors.
struct ForwardTrace {
    std::vector<Tensor> positions;
    std::vector<Tensor> controls;
};

ForwardTrace forward_trace(Tape& tape, const Scenario& scenario,
                           const ModelParams& params);

struct Prediction {
    std::string scenario_id;
    std::vector<std::array<double, 2>> positions;  // t_f
    std::vector<std::array<double, 2>> controls;   // t_f for xtrack, else empty
};

// Plain inference wrapper around forward_trace with recording off.
Prediction forward(const Scenario& scenario, const ModelParams& params);

// Mean squared error over all future steps and both coordinates, plus an
// optional lambda-weighted MSE between predicted controls and the controls
// derived from the ground-truth track (xtrack only).
Tensor loss_tensor(Tape& tape, const ForwardTrace& trace,
                   const Scenario& scenario, double lambda_controls);
double evaluate_loss(const Scenario& scenario, const ModelParams& params,
                     double lambda_controls);

struct TrainConfig {
    int batch_size = 32;
    int epochs = 10;
    double learning_rate = 1e-3;
    double clip_norm = 0.0;        // global gradient norm; 0 disables clipping
    double lambda_controls = 0.0;  // auxiliary control-MSE weight
    std::string checkpoint_path;   // best-on-validation snapshot when set
    std::uint64_t seed = 1;
};

struct EpochStats {
    double train_loss;
    double val_loss;  // NaN when no validation set was given
};

struct TrainResult {
    ModelParams params;  // parameters after the final epoch
    std::vector<EpochStats> history;
    double best_loss;  // best monitored loss (validation, or training without one)
    int best_epoch;
};

// Deterministic mini-batch Adam training. Batch forwards run on the worker
// pool; gradients accumulate serially in ascending batch position, so the
// result is independent of XTRACK_THREADS.
TrainResult train(const std::vector<Scenario>& train_set,
                  const std::vector<Scenario>& val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config);

// Decimal-text checkpoint: a version line, the config fingerprint, then one
// line per tensor. Lossless for 64-bit values.
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path, const ModelConfig& expected);

}  // namespace xtrack
