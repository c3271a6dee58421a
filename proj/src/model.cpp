#include "xtrack/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "xtrack/errors.hpp"
#include "xtrack/optim.hpp"
#include "xtrack/parallel.hpp"
#include "xtrack/rng.hpp"

namespace xtrack {

namespace {

Tensor uniform_tensor(Rng& rng, std::vector<int> shape, double bound) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

const std::vector<double>& vehicle_x(const Scenario& s, int v) {
    return v == 0 ? s.x : s.neighbors.slots[static_cast<std::size_t>(v - 1)].x;
}
const std::vector<double>& vehicle_y(const Scenario& s, int v) {
    return v == 0 ? s.y : s.neighbors.slots[static_cast<std::size_t>(v - 1)].y;
}
const std::vector<double>& vehicle_v(const Scenario& s, int v) {
    return v == 0 ? s.v : s.neighbors.slots[static_cast<std::size_t>(v - 1)].v;
}
const std::vector<double>& vehicle_a(const Scenario& s, int v) {
    return v == 0 ? s.a : s.neighbors.slots[static_cast<std::size_t>(v - 1)].a;
}

// Fixed full-scale divisors for the embedding inputs. Target-frame positions
// span tens of meters, and feeding them to the gates raw saturates every
// squashing activation at initialization. Dividing each channel by a nominal
// full scale is a pure reparameterization of W_emb (the function family is
// unchanged), but it starts training inside the active region. Controls are
// divided by their physical limits.
constexpr double kTrajFullScale[4] = {50.0, 5.0, 25.0, 3.0};  // x, y, v, a
constexpr double kTrackFullScale[2] = {9.0, kYawRateLimit};   // a_x, psi_dot

// Observed-feature sequence for one vehicle. xtraj feeds the recorded state
// (x, y, v, a); xtrack feeds (a_x, psi_dot) derived from the history alone,
// so inference never touches future samples.
std::vector<Tensor> vehicle_features(const Scenario& s, int v,
                                     const ModelConfig& cfg) {
    std::vector<Tensor> feats;
    const auto n = static_cast<std::size_t>(cfg.t_obs);
    if (cfg.variant == Variant::xtraj) {
        for (std::size_t t = 0; t < n; ++t) {
            feats.push_back(Tensor::from(
                {4}, {vehicle_x(s, v)[t] / kTrajFullScale[0],
                      vehicle_y(s, v)[t] / kTrajFullScale[1],
                      vehicle_v(s, v)[t] / kTrajFullScale[2],
                      vehicle_a(s, v)[t] / kTrajFullScale[3]}));
        }
        return feats;
    }
    const std::vector<double> hx(vehicle_x(s, v).begin(), vehicle_x(s, v).begin() + n);
    const std::vector<double> hy(vehicle_y(s, v).begin(), vehicle_y(s, v).begin() + n);
    const DerivedMotion dm = derive_controls(hx, hy, s.dt);
    for (std::size_t t = 0; t < n; ++t)
        feats.push_back(Tensor::from({2}, {dm.a_x[t] / kTrackFullScale[0],
                                           dm.psi_dot[t] / kTrackFullScale[1]}));
    return feats;
}

void check_scenario(const Scenario& s, const ModelConfig& cfg) {
    if (!s.normalized)
        throw UsageError("scenario '" + s.scenario_id +
                         "' is not normalized to the target frame");
    if (s.t_obs != cfg.t_obs || s.t_f != cfg.t_f)
        throw UsageError("scenario window " + std::to_string(s.t_obs) + "+" +
                         std::to_string(s.t_f) + " does not match the model window " +
                         std::to_string(cfg.t_obs) + "+" + std::to_string(cfg.t_f));
    if (!(s.dt > 0.0)) throw UsageError("scenario dt must be positive");
    const auto n = static_cast<std::size_t>(s.length());
    if (s.x.size() != n || s.y.size() != n || s.v.size() != n || s.a.size() != n)
        throw DataError("scenario '" + s.scenario_id + "' has a malformed target series");
    for (const auto& slot : s.neighbors.slots)
        if (slot.x.size() != n || slot.y.size() != n || slot.v.size() != n ||
            slot.a.size() != n)
            throw DataError("scenario '" + s.scenario_id + "' has a malformed neighbor series");
}

std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

const char* to_string(Variant v) {
    return v == Variant::xtraj ? "xtraj" : "xtrack";
}

Variant variant_from_string(const std::string& name) {
    if (name == "xtraj") return Variant::xtraj;
    if (name == "xtrack") return Variant::xtrack;
    throw UsageError("unknown variant '" + name + "' (expected xtraj or xtrack)");
}

std::string ModelConfig::fingerprint() const {
    std::string fp;
    fp += "variant=";
    fp += to_string(variant);
    fp += ";encoder=";
    fp += to_string(encoder_cell);
    fp += ";decoder=";
    fp += to_string(decoder_cell);
    fp += ";embed=" + std::to_string(embed_dim);
    fp += ";encoder_hidden=" + std::to_string(encoder_hidden);
    fp += ";decoder_hidden=" + std::to_string(decoder_hidden);
    fp += ";gat_heads=" + std::to_string(gat_heads);
    fp += ";leaky_slope=" + format_g17(leaky_slope);
    fp += ";t_obs=" + std::to_string(t_obs);
    fp += ";t_f=" + std::to_string(t_f);
    fp += ";features=" + std::to_string(input_features());
    return fp;
}

void ModelConfig::validate() const {
    if (embed_dim < 1 || encoder_hidden < 1 || decoder_hidden < 1 || gat_heads < 1)
        throw UsageError("model dimensions must be positive");
    if (t_f < 1) throw UsageError("t_f must be >= 1");
    const int min_obs = variant == Variant::xtrack ? 3 : 1;
    if (t_obs < min_obs)
        throw UsageError("t_obs must be >= " + std::to_string(min_obs) +
                         " for variant " + to_string(variant));
    if (!(leaky_slope > 0.0) || !(leaky_slope < 1.0))
        throw UsageError("leaky_slope must lie in (0, 1)");
    if (encoder_hidden % gat_heads != 0)
        throw UsageError("encoder_hidden must be divisible by gat_heads");
}

std::vector<Tensor> ModelParams::parameters() const {
    std::vector<Tensor> out = {W_emb, b_emb};
    for (const Tensor& t : encoder.parameters()) out.push_back(t);
    for (const Tensor& t : interaction.parameters()) out.push_back(t);
    for (const Tensor& t : decoder.parameters()) out.push_back(t);
    out.push_back(W_out);
    out.push_back(b_out);
    return out;
}

ModelParams init_model(const ModelConfig& config) {
    config.validate();
    Rng rng(config.seed);
    ModelParams p;
    p.config = config;
    const int feat = config.input_features();
    p.W_emb = uniform_tensor(rng, {config.embed_dim, feat}, 1.0 / std::sqrt(feat));
    p.b_emb = Tensor::zeros({config.embed_dim});
    p.encoder = make_cell_params(rng, config.encoder_cell, config.embed_dim,
                                 config.encoder_hidden, 1, ForgetActivation::exp);
    p.interaction = make_interaction_params(rng, config.encoder_hidden,
                                            config.encoder_hidden, config.encoder_hidden,
                                            config.gat_heads, true);
    p.decoder = make_cell_params(rng, config.decoder_cell, 2 * config.encoder_hidden,
                                 config.decoder_hidden, 1, ForgetActivation::exp);
    p.W_out = uniform_tensor(rng, {2, config.decoder_hidden},
                             1.0 / std::sqrt(config.decoder_hidden));
    p.b_out = Tensor::zeros({2});
    return p;
}

ForwardTrace forward_trace(Tape& tape, const Scenario& scenario,
                           const ModelParams& params) {
    const ModelConfig& cfg = params.config;
    check_scenario(scenario, cfg);

    std::vector<Tensor> node_states;
    for (int v = 0; v <= NeighborGrid::kSlotCount; ++v) {
        std::vector<Tensor> embedded;
        for (const Tensor& f : vehicle_features(scenario, v, cfg)) {
            embedded.push_back(leaky_relu(
                tape, linear_forward(tape, f, params.W_emb, params.b_emb),
                cfg.leaky_slope));
        }
        node_states.push_back(encode_sequence(tape, embedded, params.encoder).back());
    }

    const StarGraph graph = build_star_graph(NeighborGrid::kSlotCount);
    const Tensor g = interaction_vector(tape, node_states, graph, params.interaction);
    const Tensor decoder_input = concat(tape, node_states[0], g);
    const std::vector<Tensor> decoder_states = encode_sequence(
        tape, std::vector<Tensor>(static_cast<std::size_t>(cfg.t_f), decoder_input),
        params.decoder);

    ForwardTrace trace;
    std::vector<Tensor> head;
    for (const Tensor& h : decoder_states) {
        head.push_back(leaky_relu(
            tape, linear_forward(tape, h, params.W_out, params.b_out), cfg.leaky_slope));
    }

    if (cfg.variant == Variant::xtraj) {
        trace.positions = std::move(head);
        return trace;
    }

    const MotionLimits limits;
    for (const Tensor& raw : head)
        trace.controls.push_back(clamp_controls(tape, raw, limits));

    const auto n = static_cast<std::size_t>(cfg.t_obs);
    const std::vector<double> hx(scenario.x.begin(), scenario.x.begin() + n);
    const std::vector<double> hy(scenario.y.begin(), scenario.y.begin() + n);
    const DerivedMotion dm = derive_controls(hx, hy, scenario.dt);
    const KinematicState last = dm.state_at(cfg.t_obs - 1);
    const Tensor initial = Tensor::from({4}, {last.x, last.y, last.v, last.psi});
    trace.positions = rollout(tape, initial, trace.controls, scenario.dt);
    return trace;
}

Prediction forward(const Scenario& scenario, const ModelParams& params) {
    Tape tape;
    tape.set_recording(false);
    const ForwardTrace trace = forward_trace(tape, scenario, params);
    Prediction pred;
    pred.scenario_id = scenario.scenario_id;
    for (const Tensor& p : trace.positions) pred.positions.push_back({p[0], p[1]});
    for (const Tensor& c : trace.controls) pred.controls.push_back({c[0], c[1]});
    return pred;
}

Tensor loss_tensor(Tape& tape, const ForwardTrace& trace, const Scenario& scenario,
                   double lambda_controls) {
    const auto t_f = static_cast<int>(trace.positions.size());
    if (t_f != scenario.t_f)
        throw DimensionError("prediction has " + std::to_string(t_f) +
                             " steps, scenario expects " + std::to_string(scenario.t_f));

    Tensor acc;
    for (int k = 0; k < t_f; ++k) {
        const std::size_t i = static_cast<std::size_t>(scenario.t_obs + k);
        const Tensor gt = Tensor::from({2}, {scenario.x[i], scenario.y[i]});
        const Tensor diff = sub(tape, trace.positions[static_cast<std::size_t>(k)], gt);
        const Tensor sq = dot(tape, diff, diff);
        acc = k == 0 ? sq : add(tape, acc, sq);
    }
    Tensor total = scale(tape, acc, 1.0 / (2.0 * t_f));

    if (lambda_controls != 0.0 && !trace.controls.empty()) {
        const DerivedMotion dm = derive_controls(scenario.x, scenario.y, scenario.dt);
        const ControlSequence gt_controls =
            dm.controls(scenario.t_obs - 1, scenario.t_f);
        Tensor aux;
        for (int k = 0; k < t_f; ++k) {
            const auto i = static_cast<std::size_t>(k);
            const Tensor gt = Tensor::from({2}, {gt_controls.a_x[i], gt_controls.psi_dot[i]});
            const Tensor diff = sub(tape, trace.controls[i], gt);
            const Tensor sq = dot(tape, diff, diff);
            aux = k == 0 ? sq : add(tape, aux, sq);
        }
        total = add(tape, total, scale(tape, aux, lambda_controls / (2.0 * t_f)));
    }
    return total;
}

double evaluate_loss(const Scenario& scenario, const ModelParams& params,
                     double lambda_controls) {
    Tape tape;
    tape.set_recording(false);
    const ForwardTrace trace = forward_trace(tape, scenario, params);
    return loss_tensor(tape, trace, scenario, lambda_controls)[0];
}

TrainResult train(const std::vector<Scenario>& train_set,
                  const std::vector<Scenario>& val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config) {
    if (train_set.empty()) throw DataError("training set is empty");
    if (train_config.batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (train_config.epochs < 0) throw UsageError("epochs must be >= 0");

    ModelParams params = init_model(model_config);
    std::vector<Tensor> tensors = params.parameters();
    // Grad buffers live before any workers run, so parallel forwards only read.
    for (const Tensor& t : tensors) t.ensure_grad();

    Adam::Config adam_config;
    adam_config.learning_rate = train_config.learning_rate;
    Adam optimizer(tensors, adam_config);

    Rng shuffler(train_config.seed);
    TrainResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    result.best_epoch = -1;

    const std::size_t n = train_set.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        shuffler.shuffle(order);
        double epoch_sum = 0.0;

        for (std::size_t begin = 0; begin < n;
             begin += static_cast<std::size_t>(train_config.batch_size)) {
            const std::size_t m =
                std::min<std::size_t>(static_cast<std::size_t>(train_config.batch_size),
                                      n - begin);
            std::vector<Tape> tapes(m);
            std::vector<Tensor> roots(m);
            std::vector<double> raw(m);
            parallel_for(m, [&](std::size_t i) {
                const Scenario& s = train_set[order[begin + i]];
                const ForwardTrace trace = forward_trace(tapes[i], s, params);
                const Tensor loss =
                    loss_tensor(tapes[i], trace, s, train_config.lambda_controls);
                raw[i] = loss[0];
                roots[i] = scale(tapes[i], loss, 1.0 / static_cast<double>(m));
            });
            for (std::size_t i = 0; i < m; ++i) {
                if (!std::isfinite(raw[i]))
                    throw NumericError(
                        "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(begin / static_cast<std::size_t>(
                                                   train_config.batch_size)));
                epoch_sum += raw[i];
                tapes[i].backward(roots[i]);
            }

            if (train_config.clip_norm > 0.0) {
                double sq = 0.0;
                for (const Tensor& t : tensors)
                    for (const double g : t.grad()) sq += g * g;
                const double norm = std::sqrt(sq);
                if (norm > train_config.clip_norm) {
                    const double factor = train_config.clip_norm / norm;
                    for (const Tensor& t : tensors)
                        for (double& g : t.grad()) g *= factor;
                }
            }
            optimizer.step();
        }

        EpochStats stats;
        stats.train_loss = epoch_sum / static_cast<double>(n);
        stats.val_loss = std::numeric_limits<double>::quiet_NaN();
        if (!val_set.empty()) {
            std::vector<double> per(val_set.size());
            parallel_for(val_set.size(), [&](std::size_t i) {
                per[i] = evaluate_loss(val_set[i], params, train_config.lambda_controls);
            });
            double sum = 0.0;
            for (const double v : per) sum += v;
            stats.val_loss = sum / static_cast<double>(val_set.size());
        }
        result.history.push_back(stats);

        const double monitored = val_set.empty() ? stats.train_loss : stats.val_loss;
        if (monitored < result.best_loss) {
            result.best_loss = monitored;
            result.best_epoch = epoch;
            if (!train_config.checkpoint_path.empty())
                save_params(params, train_config.checkpoint_path);
        }
    }

    result.params = params;
    return result;
}

void save_params(const ModelParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    const std::vector<Tensor> tensors = params.parameters();
    out << "xtrack-checkpoint 1\n";
    out << "fingerprint " << params.config.fingerprint() << '\n';
    out << "tensors " << tensors.size() << '\n';
    for (const Tensor& t : tensors) {
        out << t.size();
        for (int i = 0; i < t.size(); ++i) out << ' ' << format_g17(t[i]);
        out << '\n';
    }
    if (!out) throw DataError("write to '" + path + "' failed");
}

ModelParams load_params(const std::string& path, const ModelConfig& expected) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string word;
    int version = -1;
    if (!(in >> word >> version) || word != "xtrack-checkpoint")
        throw DataError("'" + path + "' is not a parameter checkpoint");
    if (version != 1)
        throw DataError("'" + path + "': unsupported checkpoint version " +
                        std::to_string(version));
    std::string fingerprint;
    if (!(in >> word >> fingerprint) || word != "fingerprint")
        throw DataError("'" + path + "': missing config fingerprint");
    if (fingerprint != expected.fingerprint())
        throw DataError("checkpoint config mismatch: file has '" + fingerprint +
                        "', model expects '" + expected.fingerprint() + "'");

    ModelParams params = init_model(expected);
    std::vector<Tensor> tensors = params.parameters();
    std::size_t count = 0;
    if (!(in >> word >> count) || word != "tensors" || count != tensors.size())
        throw DataError("'" + path + "': wrong tensor count");
    for (Tensor& t : tensors) {
        int size = 0;
        if (!(in >> size) || size != t.size())
            throw DataError("'" + path + "': tensor size mismatch");
        for (int i = 0; i < size; ++i) {
            double v;
            if (!(in >> v)) throw DataError("'" + path + "': truncated checkpoint");
            t[i] = v;
        }
    }
    return params;
}

}  // namespace xtrack
