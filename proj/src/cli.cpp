#include "xtrack/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xtrack/ablate.hpp"
#include "xtrack/certify.hpp"
#include "xtrack/config.hpp"
#include "xtrack/errors.hpp"
#include "xtrack/metrics.hpp"
#include "xtrack/model.hpp"
#include "xtrack/parallel.hpp"
#include "xtrack/scenario.hpp"

namespace xtrack {

namespace {

namespace fs = std::filesystem;

// Flag values stay optional so a config file provides defaults and explicit
// flags override it.
struct Flags {
    std::string config;
    std::string data;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<std::string> encoder;
    std::optional<std::string> decoder;
    std::optional<int> epochs;
    std::optional<int> batch;
    std::optional<double> dt;
};

RunConfig resolve_config(const Flags& flags) {
    RunConfig rc;
    if (!flags.config.empty()) apply_config_file(rc, flags.config);
    if (flags.seed) apply_config_key(rc, "seed", std::to_string(*flags.seed));
    if (flags.variant) apply_config_key(rc, "variant", *flags.variant);
    if (flags.encoder) apply_config_key(rc, "encoder", *flags.encoder);
    if (flags.decoder) apply_config_key(rc, "decoder", *flags.decoder);
    if (flags.epochs) apply_config_key(rc, "epochs", std::to_string(*flags.epochs));
    if (flags.batch) apply_config_key(rc, "batch_size", std::to_string(*flags.batch));
    if (flags.dt) apply_config_key(rc, "dt", std::to_string(*flags.dt));
    return rc;
}

void ensure_out_dir(const std::string& out) {
    if (out.empty()) throw UsageError("--out is required");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory '" + out + "'");
}

std::string archive_path(const std::string& data, const std::string& name) {
    if (data.size() >= 6 && data.substr(data.size() - 6) == ".jsonl") return data;
    return data + "/" + name;
}

std::vector<Scenario> load_archive(const std::string& data, const std::string& name) {
    return read_scenarios(archive_path(data, name));
}

void write_splits(const std::string& out, const DatasetSplits& splits) {
    write_scenarios(out + "/train.jsonl", splits.train);
    write_scenarios(out + "/val.jsonl", splits.val);
    write_scenarios(out + "/test.jsonl", splits.test);
    std::printf("wrote %zu train / %zu val / %zu test scenarios to %s\n",
                splits.train.size(), splits.val.size(), splits.test.size(),
                out.c_str());
}

DatasetSplits normalize_and_split(std::vector<Scenario> scenarios, const RunConfig& rc) {
    for (Scenario& s : scenarios) s = to_target_frame(s);
    return split_dataset(scenarios, rc.split);
}

int run_preprocess(const Flags& flags) {
    RunConfig rc = resolve_config(flags);
    if (flags.data.empty()) throw UsageError("--data is required (tracks CSV)");
    ensure_out_dir(flags.out);

    const std::vector<Track> tracks = load_tracks(flags.data, rc.format);
    std::vector<Scenario> scenarios =
        extract_scenarios(tracks, rc.dt, rc.model.t_obs, rc.model.t_f);
    if (scenarios.empty()) throw DataError("no scenarios extracted from '" + flags.data + "'");
    scenarios = balance_scenarios(scenarios, rc.split.seed);
    std::printf("extracted %zu balanced scenarios from %zu tracks\n", scenarios.size(),
                tracks.size());
    write_splits(flags.out, normalize_and_split(std::move(scenarios), rc));
    return 0;
}

int run_synth(const Flags& flags) {
    RunConfig rc = resolve_config(flags);
    ensure_out_dir(flags.out);

    SynthSpec spec = rc.synth;
    spec.dt = rc.dt;
    spec.t_obs = rc.model.t_obs;
    spec.t_f = rc.model.t_f;
    if (spec.keep_lane == 0 && spec.lane_change == 0) {
        spec.keep_lane = 32;
        spec.lane_change = 32;
    }
    std::vector<Scenario> scenarios = synth_generate(spec, rc.model.seed);
    std::printf("generated %zu synthetic scenarios\n", scenarios.size());
    write_splits(flags.out, normalize_and_split(std::move(scenarios), rc));
    return 0;
}

std::vector<Scenario> optional_archive(const std::string& path) {
    if (!std::ifstream(path)) return {};
    return read_scenarios(path);
}

int run_train(const Flags& flags) {
    RunConfig rc = resolve_config(flags);
    if (flags.data.empty()) throw UsageError("--data is required (scenario archive)");
    ensure_out_dir(flags.out);

    const std::vector<Scenario> train_set = load_archive(flags.data, "train.jsonl");
    std::vector<Scenario> val_set;
    if (archive_path(flags.data, "train.jsonl") != flags.data)
        val_set = optional_archive(flags.data + "/val.jsonl");

    TrainConfig tc = rc.train;
    tc.checkpoint_path = flags.out + "/checkpoint.txt";
    const TrainResult result = train(train_set, val_set, rc.model, tc);

    std::ofstream history(flags.out + "/history.csv");
    history << "epoch,train_loss,val_loss\n";
    char line[96];
    for (std::size_t e = 0; e < result.history.size(); ++e) {
        std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", e,
                      result.history[e].train_loss, result.history[e].val_loss);
        history << line;
    }
    if (!history) throw DataError("cannot write training history");

    std::printf("trained %d epochs on %zu scenarios (val %zu); best %s loss %.6f at epoch %d\n",
                tc.epochs, train_set.size(), val_set.size(),
                val_set.empty() ? "train" : "val", result.best_loss, result.best_epoch);
    std::printf("checkpoint: %s\n", tc.checkpoint_path.c_str());
    return 0;
}

ModelParams load_run_params(const Flags& flags, const RunConfig& rc) {
    const std::string path = flags.out + "/checkpoint.txt";
    return load_params(path, rc.model);
}

int run_evaluate(const Flags& flags) {
    RunConfig rc = resolve_config(flags);
    if (flags.data.empty()) throw UsageError("--data is required (scenario archive)");
    if (flags.out.empty()) throw UsageError("--out is required (run directory)");

    const std::vector<Scenario> scenarios = load_archive(flags.data, "test.jsonl");
    const ModelParams params = load_run_params(flags, rc);
    const MetricsReport report = compute_metrics(scenarios, params);

    std::ofstream out(flags.out + "/metrics.json");
    out << to_json(report);
    if (!out) throw DataError("cannot write metrics report");
    std::printf("ade %.6f m, fde %.6f m over %d scenarios (%s)\n", report.ade,
                report.fde, report.n_scenarios, report.variant.c_str());
    return 0;
}

int run_predict(const Flags& flags) {
    RunConfig rc = resolve_config(flags);
    if (flags.data.empty()) throw UsageError("--data is required (scenario archive)");
    if (flags.out.empty()) throw UsageError("--out is required (run directory)");

    const std::vector<Scenario> scenarios = load_archive(flags.data, "test.jsonl");
    if (scenarios.empty()) throw DataError("no scenarios to predict");
    const ModelParams params = load_run_params(flags, rc);

    std::vector<Prediction> preds(scenarios.size());
    parallel_for(scenarios.size(),
                 [&](std::size_t i) { preds[i] = forward(scenarios[i], params); });

    const bool controls = rc.model.variant == Variant::xtrack;
    std::ofstream out(flags.out + "/predictions.csv");
    out << (controls ? "scenario_id,t,x_pred,y_pred,ax_pred,psidot_pred\n"
                     : "scenario_id,t,x_pred,y_pred\n");
    char line[192];
    for (const Prediction& pred : preds) {
        for (std::size_t t = 0; t < pred.positions.size(); ++t) {
            if (controls) {
                std::snprintf(line, sizeof(line), "%s,%zu,%.17g,%.17g,%.17g,%.17g\n",
                              pred.scenario_id.c_str(), t + 1, pred.positions[t][0],
                              pred.positions[t][1], pred.controls[t][0],
                              pred.controls[t][1]);
            } else {
                std::snprintf(line, sizeof(line), "%s,%zu,%.17g,%.17g\n",
                              pred.scenario_id.c_str(), t + 1, pred.positions[t][0],
                              pred.positions[t][1]);
            }
            out << line;
        }
    }
    if (!out) throw DataError("cannot write predictions");
    std::printf("wrote %zu rows for %zu scenarios to %s/predictions.csv\n",
                preds.size() * static_cast<std::size_t>(rc.model.t_f), preds.size(),
                flags.out.c_str());
    return 0;
}

int run_gradcheck(const Flags& flags) {
    RunConfig rc = resolve_config(flags);
    const CertificationReport report = run_certification(rc.model.seed);
    std::fputs(report.to_string().c_str(), stdout);
    if (!report.all_passed()) {
        std::fputs("gradient certification FAILED\n", stdout);
        return 2;
    }
    std::fputs("gradient certification passed\n", stdout);
    return 0;
}

int run_ablate(const Flags& flags) {
    RunConfig rc = resolve_config(flags);
    if (flags.data.empty()) throw UsageError("--data is required (scenario archive)");
    ensure_out_dir(flags.out);

    const std::vector<Scenario> train_set = load_archive(flags.data, "train.jsonl");
    std::vector<Scenario> eval_set;
    if (archive_path(flags.data, "train.jsonl") != flags.data)
        eval_set = optional_archive(flags.data + "/test.jsonl");
    if (eval_set.empty()) eval_set = train_set;

    const std::vector<AblationRow> rows =
        ablate(train_set, eval_set, rc.model, rc.train, ablation_grid());

    std::ofstream out(flags.out + "/ablation.json");
    out << ablation_json(rows);
    if (!out) throw DataError("cannot write ablation report");
    std::fputs(ablation_table(rows).c_str(), stdout);
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"trajectory prediction pipeline"};
    app.require_subcommand(1);

    Flags flags;
    auto add_common = [&](CLI::App* cmd, bool wants_data) {
        cmd->add_option("--config", flags.config, "key=value config file");
        cmd->add_option("--seed", flags.seed, "seed for init, shuffling, and splits");
        if (wants_data) cmd->add_option("--data", flags.data, "input path");
        cmd->add_option("--out", flags.out, "output directory");
        return cmd;
    };
    auto add_model = [&](CLI::App* cmd) {
        cmd->add_option("--variant", flags.variant, "xtraj or xtrack");
        cmd->add_option("--encoder", flags.encoder, "encoder cell: lstm, slstm, mlstm");
        cmd->add_option("--decoder", flags.decoder, "decoder cell: lstm, slstm, mlstm");
        return cmd;
    };

    CLI::App* preprocess =
        add_common(app.add_subcommand("preprocess", "tracks CSV -> scenario archives"), true);
    preprocess->add_option("--dt", flags.dt, "sampling interval, s");

    CLI::App* synth =
        add_common(app.add_subcommand("synth", "generate synthetic scenario archives"), false);
    synth->add_option("--dt", flags.dt, "sampling interval, s");

    CLI::App* train_cmd =
        add_model(add_common(app.add_subcommand("train", "train a model"), true));
    train_cmd->add_option("--epochs", flags.epochs, "training epochs");
    train_cmd->add_option("--batch", flags.batch, "batch size");

    add_model(add_common(
        app.add_subcommand("evaluate", "metrics report from a checkpoint"), true));
    add_model(add_common(
        app.add_subcommand("predict", "per-step trajectory CSV from a checkpoint"), true));

    add_common(app.add_subcommand("gradcheck", "run the gradient certification suite"),
               false);

    CLI::App* ablate_cmd = add_model(add_common(
        app.add_subcommand("ablate", "train and evaluate every encoder/decoder combo"),
        true));
    ablate_cmd->add_option("--epochs", flags.epochs, "training epochs per combo");
    ablate_cmd->add_option("--batch", flags.batch, "batch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("preprocess")) return run_preprocess(flags);
        if (app.got_subcommand("synth")) return run_synth(flags);
        if (app.got_subcommand("train")) return run_train(flags);
        if (app.got_subcommand("evaluate")) return run_evaluate(flags);
        if (app.got_subcommand("predict")) return run_predict(flags);
        if (app.got_subcommand("gradcheck")) return run_gradcheck(flags);
        if (app.got_subcommand("ablate")) return run_ablate(flags);
        return 1;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 2;
    }
}

}  // namespace xtrack
