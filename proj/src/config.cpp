#include "xtrack/config.hpp"

#include <cstdlib>
#include <fstream>

#include "xtrack/cells.hpp"
#include "xtrack/errors.hpp"

namespace xtrack {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const long v = std::strtol(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
    return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected an unsigned integer, got '" +
                          value + "'");
    return v;
}

}  // namespace

void apply_config_key(RunConfig& config, const std::string& key,
                      const std::string& value) {
    if (key == "variant") {
        config.model.variant = variant_from_string(value);
    } else if (key == "encoder") {
        config.model.encoder_cell = cell_kind_from_string(value);
    } else if (key == "decoder") {
        config.model.decoder_cell = cell_kind_from_string(value);
    } else if (key == "embed_dim") {
        config.model.embed_dim = parse_int(key, value);
    } else if (key == "encoder_hidden") {
        config.model.encoder_hidden = parse_int(key, value);
    } else if (key == "decoder_hidden") {
        config.model.decoder_hidden = parse_int(key, value);
    } else if (key == "gat_heads") {
        config.model.gat_heads = parse_int(key, value);
    } else if (key == "leaky_slope") {
        config.model.leaky_slope = parse_double(key, value);
    } else if (key == "t_obs") {
        config.model.t_obs = parse_int(key, value);
    } else if (key == "t_f") {
        config.model.t_f = parse_int(key, value);
    } else if (key == "seed") {
        const std::uint64_t seed = parse_u64(key, value);
        config.model.seed = seed;
        config.train.seed = seed;
        config.split.seed = seed;
    } else if (key == "batch_size") {
        config.train.batch_size = parse_int(key, value);
    } else if (key == "epochs") {
        config.train.epochs = parse_int(key, value);
    } else if (key == "learning_rate") {
        config.train.learning_rate = parse_double(key, value);
    } else if (key == "clip_norm") {
        config.train.clip_norm = parse_double(key, value);
    } else if (key == "lambda_controls") {
        config.train.lambda_controls = parse_double(key, value);
    } else if (key == "dt") {
        config.dt = parse_double(key, value);
    } else if (key == "frame_rate") {
        config.format.frame_rate = parse_double(key, value);
    } else if (key == "col_frame") {
        config.format.frame = value;
    } else if (key == "col_id") {
        config.format.id = value;
    } else if (key == "col_x") {
        config.format.x = value;
    } else if (key == "col_y") {
        config.format.y = value;
    } else if (key == "col_x_velocity") {
        config.format.x_velocity = value;
    } else if (key == "col_y_velocity") {
        config.format.y_velocity = value;
    } else if (key == "col_x_acceleration") {
        config.format.x_acceleration = value;
    } else if (key == "col_y_acceleration") {
        config.format.y_acceleration = value;
    } else if (key == "col_lane") {
        config.format.lane = value;
    } else if (key == "synth_keep_lane") {
        config.synth.keep_lane = parse_int(key, value);
    } else if (key == "synth_lane_change") {
        config.synth.lane_change = parse_int(key, value);
    } else if (key == "synth_speed_min") {
        config.synth.speed_min = parse_double(key, value);
    } else if (key == "synth_speed_max") {
        config.synth.speed_max = parse_double(key, value);
    } else if (key == "synth_noise") {
        config.synth.noise = parse_double(key, value);
    } else if (key == "synth_lane_width") {
        config.synth.lane_width = parse_double(key, value);
    } else if (key == "synth_lane_change_duration") {
        config.synth.lane_change_duration = parse_double(key, value);
    } else if (key == "train_frac") {
        config.split.train = parse_double(key, value);
    } else if (key == "val_frac") {
        config.split.val = parse_double(key, value);
    } else if (key == "test_frac") {
        config.split.test = parse_double(key, value);
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
}

void apply_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value, got '" + text + "'");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        try {
            apply_config_key(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const UsageError& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

RunConfig load_run_config(const std::string& path) {
    RunConfig config;
    apply_config_file(config, path);
    return config;
}

}  // namespace xtrack
