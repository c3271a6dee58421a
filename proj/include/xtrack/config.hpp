#pragma once

#include <string>

#include "xtrack/model.hpp"
#include "xtrack/scenario.hpp"

namespace xtrack {

// Everything a run can configure, grouped by consumer. One seed feeds both
// model initialization and the training shuffle so a single flag pins a run.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    FormatConfig format;
    SynthSpec synth;
    SplitSpec split;
    double dt = 0.2;  // scenario sampling interval, s
};

// Applies one key=value assignment. Throws ConfigError on unknown keys or
// unparsable values; the caller prefixes file/line context.
void apply_config_key(RunConfig& config, const std::string& key,
                      const std::string& value);

// Plain-text config: one key=value per line, '#' starts a comment, blank
// lines ignored. Keys are listed in the README.
RunConfig load_run_config(const std::string& path);
void apply_config_file(RunConfig& config, const std::string& path);

}  // namespace xtrack
