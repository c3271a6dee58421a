#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xtrack/metrics.hpp"
#include "xtrack/model.hpp"
#include "xtrack/scenario.hpp"

namespace xtrack {

struct AblationRow {
    CellKind encoder;
    CellKind decoder;
    MetricsReport metrics;
    double train_loss = 0.0;  // final epoch
};

// The reference grid: lstm and slstm encoders crossed with slstm, mlstm, and
// lstm decoders.
std::vector<std::pair<CellKind, CellKind>> ablation_grid();

// Trains and evaluates one model per encoder/decoder combination with a
// shared seed and budget. eval_set may equal train_set for smoke runs.
std::vector<AblationRow> ablate(const std::vector<Scenario>& train_set,
                                const std::vector<Scenario>& eval_set,
                                const ModelConfig& base_config,
                                const TrainConfig& train_config,
                                const std::vector<std::pair<CellKind, CellKind>>& grid);

// Fixed-width text table, one row per combination.
std::string ablation_table(const std::vector<AblationRow>& rows);

// Single JSON document with one record per combination.
std::string ablation_json(const std::vector<AblationRow>& rows);

}  // namespace xtrack
