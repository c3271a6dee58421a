#include "xtrack/ablate.hpp"

#include <cstdio>

#include "json.hpp"
#include "xtrack/errors.hpp"

namespace xtrack {

std::vector<std::pair<CellKind, CellKind>> ablation_grid() {
    std::vector<std::pair<CellKind, CellKind>> grid;
    for (const CellKind encoder : {CellKind::lstm, CellKind::slstm})
        for (const CellKind decoder : {CellKind::slstm, CellKind::mlstm, CellKind::lstm})
            grid.emplace_back(encoder, decoder);
    return grid;
}

std::vector<AblationRow> ablate(const std::vector<Scenario>& train_set,
                                const std::vector<Scenario>& eval_set,
                                const ModelConfig& base_config,
                                const TrainConfig& train_config,
                                const std::vector<std::pair<CellKind, CellKind>>& grid) {
    if (grid.empty()) throw UsageError("ablate: empty combination grid");
    std::vector<AblationRow> rows;
    for (const auto& [encoder, decoder] : grid) {
        ModelConfig cfg = base_config;
        cfg.encoder_cell = encoder;
        cfg.decoder_cell = decoder;
        const TrainResult result = train(train_set, {}, cfg, train_config);

        AblationRow row;
        row.encoder = encoder;
        row.decoder = decoder;
        row.train_loss = result.history.empty() ? 0.0 : result.history.back().train_loss;
        row.metrics = compute_metrics(eval_set, result.params);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::string out = "encoder  decoder  ade_m    fde_m    train_loss\n";
    for (const AblationRow& row : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-8s %-8s %-8.4f %-8.4f %.6f\n",
                      to_string(row.encoder), to_string(row.decoder), row.metrics.ade,
                      row.metrics.fde, row.train_loss);
        out += line;
    }
    return out;
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const AblationRow& row : rows) {
        nlohmann::ordered_json entry;
        entry["encoder"] = to_string(row.encoder);
        entry["decoder"] = to_string(row.decoder);
        entry["ade"] = row.metrics.ade;
        entry["fde"] = row.metrics.fde;
        nlohmann::ordered_json rmse;
        for (const auto& [second, value] : row.metrics.rmse)
            rmse[std::to_string(second) + "s"] = value;
        entry["rmse"] = rmse;
        entry["train_loss"] = row.train_loss;
        entry["n_scenarios"] = row.metrics.n_scenarios;
        entry["fingerprint"] = row.metrics.fingerprint;
        doc.push_back(entry);
    }
    return doc.dump(2) + "\n";
}

}  // namespace xtrack
