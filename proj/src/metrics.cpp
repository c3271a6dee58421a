#include "xtrack/metrics.hpp"

#include <cmath>

#include "json.hpp"
#include "xtrack/errors.hpp"
#include "xtrack/parallel.hpp"

namespace xtrack {

namespace {

void check_pair(const std::vector<Prediction>& preds, const std::vector<Scenario>& gts) {
    if (preds.empty()) throw DataError("metrics: no scenarios");
    if (preds.size() != gts.size())
        throw DimensionError("metrics: " + std::to_string(preds.size()) +
                             " predictions vs " + std::to_string(gts.size()) +
                             " scenarios");
    const std::size_t t_f = preds[0].positions.size();
    for (std::size_t n = 0; n < preds.size(); ++n) {
        if (preds[n].positions.size() != t_f)
            throw DimensionError("metrics: prediction " + std::to_string(n) +
                                 " has a different horizon");
        if (static_cast<int>(t_f) != gts[n].t_f)
            throw DimensionError("metrics: prediction " + std::to_string(n) +
                                 " horizon does not match its scenario");
    }
}

double displacement(const Prediction& pred, const Scenario& gt, std::size_t step) {
    const std::size_t i = static_cast<std::size_t>(gt.t_obs) + step;
    const double dx = pred.positions[step][0] - gt.x[i];
    const double dy = pred.positions[step][1] - gt.y[i];
    return std::hypot(dx, dy);
}

}  // namespace

double ade(const std::vector<Prediction>& preds, const std::vector<Scenario>& gts) {
    check_pair(preds, gts);
    const std::size_t t_f = preds[0].positions.size();
    double sum = 0.0;
    for (std::size_t n = 0; n < preds.size(); ++n)
        for (std::size_t t = 0; t < t_f; ++t) sum += displacement(preds[n], gts[n], t);
    return sum / (static_cast<double>(preds.size()) * static_cast<double>(t_f));
}

double fde(const std::vector<Prediction>& preds, const std::vector<Scenario>& gts) {
    check_pair(preds, gts);
    const std::size_t last = preds[0].positions.size() - 1;
    double sum = 0.0;
    for (std::size_t n = 0; n < preds.size(); ++n)
        sum += displacement(preds[n], gts[n], last);
    return sum / static_cast<double>(preds.size());
}

double rmse_at(const std::vector<Prediction>& preds, const std::vector<Scenario>& gts,
               int step) {
    check_pair(preds, gts);
    if (step < 0 || static_cast<std::size_t>(step) >= preds[0].positions.size())
        throw UsageError("rmse_at: step " + std::to_string(step) +
                         " outside horizon 0.." +
                         std::to_string(preds[0].positions.size() - 1));
    double sum = 0.0;
    for (std::size_t n = 0; n < preds.size(); ++n) {
        const std::size_t i =
            static_cast<std::size_t>(gts[n].t_obs) + static_cast<std::size_t>(step);
        const double dx = preds[n].positions[static_cast<std::size_t>(step)][0] - gts[n].x[i];
        const double dy = preds[n].positions[static_cast<std::size_t>(step)][1] - gts[n].y[i];
        sum += dx * dx + dy * dy;
    }
    return std::sqrt(sum / static_cast<double>(preds.size()));
}

MetricsReport metrics_from_predictions(const std::vector<Prediction>& preds,
                                       const std::vector<Scenario>& gts,
                                       const ModelConfig& config) {
    check_pair(preds, gts);
    MetricsReport report;
    report.ade = ade(preds, gts);
    report.fde = fde(preds, gts);
    report.n_scenarios = static_cast<int>(preds.size());
    report.variant = to_string(config.variant);
    report.fingerprint = config.fingerprint();

    const double dt = gts[0].dt;
    const int t_f = gts[0].t_f;
    for (int second = 1;; ++second) {
        const int step = static_cast<int>(std::lround(second / dt)) - 1;
        if (step >= t_f) break;
        if (step < 0) continue;
        report.rmse[second] = rmse_at(preds, gts, step);
    }
    return report;
}

MetricsReport compute_metrics(const std::vector<Scenario>& scenarios,
                              const ModelParams& params) {
    if (scenarios.empty()) throw DataError("metrics: no scenarios");
    std::vector<Prediction> preds(scenarios.size());
    parallel_for(scenarios.size(),
                 [&](std::size_t i) { preds[i] = forward(scenarios[i], params); });
    return metrics_from_predictions(preds, scenarios, params.config);
}

std::string to_json(const MetricsReport& report) {
    nlohmann::ordered_json doc;
    doc["ade"] = report.ade;
    doc["fde"] = report.fde;
    nlohmann::ordered_json rmse;
    for (const auto& [second, value] : report.rmse)
        rmse[std::to_string(second) + "s"] = value;
    doc["rmse"] = rmse;
    doc["n_scenarios"] = report.n_scenarios;
    doc["variant"] = report.variant;
    doc["fingerprint"] = report.fingerprint;
    return doc.dump(2) + "\n";
}

}  // namespace xtrack
