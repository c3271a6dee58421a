#pragma once

#include <map>
#include <string>
#include <vector>

#include "xtrack/model.hpp"
#include "xtrack/scenario.hpp"

namespace xtrack {

// Mean Euclidean distance between prediction and ground truth over every
// scenario and horizon step.
double ade(const std::vector<Prediction>& preds, const std::vector<Scenario>& gts);

// Distance at the final horizon step only.
double fde(const std::vector<Prediction>& preds, const std::vector<Scenario>& gts);

// Root of the mean squared displacement at one horizon step (0-based). The
// squared x and y differences are averaged over scenarios without halving.
double rmse_at(const std::vector<Prediction>& preds, const std::vector<Scenario>& gts,
               int step);

struct MetricsReport {
    double ade = 0.0;
    double fde = 0.0;
    std::map<int, double> rmse;  // horizon seconds -> meters
    int n_scenarios = 0;
    std::string variant;
    std::string fingerprint;
};

// Runs the model over every scenario (parallel across scenarios, reduction in
// scenario order) and fills a report. rmse carries every whole second that
// fits inside the prediction horizon.
MetricsReport compute_metrics(const std::vector<Scenario>& scenarios,
                              const ModelParams& params);

MetricsReport metrics_from_predictions(const std::vector<Prediction>& preds,
                                       const std::vector<Scenario>& gts,
                                       const ModelConfig& config);

// Single JSON document; key order is fixed so identical reports give
// identical bytes.
std::string to_json(const MetricsReport& report);

}  // namespace xtrack
