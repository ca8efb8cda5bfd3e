#pragma once

#include <optional>
#include <vector>

namespace gmil {

// One test fold's scores. AUC is the brute-force pairwise definition
// (ties count 0.5) and is absent when only one class is present.
struct Metrics {
    std::optional<double> auc;
    double balanced_accuracy = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels);

Metrics evaluate_scores(const std::vector<double>& scores,
                        const std::vector<int>& labels, double threshold = 0.5);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace gmil
