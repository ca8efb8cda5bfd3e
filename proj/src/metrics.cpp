#include "gmil/metrics.hpp"

#include <cmath>

#include "gmil/errors.hpp"

namespace gmil {

double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw DataError("auc: score/label length mismatch");
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    if (pairs == 0) throw DataError("auc undefined: single-class input");
    return wins / static_cast<double>(pairs);
}

Metrics evaluate_scores(const std::vector<double>& scores,
                        const std::vector<int>& labels, double threshold) {
    if (scores.empty() || scores.size() != labels.size())
        throw DataError("evaluate: empty or mismatched inputs");
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        if (labels[i] == 1) (pred ? tp : fn)++;
        else (pred ? fp : tn)++;
    }
    Metrics m;
    const std::size_t pos = tp + fn, neg = tn + fp;
    if (pos > 0 && neg > 0) m.auc = pairwise_auc(scores, labels);
    double recall_pos = pos > 0 ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
    double recall_neg = neg > 0 ? static_cast<double>(tn) / static_cast<double>(neg) : 0.0;
    if (pos > 0 && neg > 0) m.balanced_accuracy = 0.5 * (recall_pos + recall_neg);
    else m.balanced_accuracy = pos > 0 ? recall_pos : recall_neg;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    m.recall = recall_pos;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size()));
    return out;
}

}  // namespace gmil
