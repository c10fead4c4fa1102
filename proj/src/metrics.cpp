#include "clqas/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "clqas/errors.hpp"

namespace clqas::metrics {

ClassMetrics compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
    if (labels.empty()) throw DomainError("compute_metrics: empty input");
    if (predictions.size() != labels.size()) throw ShapeError("compute_metrics: predictions and labels differ in length");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if ((labels[i] != 0 && labels[i] != 1) || (predictions[i] != 0 && predictions[i] != 1))
            throw DomainError("compute_metrics: labels must be binary");
        const bool p = predictions[i] == 1, y = labels[i] == 1;
        tp += p && y;
        fp += p && !y;
        fn += !p && y;
        tn += !p && !y;
    }
    ClassMetrics m;
    m.acc = static_cast<double>(tp + tn) / static_cast<double>(labels.size());
    const std::size_t pos = tp + fn, neg = tn + fp;
    double recall_sum = 0.0;
    int classes = 0;
    if (pos) {
        recall_sum += static_cast<double>(tp) / static_cast<double>(pos);
        ++classes;
    }
    if (neg) {
        recall_sum += static_cast<double>(tn) / static_cast<double>(neg);
        ++classes;
    }
    m.class_absent = classes < 2;
    m.bacc = recall_sum / classes;
    if (tp == 0) {
        m.f1 = 0.0;
        m.f1_undefined = pos == 0 || tp + fp == 0;
    } else {
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = static_cast<double>(tp) / static_cast<double>(pos);
        m.f1 = 2.0 * precision * recall / (precision + recall);
    }
    return m;
}

TransferMetrics transfer_metrics(const AccuracyMatrix& r, double chance) {
    const std::size_t n = r.size();
    if (n == 0) throw DomainError("transfer_metrics: empty accuracy matrix");
    for (const auto& row : r) {
        if (row.size() != n) throw DomainError("transfer_metrics: accuracy matrix must be square and fully populated");
        for (double v : row)
            if (!std::isfinite(v)) throw DomainError("transfer_metrics: non-finite accuracy entry");
    }
    TransferMetrics t;
    t.per_task_forgetting.assign(n, 0.0);
    if (n == 1) return t;
    const std::size_t last = n - 1;
    for (std::size_t j = 0; j < last; ++j) {
        t.bwt += r[last][j] - r[j][j];
        double best = r[j][j];
        for (std::size_t i = j + 1; i <= last; ++i) best = std::max(best, r[i][j]);
        t.per_task_forgetting[j] = best - r[last][j];
        t.forgetting += t.per_task_forgetting[j];
    }
    for (std::size_t j = 1; j < n; ++j) t.fwt += r[j - 1][j] - chance;
    t.bwt /= static_cast<double>(last);
    t.forgetting /= static_cast<double>(last);
    t.fwt /= static_cast<double>(last);
    return t;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) throw DomainError("mean of an empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

} // namespace clqas::metrics
