#pragma once

#include <span>
#include <vector>

namespace clqas::metrics {

struct ClassMetrics {
    double acc = 0.0;
    /// Mean recall over the classes present in the labels.
    double bacc = 0.0;
    /// Positive class (label 1); 0 when precision or recall is undefined.
    double f1 = 0.0;
    /// Set when one class never occurs in the labels (its recall is left out of bacc).
    bool class_absent = false;
    bool f1_undefined = false;
};

/// Binary metrics. Throws DomainError on empty input, ShapeError on length mismatch.
ClassMetrics compute_metrics(std::span<const int> predictions, std::span<const int> labels);

/// R[i][j] = test accuracy on task j after training through task i (0-based, square).
using AccuracyMatrix = std::vector<std::vector<double>>;

struct TransferMetrics {
    /// mean_{j<M} R[M][j] - R[j][j]
    double bwt = 0.0;
    /// mean_{j>0} R[j-1][j] - chance
    double fwt = 0.0;
    /// Mean forgetting over the first M-1 tasks.
    double forgetting = 0.0;
    /// max_{j<=i<=M} R[i][j] - R[M][j] per task (0 for the last).
    std::vector<double> per_task_forgetting;
};

/**
 * Backward/forward transfer and forgetting of a fully populated M x M matrix
 * (M = last row). A single task gives all zeros. Throws DomainError for an
 * empty, ragged, or non-finite matrix.
 */
TransferMetrics transfer_metrics(const AccuracyMatrix& r, double chance = 0.5);

double mean(std::span<const double> xs);
/// Population standard deviation.
double population_std(std::span<const double> xs);

} // namespace clqas::metrics
