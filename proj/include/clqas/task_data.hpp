#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clqas {

struct Example {
    std::vector<double> x;
    int y = 0;
    /// Position on the source timeline (financial) or row index (ECG); -1 if unknown.
    std::int64_t t = -1;
};

struct TaskDataset {
    std::size_t task_id = 0;
    std::string source;  // "financial", "ecg" or "synthetic"
    std::string group;   // regime span or record ids
    std::vector<Example> train, val, test;

    std::size_t feature_dim() const { return train.empty() ? 0 : train.front().x.size(); }
};

} // namespace clqas
