#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cleanset/matrix.hpp"

namespace cleanset {

// Feature vectors with hidden true labels and the noisy labels used for
// training. True labels exist only for evaluation and noise bookkeeping.
struct LabeledDataset {
    Matrix features;  // N x d
    std::vector<int> true_labels;
    std::vector<int> noisy_labels;
    std::vector<std::int64_t> ids;
    int class_count = 0;

    std::size_t size() const { return features.rows; }
    double noise_rate() const;
    void validate() const;  // throws on broken invariants
};

// Text format: header "N d C", then per sample "id, d floats, true, noisy"
// (comma separated, 17 significant digits).
void write_dataset(const std::string& path, const LabeledDataset& ds);
LabeledDataset read_dataset(const std::string& path);

}  // namespace cleanset
