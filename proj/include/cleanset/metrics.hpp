#pragma once

#include <span>
#include <vector>

namespace cleanset {

// Mann-Whitney AUC with midrank handling of ties. Throws
// UndefinedMetricError when the truth is single-class.
double auc(std::span<const double> scores, const std::vector<bool>& positive);

// Proportion of the clean set belonging to each noisy class.
// Throws DegenerateDataError on an empty clean set.
std::vector<double> class_distribution(const std::vector<bool>& is_clean,
                                       std::span<const int> noisy_labels, int class_count);

// Fraction of selected samples that are truly clean (noisy == true label).
double clean_precision(const std::vector<bool>& is_clean, std::span<const int> true_labels,
                       std::span<const int> noisy_labels);

double variance(std::span<const double> v);

}  // namespace cleanset
