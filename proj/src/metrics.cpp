#include "cleanset/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cleanset/errors.hpp"

namespace cleanset {

double auc(std::span<const double> scores, const std::vector<bool>& positive) {
    const std::size_t n = scores.size();
    if (positive.size() != n) throw DimensionError("auc: length mismatch");
    std::size_t n_pos = 0;
    for (bool p : positive) n_pos += p ? 1 : 0;
    std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetricError("auc: ground truth contains a single class");
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericError("auc: non-finite score");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks for tied groups
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (positive[order[k]]) rank_sum_pos += midrank;
        i = j + 1;
    }
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<double> class_distribution(const std::vector<bool>& is_clean,
                                       std::span<const int> noisy_labels, int class_count) {
    if (is_clean.size() != noisy_labels.size())
        throw DimensionError("class_distribution: length mismatch");
    std::vector<double> counts(class_count, 0.0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < is_clean.size(); ++i) {
        if (!is_clean[i]) continue;
        ++counts[noisy_labels[i]];
        ++total;
    }
    if (total == 0) throw DegenerateDataError("class_distribution: empty clean set");
    for (double& c : counts) c /= static_cast<double>(total);
    return counts;
}

double clean_precision(const std::vector<bool>& is_clean, std::span<const int> true_labels,
                       std::span<const int> noisy_labels) {
    std::size_t selected = 0, correct = 0;
    for (std::size_t i = 0; i < is_clean.size(); ++i) {
        if (!is_clean[i]) continue;
        ++selected;
        if (true_labels[i] == noisy_labels[i]) ++correct;
    }
    if (selected == 0) throw DegenerateDataError("clean_precision: empty clean set");
    return static_cast<double>(correct) / static_cast<double>(selected);
}

double variance(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size());
}

}  // namespace cleanset
