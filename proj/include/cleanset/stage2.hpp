#pragma once

#include <vector>

#include "cleanset/dataset.hpp"
#include "cleanset/model.hpp"
#include "cleanset/stage1.hpp"

namespace cleanset {

// w_c = N_c / N over the noisy labels of the full dataset.
std::vector<double> class_frequencies(std::span<const int> noisy_labels, int class_count);

double weighted_discrepancy(std::span<const double> p1, std::span<const double> p2, double w);

struct Stage2Options {
    double theta = 0.5;
    double lambda_min = 1.0;
    int max_iterations = 50;   // N_max head-only steps
    double head_lr_scale = 1.0;  // Step-3 learning rate = scale * current lr
    std::size_t batch_size = 64;
    bool weight_scores = false;  // partition on D (default) or D*
    // Reject a split that keeps less than this fraction of any class's
    // stage-1 clean members (it reflects class structure, not noise).
    double min_class_coverage = 0.1;
    GmmOptions gmm;
};

// Per-sample discrepancies over a sample subset, heads in current state.
struct ConsistencyReport {
    std::vector<std::size_t> sample_indices;  // into the dataset
    std::vector<double> d;                    // Eq-style L1 discrepancy
    std::vector<double> d_star;               // class-frequency weighted
    int iterations_used = 0;
    double lambda_min = 0.0;
};

// Trains only the two heads to spread their predictions apart on the
// stage-1 clean set (descent on -lambda_min * mean D*). The extractor is
// frozen, momentum buffers included. Returns the mean L_min over steps.
double maximize_head_discrepancy(ModelParams& model, OptimState& optim,
                                 const LabeledDataset& ds,
                                 const std::vector<std::size_t>& s1_clean,
                                 const std::vector<double>& frequencies,
                                 const Stage2Options& opts, Rng& batch_rng);

ConsistencyReport evaluate_consistency(const ModelParams& model, const LabeledDataset& ds,
                                       const std::vector<std::size_t>& s1_clean,
                                       const std::vector<double>& frequencies);

// Splits S1_clean by a single GMM over normalized discrepancies; the
// smaller-mean component is clean. Samples outside S1_clean stay noisy.
// A degenerate fit falls back to S2 = S1 (flagged in the result).
struct Stage2Result {
    Partition partition;
    ConsistencyReport consistency;
    bool fell_back = false;  // degenerate scores or empty clean set
};

Stage2Result stage2_partition(const ModelParams& model, const LabeledDataset& ds,
                              const Partition& s1, const Stage2Options& opts);

std::vector<std::size_t> clean_indices(const Partition& p);

}  // namespace cleanset
