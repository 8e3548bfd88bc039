#pragma once

#include <span>
#include <vector>

namespace cleanset {

// Two-component 1D Gaussian mixture. Components are kept ordered so that
// mean_a <= mean_b after fitting.
struct Gmm1DFit {
    double weight_a = 0.5, weight_b = 0.5;
    double mean_a = 0.0, mean_b = 0.0;
    double var_a = 1.0, var_b = 1.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    std::vector<double> loglik_trace;  // one entry per EM iteration
};

struct PosteriorRow {
    double p_component_a = 0.5;
    double p_component_b = 0.5;
};

enum class CleanComponent { LargerMean, SmallerMean };

struct GmmOptions {
    int max_iter = 100;
    double tol = 1e-6;
    double var_floor = 1e-6;
};

// EM fit. Deterministic init: means at the 10th/90th percentiles, both
// variances at the overall variance, weights 0.5/0.5.
// Throws InsufficientDataError for < 4 values and DegenerateDataError when
// all values coincide within 1e-12.
Gmm1DFit fit_gmm1d(std::span<const double> values, const GmmOptions& opts = {});

PosteriorRow posterior(const Gmm1DFit& fit, double value);

// Marks a value clean iff the posterior of the designated component
// exceeds theta.
std::vector<bool> partition_by_posterior(std::span<const double> values, const Gmm1DFit& fit,
                                         double theta, CleanComponent clean);

}  // namespace cleanset
