#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cleanset/matrix.hpp"
#include "cleanset/rng.hpp"

namespace cleanset {

// Which parameter groups a loss term is allowed to touch.
enum class ParamGroup { All, HeadsOnly, ExtractorOnly };

struct LinearLayer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out
};

// MLP feature extractor with two linear classifier heads on top.
// ReLU between extractor layers, linear output on the last one.
struct ModelParams {
    std::vector<LinearLayer> extractor;
    LinearLayer head1;
    LinearLayer head2;

    std::size_t input_dim() const { return extractor.front().weight.cols; }
    std::size_t feature_dim() const { return extractor.back().weight.rows; }
    std::size_t class_count() const { return head1.weight.rows; }

    bool operator==(const ModelParams& o) const;
};

// Same shapes as ModelParams, holds gradients or momentum buffers.
struct Gradients {
    std::vector<LinearLayer> extractor;
    LinearLayer head1;
    LinearLayer head2;

    void scale(double s);
    bool all_finite() const;
};

Gradients zeros_like(const ModelParams& model);

// Heads share the init distribution but draw from separate seed streams,
// so they start from genuinely different decision boundaries.
ModelParams make_mlp_model(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                           std::size_t feature_dim, std::size_t class_count, Rng& init_rng,
                           Rng& head2_rng);

struct ForwardResult {
    Matrix features;  // pre-normalization extractor outputs
    Matrix logits1, logits2;
    Matrix probs1, probs2;
};

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> activations;  // post-ReLU output of each hidden layer
    ForwardResult out;
};

ForwardResult forward(const ModelParams& model, const Matrix& batch);
ForwardCache forward_cached(const ModelParams& model, const Matrix& batch);

// Accumulates dLoss/dParams into `grads` from per-logit upstream gradients.
// `group` routes the gradient: HeadsOnly skips the extractor entirely,
// ExtractorOnly backprops through the heads without touching their grads.
void backward(const ModelParams& model, const ForwardCache& cache, const Matrix& dlogits1,
              const Matrix& dlogits2, ParamGroup group, Gradients& grads);

struct OptimState {
    Gradients momentum;  // buffers mirror parameters
    double learning_rate = 0.02;
    double momentum_coef = 0.9;
    double weight_decay = 0.0005;
};

OptimState make_optim(const ModelParams& model, double lr, double momentum, double weight_decay);

// SGD with momentum and decoupled weight decay (weights only, not biases).
// Groups outside `mask` are left bit-identical, momentum buffers included.
void sgd_step(ModelParams& model, OptimState& optim, const Gradients& grads, ParamGroup mask);

// Versioned binary checkpoint of model + optimizer state; bit-exact round trip.
void save_checkpoint(const std::string& path, const ModelParams& model, const OptimState& optim);
void load_checkpoint(const std::string& path, ModelParams& model, OptimState& optim);

// ---- loss terms -------------------------------------------------------
// Each helper returns the scalar loss (mean over the batch) and the
// gradient w.r.t. both heads' logits for a plain descent step on it.

struct LossGrad {
    double value = 0.0;
    Matrix dlogits1, dlogits2;
};

// Mean over batch and heads of cross-entropy against (possibly soft) targets.
LossGrad cross_entropy_loss(const ForwardResult& fwd, const Matrix& targets);

// Mean over batch and heads of squared error between probs and targets.
LossGrad squared_error_loss(const ForwardResult& fwd, const Matrix& targets);

// Per-sample L1 discrepancy between the two heads' probabilities.
double discrepancy(std::span<const double> p1, std::span<const double> p2);

// Mean over batch of w_i * D(p1_i, p2_i). The returned gradient is for
// descent on +value; scale by -lambda_min (heads) or +lambda_max (extractor).
LossGrad weighted_discrepancy_loss(const ForwardResult& fwd,
                                   const std::vector<double>& sample_weights);

// Pushes dLoss/dProbs through the softmax Jacobian of one row.
void softmax_backward_row(std::span<const double> probs, std::span<const double> dprobs,
                          std::span<double> dlogits);

}  // namespace cleanset
