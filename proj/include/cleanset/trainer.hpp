#pragma once

#include <string>
#include <vector>

#include "cleanset/config.hpp"
#include "cleanset/dataset.hpp"
#include "cleanset/model.hpp"
#include "cleanset/stage1.hpp"
#include "cleanset/stage2.hpp"

namespace cleanset {

// ---- MixMatch-lite -----------------------------------------------------

// Temperature sharpening of probability rows: p^(1/T), renormalized.
Matrix sharpen_rows(const Matrix& probs, double temperature);

// Guessed labels for unlabeled samples: sharpened average of both heads'
// predictions over K Gaussian feature jitters.
Matrix guess_labels(const ModelParams& model, const Matrix& noisy_x, double temperature, int k,
                    double jitter_sigma, Rng& rng);

// Convex combination of two (input, target) batches with a fixed lambda.
void mix_rows(const Matrix& x1, const Matrix& t1, const Matrix& x2, const Matrix& t2,
              double lambda, Matrix* x_out, Matrix* t_out);

// One prepared training batch for the semi-supervised step.
struct Step4Batch {
    Matrix clean_x, clean_t;  // mixup-ed labeled batch
    Matrix noisy_x, noisy_t;  // mixup-ed unlabeled batch (may have 0 rows)
    Matrix raw_x;             // unmixed clean+noisy inputs for the D* term
    std::vector<double> raw_w;
};

// MixMatch assembly: label guessing, Beta(alpha, alpha) mixup with
// lambda' = max(lambda, 1 - lambda) against a shuffled pool of both batches.
Step4Batch prepare_step4_batch(const ModelParams& model, const Matrix& clean_x,
                               const Matrix& clean_t, const Matrix& noisy_x,
                               const std::vector<double>& raw_weights, const TrainConfig& cfg,
                               Rng& rng);

struct Step4Losses {
    double lx = 0.0, lu = 0.0, lmax = 0.0;
    double total() const { return lx + lu + lmax; }
};

// Deterministic given the batch. L_X + lambda_u*L_U routes to all groups,
// the lambda_max*D* term only to the extractor.
Step4Losses step4_gradients(const ModelParams& model, const Step4Batch& batch, double lambda_u,
                            double lambda_max, Gradients& grads);

Step4Losses semi_supervised_step(ModelParams& model, OptimState& optim, const Step4Batch& batch,
                                 double lambda_u, double lambda_max);

// ---- training loop -----------------------------------------------------

// Plain cross-entropy on the noisy labels, both heads, for a given number
// of epochs. Used for warm-up and for the CE-only baseline.
void train_cross_entropy_epochs(ModelParams& model, OptimState& optim, const LabeledDataset& ds,
                                int epochs, std::size_t batch_size, Rng& shuffle_rng,
                                double* mean_loss = nullptr);

// One cross-entropy pass over just the given sample rows (selection-only
// training on a clean subset).
void train_cross_entropy_on_rows(ModelParams& model, OptimState& optim, const LabeledDataset& ds,
                                 std::vector<std::size_t> rows, std::size_t batch_size,
                                 Rng& shuffle_rng, double* mean_loss = nullptr);

struct EpochRecord {
    int epoch = 0;
    double test_acc_head1 = 0.0, test_acc_head2 = 0.0, test_acc_ensemble = 0.0;
    double auc_s1, auc_s2;            // NaN when ground truth is single-class
    double precision_s1, precision_s2;
    std::size_t n_s1_clean = 0, n_s2_clean = 0;
    std::vector<double> s1_class_distribution, s2_class_distribution;
    double loss_x = 0.0, loss_u = 0.0, loss_min = 0.0, loss_max = 0.0;
    std::string note;  // fallback events, empty otherwise
};

struct RunReport {
    TrainConfig config;
    double warmup_test_acc = 0.0;
    double train_noise_rate = 0.0;
    std::vector<EpochRecord> epochs;
};

std::string report_to_json(const RunReport& report);
std::string report_to_csv(const RunReport& report);
// Writes report.json and report.csv under out_dir.
void write_run_report(const std::string& out_dir, const RunReport& report);

struct TrainOutput {
    RunReport report;
    ModelParams model;
    LabeledDataset train_set;
};

LabeledDataset build_train_dataset(const TrainConfig& cfg);
LabeledDataset build_test_dataset(const TrainConfig& cfg);

// Accuracy of the head-ensemble (averaged softmax) against true labels;
// head = 1 or 2 evaluates a single head.
double evaluate_accuracy(const ModelParams& model, const LabeledDataset& ds, int head = 0);

// Warm-up plus the per-epoch four-step loop. If dump_dir is nonempty,
// per-epoch partition dumps are written there.
TrainOutput run_training(const TrainConfig& cfg, const std::string& dump_dir = "");

}  // namespace cleanset
