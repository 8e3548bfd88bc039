#include "cleanset/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "cleanset/errors.hpp"
#include "cleanset/metrics.hpp"

namespace cleanset {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), src.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(src.row(rows[i]).begin(), src.row(rows[i]).end(), out.row(i).begin());
    return out;
}

Matrix onehot_rows(const LabeledDataset& ds, std::span<const std::size_t> rows) {
    Matrix t(rows.size(), ds.class_count, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) t(i, ds.noisy_labels[rows[i]]) = 1.0;
    return t;
}

Matrix vconcat(const Matrix& a, const Matrix& b) {
    if (a.rows == 0) return b;
    if (b.rows == 0) return a;
    if (a.cols != b.cols) throw DimensionError("vconcat: column mismatch");
    Matrix out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

Partition all_clean_partition(std::size_t n, int class_count) {
    Partition p;
    p.stage = Stage::S1;
    p.is_clean.assign(n, true);
    p.score.assign(n, 0.5);
    p.posterior_clean.assign(n, 1.0);
    p.class_grouping.resize(class_count);
    std::iota(p.class_grouping.begin(), p.class_grouping.end(), 0);
    return p;
}

}  // namespace

Matrix sharpen_rows(const Matrix& probs, double temperature) {
    Matrix out(probs.rows, probs.cols);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < probs.cols; ++j) {
            out(i, j) = std::pow(std::max(probs(i, j), 0.0), 1.0 / temperature);
            sum += out(i, j);
        }
        if (sum <= 0.0) throw NumericError("sharpen_rows: zero row mass");
        for (std::size_t j = 0; j < probs.cols; ++j) out(i, j) /= sum;
    }
    return out;
}

Matrix guess_labels(const ModelParams& model, const Matrix& noisy_x, double temperature, int k,
                    double jitter_sigma, Rng& rng) {
    if (k < 1) throw ConfigError("mixmatch.k: must be >= 1");
    Matrix avg(noisy_x.rows, model.class_count(), 0.0);
    Matrix jittered = noisy_x;
    for (int rep = 0; rep < k; ++rep) {
        if (jitter_sigma > 0.0) {
            jittered = noisy_x;
            for (double& v : jittered.data) v += jitter_sigma * rng.gaussian();
        }
        ForwardResult fr = forward(model, jittered);
        for (std::size_t i = 0; i < avg.data.size(); ++i)
            avg.data[i] += 0.5 * (fr.probs1.data[i] + fr.probs2.data[i]);
    }
    for (double& v : avg.data) v /= static_cast<double>(k);
    return sharpen_rows(avg, temperature);
}

void mix_rows(const Matrix& x1, const Matrix& t1, const Matrix& x2, const Matrix& t2,
              double lambda, Matrix* x_out, Matrix* t_out) {
    if (!x1.same_shape(x2) || !t1.same_shape(t2))
        throw DimensionError("mix_rows: shape mismatch");
    *x_out = Matrix(x1.rows, x1.cols);
    *t_out = Matrix(t1.rows, t1.cols);
    for (std::size_t i = 0; i < x1.data.size(); ++i)
        x_out->data[i] = lambda * x1.data[i] + (1.0 - lambda) * x2.data[i];
    for (std::size_t i = 0; i < t1.data.size(); ++i)
        t_out->data[i] = lambda * t1.data[i] + (1.0 - lambda) * t2.data[i];
}

Step4Batch prepare_step4_batch(const ModelParams& model, const Matrix& clean_x,
                               const Matrix& clean_t, const Matrix& noisy_x,
                               const std::vector<double>& raw_weights, const TrainConfig& cfg,
                               Rng& rng) {
    Step4Batch b;
    b.raw_x = vconcat(clean_x, noisy_x);
    b.raw_w = raw_weights;
    if (b.raw_w.size() != b.raw_x.rows)
        throw DimensionError("prepare_step4_batch: weight count != raw rows");

    Matrix noisy_t;
    if (noisy_x.rows > 0)
        noisy_t = guess_labels(model, noisy_x, cfg.sharpen_t, cfg.mix_k, cfg.jitter_sigma, rng);

    Matrix pool_x = b.raw_x;
    Matrix pool_t = vconcat(clean_t, noisy_t);
    std::vector<std::size_t> perm(pool_x.rows);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    double lambda = rng.beta(cfg.mixup_alpha, cfg.mixup_alpha);
    lambda = std::max(lambda, 1.0 - lambda);

    std::vector<std::size_t> part(perm.begin(), perm.begin() + clean_x.rows);
    mix_rows(clean_x, clean_t, gather_rows(pool_x, part), gather_rows(pool_t, part), lambda,
             &b.clean_x, &b.clean_t);
    if (noisy_x.rows > 0) {
        std::vector<std::size_t> part2(perm.begin() + clean_x.rows, perm.end());
        mix_rows(noisy_x, noisy_t, gather_rows(pool_x, part2), gather_rows(pool_t, part2),
                 lambda, &b.noisy_x, &b.noisy_t);
    }
    return b;
}

Step4Losses step4_gradients(const ModelParams& model, const Step4Batch& batch, double lambda_u,
                            double lambda_max, Gradients& grads) {
    Step4Losses losses;

    ForwardCache fc_clean = forward_cached(model, batch.clean_x);
    LossGrad lx = cross_entropy_loss(fc_clean.out, batch.clean_t);
    losses.lx = lx.value;
    backward(model, fc_clean, lx.dlogits1, lx.dlogits2, ParamGroup::All, grads);

    if (batch.noisy_x.rows > 0 && lambda_u != 0.0) {
        ForwardCache fc_noisy = forward_cached(model, batch.noisy_x);
        LossGrad lu = squared_error_loss(fc_noisy.out, batch.noisy_t);
        losses.lu = lambda_u * lu.value;
        for (double& v : lu.dlogits1.data) v *= lambda_u;
        for (double& v : lu.dlogits2.data) v *= lambda_u;
        backward(model, fc_noisy, lu.dlogits1, lu.dlogits2, ParamGroup::All, grads);
    }

    if (lambda_max != 0.0) {
        ForwardCache fc_raw = forward_cached(model, batch.raw_x);
        LossGrad lm = weighted_discrepancy_loss(fc_raw.out, batch.raw_w);
        losses.lmax = lambda_max * lm.value;
        for (double& v : lm.dlogits1.data) v *= lambda_max;
        for (double& v : lm.dlogits2.data) v *= lambda_max;
        // consistency maximization: descend on +lambda_max * D*, extractor only
        backward(model, fc_raw, lm.dlogits1, lm.dlogits2, ParamGroup::ExtractorOnly, grads);
    }
    return losses;
}

Step4Losses semi_supervised_step(ModelParams& model, OptimState& optim, const Step4Batch& batch,
                                 double lambda_u, double lambda_max) {
    Gradients grads = zeros_like(model);
    Step4Losses losses = step4_gradients(model, batch, lambda_u, lambda_max, grads);
    sgd_step(model, optim, grads, ParamGroup::All);
    return losses;
}

void train_cross_entropy_epochs(ModelParams& model, OptimState& optim, const LabeledDataset& ds,
                                int epochs, std::size_t batch_size, Rng& shuffle_rng,
                                double* mean_loss) {
    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (int e = 0; e < epochs; ++e) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch_size) {
            std::size_t end = std::min(start + batch_size, n);
            std::span<const std::size_t> rows(order.data() + start, end - start);
            Matrix bx = gather_rows(ds.features, rows);
            Matrix bt = onehot_rows(ds, rows);
            ForwardCache fc = forward_cached(model, bx);
            LossGrad lg = cross_entropy_loss(fc.out, bt);
            Gradients g = zeros_like(model);
            backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);
            sgd_step(model, optim, g, ParamGroup::All);
            loss_sum += lg.value;
            ++steps;
        }
    }
    if (mean_loss) *mean_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
}

void train_cross_entropy_on_rows(ModelParams& model, OptimState& optim, const LabeledDataset& ds,
                                 std::vector<std::size_t> rows, std::size_t batch_size,
                                 Rng& shuffle_rng, double* mean_loss) {
    shuffle_rng.shuffle(rows);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < rows.size(); start += batch_size) {
        std::size_t end = std::min(start + batch_size, rows.size());
        std::span<const std::size_t> batch(rows.data() + start, end - start);
        Matrix bx = gather_rows(ds.features, batch);
        Matrix bt = onehot_rows(ds, batch);
        ForwardCache fc = forward_cached(model, bx);
        LossGrad lg = cross_entropy_loss(fc.out, bt);
        Gradients g = zeros_like(model);
        backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);
        sgd_step(model, optim, g, ParamGroup::All);
        loss_sum += lg.value;
        ++steps;
    }
    if (mean_loss) *mean_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
}

LabeledDataset build_train_dataset(const TrainConfig& cfg) {
    std::uint64_t data_seed = derive_stream(cfg.seed, "data");
    std::uint64_t noise_seed = derive_stream(cfg.seed, "noise");
    LabeledDataset clean = make_blobs(cfg.data, data_seed, "points");
    return apply_noise(clean, cfg.noise, noise_seed);
}

LabeledDataset build_test_dataset(const TrainConfig& cfg) {
    // same class geometry (same center stream), fresh balanced points
    BlobSpec spec = cfg.data;
    spec.n_per_class = cfg.test_n_per_class;
    spec.imbalance_ratios.clear();
    std::uint64_t data_seed = derive_stream(cfg.seed, "data");
    return make_blobs(spec, data_seed, "test-points");
}

double evaluate_accuracy(const ModelParams& model, const LabeledDataset& ds, int head) {
    ForwardResult fr = forward(model, ds.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::size_t best = 0;
        double bp = -1.0;
        for (std::size_t j = 0; j < fr.probs1.cols; ++j) {
            double p = head == 1   ? fr.probs1(i, j)
                       : head == 2 ? fr.probs2(i, j)
                                   : 0.5 * (fr.probs1(i, j) + fr.probs2(i, j));
            if (p > bp) {
                bp = p;
                best = j;
            }
        }
        if (static_cast<int>(best) == ds.true_labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace {

std::vector<bool> truly_clean(const LabeledDataset& ds) {
    std::vector<bool> t(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) t[i] = ds.true_labels[i] == ds.noisy_labels[i];
    return t;
}

double safe_auc(std::span<const double> scores, const std::vector<bool>& positive) {
    try {
        return auc(scores, positive);
    } catch (const UndefinedMetricError&) {
        return kNaN;
    }
}

double safe_precision(const std::vector<bool>& is_clean, const LabeledDataset& ds) {
    try {
        return clean_precision(is_clean, ds.true_labels, ds.noisy_labels);
    } catch (const DegenerateDataError&) {
        return kNaN;
    }
}

std::vector<double> safe_distribution(const std::vector<bool>& is_clean,
                                      const LabeledDataset& ds) {
    try {
        return class_distribution(is_clean, ds.noisy_labels, ds.class_count);
    } catch (const DegenerateDataError&) {
        return {};
    }
}

void dump_partitions(const std::string& dump_dir, int epoch, const LabeledDataset& ds,
                     const Partition& s1, const Partition& s2) {
    char name[64];
    std::snprintf(name, sizeof(name), "partitions_epoch_%04d.csv", epoch);
    std::ofstream os(std::filesystem::path(dump_dir) / name);
    if (!os) throw ConfigError("dump: cannot open partition dump in " + dump_dir);
    os << "id,stage,score,posterior_clean,is_clean\n";
    char buf[64];
    for (const Partition* p : {&s1, &s2}) {
        const char* tag = p->stage == Stage::S1 ? "S1" : "S2";
        for (std::size_t i = 0; i < ds.size(); ++i) {
            os << ds.ids[i] << "," << tag << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", p->score[i]);
            os << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", p->posterior_clean[i]);
            os << buf << "," << (p->is_clean[i] ? 1 : 0) << "\n";
        }
    }
}

}  // namespace

TrainOutput run_training(const TrainConfig& cfg, const std::string& dump_dir) {
    cfg.validate();
    LabeledDataset train = build_train_dataset(cfg);
    LabeledDataset test = build_test_dataset(cfg);
    const std::size_t n = train.size();
    std::vector<bool> truth = truly_clean(train);

    Rng init_rng(derive_stream(cfg.seed, "model-init"));
    Rng head2_rng(derive_stream(cfg.seed, "head2-init"));
    Rng shuffle_rng(derive_stream(cfg.seed, "train-shuffle"));
    Rng mix_rng(derive_stream(cfg.seed, "mixmatch"));
    Rng stage2_rng(derive_stream(cfg.seed, "stage2-batches"));

    ModelParams model = make_mlp_model(train.features.cols, cfg.hidden, cfg.feature_dim,
                                       static_cast<std::size_t>(train.class_count), init_rng,
                                       head2_rng);
    OptimState optim = make_optim(model, cfg.learning_rate, cfg.momentum, cfg.weight_decay);

    TrainOutput out;
    out.report.config = cfg;
    out.report.train_noise_rate = train.noise_rate();

    train_cross_entropy_epochs(model, optim, train, cfg.warmup_epochs, cfg.batch_size,
                               shuffle_rng);
    out.report.warmup_test_acc = evaluate_accuracy(model, test, 0);

    Stage1Options s1opts;
    s1opts.theta = cfg.theta;
    s1opts.theta_agg = cfg.theta_agg;
    s1opts.membership = cfg.membership;
    Stage2Options s2opts;
    s2opts.theta = cfg.theta;
    s2opts.lambda_min = cfg.lambda_min;
    s2opts.max_iterations = cfg.n_max;
    s2opts.head_lr_scale = cfg.head_lr_scale;
    s2opts.batch_size = cfg.batch_size;
    s2opts.weight_scores = cfg.stage2_weight_scores;

    std::vector<double> freqs = class_frequencies(train.noisy_labels, train.class_count);

    Partition prev_s1;
    bool have_prev = false;
    const int main_epochs = cfg.epochs - cfg.warmup_epochs;
    for (int epoch = 0; epoch < main_epochs; ++epoch) {
        optim.learning_rate = epoch >= cfg.lr_decay_epoch ? cfg.learning_rate * 0.1
                                                          : cfg.learning_rate;
        EpochRecord rec;
        rec.epoch = epoch;

        // Steps 1-2
        Partition s1;
        if (cfg.use_stage1) {
            try {
                s1 = stage1_partition(model, train, s1opts);
            } catch (const DegenerateDataError&) {
                rec.note += "stage1-fallback;";
                s1 = have_prev ? prev_s1 : all_clean_partition(n, train.class_count);
            } catch (const InsufficientDataError&) {
                rec.note += "stage1-fallback;";
                s1 = have_prev ? prev_s1 : all_clean_partition(n, train.class_count);
            }
        } else {
            s1 = all_clean_partition(n, train.class_count);
        }
        prev_s1 = s1;
        have_prev = true;

        // Step 3
        Stage2Result s2;
        if (cfg.use_stage2) {
            std::vector<std::size_t> s1_clean = clean_indices(s1);
            if (s1_clean.empty()) {
                s2.partition = s1;
                s2.partition.stage = Stage::S2;
                s2.fell_back = true;
                rec.note += "stage2-skipped-empty-s1;";
            } else {
                if (cfg.lambda_min != 0.0 && cfg.n_max > 0)
                    rec.loss_min = maximize_head_discrepancy(model, optim, train, s1_clean,
                                                             freqs, s2opts, stage2_rng);
                s2 = stage2_partition(model, train, s1, s2opts);
                if (s2.fell_back) rec.note += "stage2-fallback;";
            }
        } else {
            s2.partition = s1;
            s2.partition.stage = Stage::S2;
        }

        // Step 4
        double lambda_max_eff = cfg.use_stage2 ? cfg.lambda_max : 0.0;
        if (!cfg.use_stage1 && !cfg.use_stage2) {
            train_cross_entropy_epochs(model, optim, train, 1, cfg.batch_size, shuffle_rng,
                                       &rec.loss_x);
        } else if (!cfg.use_stage2) {
            // Selection without the consistency machinery: plain supervised
            // training on the stage-1 clean set, nothing for the rest.
            std::vector<std::size_t> clean_idx = clean_indices(s1);
            if (clean_idx.empty()) {
                rec.note += "empty-clean-ce-epoch;";
                train_cross_entropy_epochs(model, optim, train, 1, cfg.batch_size, shuffle_rng,
                                           &rec.loss_x);
            } else {
                train_cross_entropy_on_rows(model, optim, train, std::move(clean_idx),
                                            cfg.batch_size, shuffle_rng, &rec.loss_x);
            }
        } else {
            double ramp = cfg.lambda_u_ramp_epochs > 0
                              ? std::min(1.0, static_cast<double>(epoch + 1) /
                                                  static_cast<double>(cfg.lambda_u_ramp_epochs))
                              : 1.0;
            double lambda_u_eff = cfg.lambda_u * ramp;

            std::vector<std::size_t> clean_idx = clean_indices(s2.partition);
            std::vector<std::size_t> noisy_idx;
            for (std::size_t i = 0; i < n; ++i)
                if (!s2.partition.is_clean[i]) noisy_idx.push_back(i);

            if (clean_idx.empty()) {
                rec.note += "empty-clean-ce-epoch;";
                train_cross_entropy_epochs(model, optim, train, 1, cfg.batch_size, shuffle_rng,
                                           &rec.loss_x);
            } else {
                shuffle_rng.shuffle(clean_idx);
                shuffle_rng.shuffle(noisy_idx);
                std::size_t noisy_pos = 0;
                double lx_sum = 0.0, lu_sum = 0.0, lmax_sum = 0.0;
                std::size_t steps = 0;
                for (std::size_t start = 0; start < clean_idx.size();
                     start += cfg.batch_size) {
                    std::size_t end = std::min(start + cfg.batch_size, clean_idx.size());
                    std::span<const std::size_t> crows(clean_idx.data() + start, end - start);
                    std::vector<std::size_t> nrows;
                    if (!noisy_idx.empty()) {
                        for (std::size_t k = 0; k < crows.size(); ++k) {
                            nrows.push_back(noisy_idx[noisy_pos]);
                            noisy_pos = (noisy_pos + 1) % noisy_idx.size();
                        }
                    }
                    Matrix cx = gather_rows(train.features, crows);
                    Matrix ct = onehot_rows(train, crows);
                    Matrix nx = nrows.empty() ? Matrix(0, train.features.cols)
                                              : gather_rows(train.features, nrows);
                    std::vector<double> rw;
                    for (std::size_t i : crows) rw.push_back(freqs[train.noisy_labels[i]]);
                    for (std::size_t i : nrows) rw.push_back(freqs[train.noisy_labels[i]]);

                    Step4Batch batch =
                        prepare_step4_batch(model, cx, ct, nx, rw, cfg, mix_rng);
                    Step4Losses l = semi_supervised_step(model, optim, batch, lambda_u_eff,
                                                         lambda_max_eff);
                    lx_sum += l.lx;
                    lu_sum += l.lu;
                    lmax_sum += l.lmax;
                    ++steps;
                }
                if (steps > 0) {
                    rec.loss_x = lx_sum / static_cast<double>(steps);
                    rec.loss_u = lu_sum / static_cast<double>(steps);
                    rec.loss_max = lmax_sum / static_cast<double>(steps);
                }
            }
        }

        // bookkeeping
        rec.test_acc_head1 = evaluate_accuracy(model, test, 1);
        rec.test_acc_head2 = evaluate_accuracy(model, test, 2);
        rec.test_acc_ensemble = evaluate_accuracy(model, test, 0);
        rec.auc_s1 = safe_auc(s1.posterior_clean, truth);
        rec.auc_s2 = safe_auc(s2.partition.posterior_clean, truth);
        rec.precision_s1 = safe_precision(s1.is_clean, train);
        rec.precision_s2 = safe_precision(s2.partition.is_clean, train);
        rec.n_s1_clean = s1.clean_count();
        rec.n_s2_clean = s2.partition.clean_count();
        rec.s1_class_distribution = safe_distribution(s1.is_clean, train);
        rec.s2_class_distribution = safe_distribution(s2.partition.is_clean, train);
        if (!dump_dir.empty()) dump_partitions(dump_dir, epoch, train, s1, s2.partition);
        out.report.epochs.push_back(std::move(rec));
    }

    out.model = std::move(model);
    out.train_set = std::move(train);
    return out;
}

// ---- report serialization ----------------------------------------------

namespace {

nlohmann::json to_json_value(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
    nlohmann::json j;
    for (const auto& [k, v] : report.config.to_kv()) j["config"][k] = v;
    j["warmup_test_acc"] = report.warmup_test_acc;
    j["train_noise_rate"] = report.train_noise_rate;
    j["epochs"] = nlohmann::json::array();
    for (const auto& e : report.epochs) {
        nlohmann::json je;
        je["epoch"] = e.epoch;
        je["test_acc_head1"] = e.test_acc_head1;
        je["test_acc_head2"] = e.test_acc_head2;
        je["test_acc_ensemble"] = e.test_acc_ensemble;
        je["auc_s1"] = to_json_value(e.auc_s1);
        je["auc_s2"] = to_json_value(e.auc_s2);
        je["precision_s1"] = to_json_value(e.precision_s1);
        je["precision_s2"] = to_json_value(e.precision_s2);
        je["n_s1_clean"] = e.n_s1_clean;
        je["n_s2_clean"] = e.n_s2_clean;
        je["s1_class_distribution"] = e.s1_class_distribution;
        je["s2_class_distribution"] = e.s2_class_distribution;
        je["loss_x"] = e.loss_x;
        je["loss_u"] = e.loss_u;
        je["loss_min"] = e.loss_min;
        je["loss_max"] = e.loss_max;
        je["note"] = e.note;
        j["epochs"].push_back(std::move(je));
    }
    return j.dump(2) + "\n";
}

std::string report_to_csv(const RunReport& report) {
    std::string out = "epoch, acc, auc_s1, auc_s2, n_s1, n_s2, Lx, Lu, Lmin, Lmax\n";
    for (const auto& e : report.epochs) {
        out += std::to_string(e.epoch) + ", " + fmt(e.test_acc_ensemble) + ", " +
               fmt(e.auc_s1) + ", " + fmt(e.auc_s2) + ", " + std::to_string(e.n_s1_clean) +
               ", " + std::to_string(e.n_s2_clean) + ", " + fmt(e.loss_x) + ", " +
               fmt(e.loss_u) + ", " + fmt(e.loss_min) + ", " + fmt(e.loss_max) + "\n";
    }
    return out;
}

void write_run_report(const std::string& out_dir, const RunReport& report) {
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, text] :
         {std::pair{"report.json", report_to_json(report)},
          std::pair{"report.csv", report_to_csv(report)}}) {
        std::ofstream os(std::filesystem::path(out_dir) / name, std::ios::binary);
        if (!os) throw ConfigError("report: cannot write in " + out_dir);
        os << text;
    }
}

}  // namespace cleanset
