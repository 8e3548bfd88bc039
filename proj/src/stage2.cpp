#include "cleanset/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cleanset/errors.hpp"

namespace cleanset {

std::vector<double> class_frequencies(std::span<const int> noisy_labels, int class_count) {
    if (noisy_labels.empty()) throw ConfigError("class_frequencies: empty labels");
    std::vector<double> w(class_count, 0.0);
    for (int y : noisy_labels) ++w[y];
    for (double& v : w) v /= static_cast<double>(noisy_labels.size());
    return w;
}

double weighted_discrepancy(std::span<const double> p1, std::span<const double> p2, double w) {
    if (w < 0.0 || w > 1.0) throw ConfigError("weighted_discrepancy: weight outside [0,1]");
    return w * discrepancy(p1, p2);
}

std::vector<std::size_t> clean_indices(const Partition& p) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < p.is_clean.size(); ++i)
        if (p.is_clean[i]) idx.push_back(i);
    return idx;
}

namespace {

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), src.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(src.row(rows[i]).begin(), src.row(rows[i]).end(), out.row(i).begin());
    return out;
}

}  // namespace

double maximize_head_discrepancy(ModelParams& model, OptimState& optim,
                                 const LabeledDataset& ds,
                                 const std::vector<std::size_t>& s1_clean,
                                 const std::vector<double>& frequencies,
                                 const Stage2Options& opts, Rng& batch_rng) {
    if (s1_clean.empty()) throw ConfigError("maximize_head_discrepancy: empty clean set");
    if (opts.lambda_min == 0.0) return 0.0;  // no-op by contract

    const double saved_lr = optim.learning_rate;
    optim.learning_rate = saved_lr * opts.head_lr_scale;
    double loss_sum = 0.0;
    for (int it = 0; it < opts.max_iterations; ++it) {
        std::size_t bs = std::min(opts.batch_size, s1_clean.size());
        std::vector<std::size_t> batch(bs);
        for (std::size_t i = 0; i < bs; ++i)
            batch[i] = s1_clean[batch_rng.uniform_int(s1_clean.size())];
        Matrix bx = gather_rows(ds.features, batch);
        std::vector<double> w(bs);
        for (std::size_t i = 0; i < bs; ++i) w[i] = frequencies[ds.noisy_labels[batch[i]]];

        ForwardCache fc = forward_cached(model, bx);
        LossGrad lg = weighted_discrepancy_loss(fc.out, w);
        // L_min = -lambda_min * mean D*; descend on it = ascend on D*
        double coef = -opts.lambda_min;
        for (double& v : lg.dlogits1.data) v *= coef;
        for (double& v : lg.dlogits2.data) v *= coef;
        Gradients g = zeros_like(model);
        backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::HeadsOnly, g);
        sgd_step(model, optim, g, ParamGroup::HeadsOnly);
        loss_sum += coef * lg.value;
    }
    optim.learning_rate = saved_lr;
    return loss_sum / static_cast<double>(opts.max_iterations);
}

ConsistencyReport evaluate_consistency(const ModelParams& model, const LabeledDataset& ds,
                                       const std::vector<std::size_t>& s1_clean,
                                       const std::vector<double>& frequencies) {
    ConsistencyReport rep;
    rep.sample_indices = s1_clean;
    Matrix bx = gather_rows(ds.features, s1_clean);
    ForwardResult fr = forward(model, bx);
    rep.d.resize(s1_clean.size());
    rep.d_star.resize(s1_clean.size());
    for (std::size_t i = 0; i < s1_clean.size(); ++i) {
        rep.d[i] = discrepancy(fr.probs1.row(i), fr.probs2.row(i));
        rep.d_star[i] = frequencies[ds.noisy_labels[s1_clean[i]]] * rep.d[i];
    }
    return rep;
}

Stage2Result stage2_partition(const ModelParams& model, const LabeledDataset& ds,
                              const Partition& s1, const Stage2Options& opts) {
    Stage2Result res;
    res.partition = s1;
    res.partition.stage = Stage::S2;

    std::vector<std::size_t> s1_clean = clean_indices(s1);
    if (s1_clean.empty()) {
        res.fell_back = true;
        return res;
    }
    std::vector<double> freqs = class_frequencies(ds.noisy_labels, ds.class_count);
    res.consistency = evaluate_consistency(model, ds, s1_clean, freqs);
    res.consistency.lambda_min = opts.lambda_min;
    res.consistency.iterations_used = opts.max_iterations;

    const std::vector<double>& raw =
        opts.weight_scores ? res.consistency.d_star : res.consistency.d;
    std::vector<double> scores = minmax_normalize(raw);

    Gmm1DFit fit;
    try {
        fit = fit_gmm1d(scores, opts.gmm);
    } catch (const DegenerateDataError&) {
        res.fell_back = true;
        return res;
    } catch (const InsufficientDataError&) {
        res.fell_back = true;
        return res;
    }

    // clean = smaller-mean component (low discrepancy = consistent heads)
    for (std::size_t i = 0; i < s1_clean.size(); ++i) {
        std::size_t s = s1_clean[i];
        PosteriorRow p = posterior(fit, scores[i]);
        res.partition.score[s] = scores[i];
        // Combined clean score over the whole dataset: stage-1 rejects keep
        // their stage-1 posterior (<= theta by construction), stage-1 keeps
        // are re-ranked into (theta, 1] by the stage-2 posterior.
        res.partition.posterior_clean[s] = opts.theta + (1.0 - opts.theta) * p.p_component_a;
        res.partition.is_clean[s] = p.p_component_a > opts.theta;
    }

    // A split that strips a class of nearly all its stage-1 members tracks
    // class identity, not label noise; discard it rather than starve the
    // supervised loss of that class.
    std::vector<std::size_t> s1_per_class(ds.class_count, 0), s2_per_class(ds.class_count, 0);
    for (std::size_t s : s1_clean) {
        ++s1_per_class[ds.noisy_labels[s]];
        if (res.partition.is_clean[s]) ++s2_per_class[ds.noisy_labels[s]];
    }
    for (int k = 0; k < ds.class_count; ++k) {
        if (s1_per_class[k] == 0) continue;
        double kept = static_cast<double>(s2_per_class[k]) / static_cast<double>(s1_per_class[k]);
        if (kept < opts.min_class_coverage) {
            res.partition = s1;
            res.partition.stage = Stage::S2;
            res.fell_back = true;
            return res;
        }
    }
    return res;
}

}  // namespace cleanset
