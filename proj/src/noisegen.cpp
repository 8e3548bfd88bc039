#include "cleanset/noisegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cleanset/errors.hpp"
#include "cleanset/model.hpp"

namespace cleanset {

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "none") return NoiseKind::None;
    if (s == "classification") return NoiseKind::ClassificationBased;
    if (s == "boundary") return NoiseKind::Boundary;
    if (s == "symmetric") return NoiseKind::Symmetric;
    throw ConfigError("noise.kind: unknown value '" + s + "'");
}

std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::None: return "none";
        case NoiseKind::ClassificationBased: return "classification";
        case NoiseKind::Boundary: return "boundary";
        case NoiseKind::Symmetric: return "symmetric";
    }
    return "none";
}

LabeledDataset make_blobs(const BlobSpec& spec, std::uint64_t seed,
                          std::string_view point_stream_salt) {
    if (spec.class_count < 2) throw ConfigError("data.class_count: must be >= 2");
    if (spec.dim == 0) throw ConfigError("data.dim: must be positive");
    if (!spec.imbalance_ratios.empty() &&
        spec.imbalance_ratios.size() != static_cast<std::size_t>(spec.class_count))
        throw ConfigError("data.imbalance: ratio count must equal class_count");

    const std::size_t total = spec.n_per_class * static_cast<std::size_t>(spec.class_count);
    std::vector<std::size_t> counts(spec.class_count, spec.n_per_class);
    if (!spec.imbalance_ratios.empty()) {
        double rsum = std::accumulate(spec.imbalance_ratios.begin(), spec.imbalance_ratios.end(),
                                      0.0);
        if (rsum <= 0.0) throw ConfigError("data.imbalance: ratios must sum to a positive value");
        std::size_t assigned = 0;
        for (int c = 0; c < spec.class_count; ++c) {
            counts[c] = static_cast<std::size_t>(
                std::llround(spec.imbalance_ratios[c] / rsum * static_cast<double>(total)));
            assigned += counts[c];
        }
        // absorb rounding drift into the largest class
        auto biggest = std::max_element(counts.begin(), counts.end());
        *biggest += total;
        *biggest -= assigned;
    }
    for (int c = 0; c < spec.class_count; ++c)
        if (counts[c] < 8)
            throw ConfigError("data: class " + std::to_string(c) +
                              " would get fewer than 8 samples");

    Rng center_rng(derive_stream(seed, "centers"));
    Matrix centers(spec.class_count, spec.dim);
    for (double& v : centers.data) v = spec.center_spread * center_rng.gaussian();

    Rng point_rng(derive_stream(seed, point_stream_salt));
    LabeledDataset ds;
    ds.class_count = spec.class_count;
    ds.features = Matrix(total, spec.dim);
    ds.true_labels.reserve(total);
    ds.ids.reserve(total);
    std::size_t row = 0;
    for (int c = 0; c < spec.class_count; ++c) {
        for (std::size_t k = 0; k < counts[c]; ++k, ++row) {
            for (std::size_t j = 0; j < spec.dim; ++j)
                ds.features(row, j) = centers(c, j) + spec.cluster_std * point_rng.gaussian();
            ds.true_labels.push_back(c);
            ds.ids.push_back(static_cast<std::int64_t>(row));
        }
    }
    ds.noisy_labels = ds.true_labels;
    ds.validate();
    return ds;
}

LabeledDataset apply_classification_noise(const LabeledDataset& ds, int probe_epochs, double r,
                                          std::uint64_t seed) {
    if (r < 0.0 || r > 1.0) throw ConfigError("noise.rate: r must be in [0,1]");
    if (probe_epochs < 1) throw ConfigError("noise.probe_epochs: must be >= 1");
    LabeledDataset out = ds;
    const std::size_t n = ds.size();
    const std::size_t flips = static_cast<std::size_t>(r * static_cast<double>(n));
    if (flips == 0) return out;

    // Probe classifier trained on the true labels; its averaged per-epoch
    // predictions define which samples are confusable.
    Rng init_rng(derive_stream(seed, "probe-init"));
    Rng head2_rng(derive_stream(seed, "probe-head2"));
    Rng shuffle_rng(derive_stream(seed, "probe-shuffle"));
    ModelParams probe = make_mlp_model(ds.features.cols, {32, 32}, 16,
                                       static_cast<std::size_t>(ds.class_count), init_rng,
                                       head2_rng);
    OptimState optim = make_optim(probe, 0.05, 0.9, 0.0);

    const int c = ds.class_count;
    Matrix onehot(n, c, 0.0);
    for (std::size_t i = 0; i < n; ++i) onehot(i, ds.true_labels[i]) = 1.0;

    Matrix avg_probs(n, c, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = 64;
    for (int epoch = 0; epoch < probe_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            std::size_t end = std::min(start + batch, n);
            Matrix bx(end - start, ds.features.cols);
            Matrix bt(end - start, c, 0.0);
            for (std::size_t i = start; i < end; ++i) {
                std::size_t s = order[i];
                std::copy(ds.features.row(s).begin(), ds.features.row(s).end(),
                          bx.row(i - start).begin());
                bt(i - start, ds.true_labels[s]) = 1.0;
            }
            ForwardCache fc = forward_cached(probe, bx);
            LossGrad lg = cross_entropy_loss(fc.out, bt);
            Gradients g = zeros_like(probe);
            backward(probe, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);
            sgd_step(probe, optim, g, ParamGroup::All);
        }
        // record this epoch's head-ensemble predictions for every sample
        ForwardResult fr = forward(probe, ds.features);
        for (std::size_t i = 0; i < avg_probs.data.size(); ++i)
            avg_probs.data[i] += 0.5 * (fr.probs1.data[i] + fr.probs2.data[i]);
    }
    for (double& v : avg_probs.data) v /= static_cast<double>(probe_epochs);

    // candidate = strongest class other than the true one
    std::vector<int> candidate(n);
    std::vector<double> cand_prob(n);
    for (std::size_t i = 0; i < n; ++i) {
        int best = -1;
        double bp = -1.0;
        for (int j = 0; j < c; ++j) {
            if (j == ds.true_labels[i]) continue;
            if (avg_probs(i, j) > bp) {
                bp = avg_probs(i, j);
                best = j;
            }
        }
        candidate[i] = best;
        cand_prob[i] = bp;
    }

    // flip the top floor(r*N) by candidate probability, ties by sample id
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (cand_prob[a] != cand_prob[b]) return cand_prob[a] > cand_prob[b];
        return ds.ids[a] < ds.ids[b];
    });
    for (std::size_t k = 0; k < flips; ++k) out.noisy_labels[idx[k]] = candidate[idx[k]];
    return out;
}

std::vector<double> boundary_margins(const LabeledDataset& ds, std::vector<int>* nearest_other) {
    const int c = ds.class_count;
    const std::size_t d = ds.features.cols;
    Matrix centers(c, d, 0.0);
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int y = ds.true_labels[i];
        ++counts[y];
        for (std::size_t j = 0; j < d; ++j) centers(y, j) += ds.features(i, j);
    }
    for (int k = 0; k < c; ++k) {
        if (counts[k] == 0) throw DegenerateDataError("boundary_margins: empty class");
        for (std::size_t j = 0; j < d; ++j) centers(k, j) /= static_cast<double>(counts[k]);
    }
    std::vector<double> margins(ds.size());
    if (nearest_other) nearest_other->assign(ds.size(), -1);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double own = 0.0, best = std::numeric_limits<double>::infinity();
        int best_c = -1;
        for (int k = 0; k < c; ++k) {
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double diff = ds.features(i, j) - centers(k, j);
                dist += diff * diff;
            }
            dist = std::sqrt(dist);
            if (k == ds.true_labels[i]) {
                own = dist;
            } else if (dist < best) {
                best = dist;
                best_c = k;
            }
        }
        margins[i] = best - own;
        if (nearest_other) (*nearest_other)[i] = best_c;
    }
    return margins;
}

LabeledDataset apply_boundary_idn(const LabeledDataset& ds, double eta, std::uint64_t seed) {
    if (eta < 0.0 || eta >= 1.0) throw ConfigError("noise.rate: eta must be in [0,1)");
    LabeledDataset out = ds;
    const std::size_t n = ds.size();
    const std::size_t flips = static_cast<std::size_t>(std::llround(eta * static_cast<double>(n)));
    if (flips == 0) return out;

    std::vector<int> nearest;
    std::vector<double> margins = boundary_margins(ds, &nearest);

    // weights decay with margin; tau set from the margin spread
    double mmean = std::accumulate(margins.begin(), margins.end(), 0.0) / static_cast<double>(n);
    double mvar = 0.0;
    for (double m : margins) mvar += (m - mmean) * (m - mmean);
    double tau = std::max(std::sqrt(mvar / static_cast<double>(n)), 1e-9);

    // The flip budget is apportioned per class (largest remainder), so no
    // class can lose a label majority just because its nearest neighbour
    // happens to sit close. Within a class, Efraimidis-Spirakis top-k keys
    // u^(1/w) give a weighted sample without replacement of exact size.
    const int c = ds.class_count;
    std::vector<std::vector<std::size_t>> members(c);
    for (std::size_t i = 0; i < n; ++i) members[ds.true_labels[i]].push_back(i);
    std::vector<std::size_t> quota(c, 0);
    std::vector<std::pair<double, int>> rem(c);
    std::size_t assigned = 0;
    for (int k = 0; k < c; ++k) {
        double exact = static_cast<double>(flips) * static_cast<double>(members[k].size()) /
                       static_cast<double>(n);
        quota[k] = std::min(static_cast<std::size_t>(exact), members[k].size());
        assigned += quota[k];
        rem[k] = {exact - static_cast<double>(quota[k]), k};
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t r = 0; assigned < flips && r < rem.size(); ++r) {
        int k = rem[r].second;
        if (quota[k] < members[k].size()) {
            ++quota[k];
            ++assigned;
        }
    }

    Rng rng(derive_stream(seed, "boundary-noise"));
    std::vector<double> key(n);
    for (std::size_t i = 0; i < n; ++i) {
        double w = std::exp(-margins[i] / tau);
        double u = std::max(rng.uniform(), 1e-300);
        key[i] = std::log(u) / w;
    }
    for (int k = 0; k < c; ++k) {
        auto& idx = members[k];
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota[k]),
                          idx.end(),
                          [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
        for (std::size_t r = 0; r < quota[k]; ++r) out.noisy_labels[idx[r]] = nearest[idx[r]];
    }
    return out;
}

LabeledDataset apply_symmetric_noise(const LabeledDataset& ds, double eta, std::uint64_t seed) {
    if (eta < 0.0 || eta >= 1.0) throw ConfigError("noise.rate: eta must be in [0,1)");
    LabeledDataset out = ds;
    Rng rng(derive_stream(seed, "symmetric-noise"));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (rng.uniform() < eta) {
            int shift = 1 + static_cast<int>(rng.uniform_int(
                                 static_cast<std::size_t>(ds.class_count - 1)));
            out.noisy_labels[i] = (ds.true_labels[i] + shift) % ds.class_count;
        }
    }
    return out;
}

LabeledDataset apply_noise(const LabeledDataset& ds, const NoiseSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
        case NoiseKind::None: return ds;
        case NoiseKind::ClassificationBased:
            return apply_classification_noise(ds, spec.probe_epochs, spec.rate, seed);
        case NoiseKind::Boundary: return apply_boundary_idn(ds, spec.rate, seed);
        case NoiseKind::Symmetric: return apply_symmetric_noise(ds, spec.rate, seed);
    }
    throw ConfigError("noise.kind: unknown kind");
}

}  // namespace cleanset
