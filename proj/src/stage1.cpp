#include "cleanset/stage1.hpp"

#include <algorithm>
#include <cmath>

#include "cleanset/errors.hpp"

namespace cleanset {

namespace {

constexpr double kScoreBlend = 0.01;

// Min-max normalization erases the raw similarity scale, so a GMM happily
// splits a pure class whose scores span 0.02 cosine units. A split only
// counts as evidence of a noisy mode if the component gap, mapped back to
// the raw scale, is non-trivial.
constexpr double kMinRawGap = 0.02;

double mean_posterior_entropy(const Gmm1DFit& fit, std::span<const double> values) {
    double ent = 0.0;
    for (double v : values) {
        PosteriorRow p = posterior(fit, v);
        for (double pj : {p.p_component_a, p.p_component_b})
            if (pj > 0.0) ent -= pj * std::log(pj);
    }
    return ent / static_cast<double>(values.size());
}

}  // namespace

ClassCenters compute_centers(const Matrix& features, std::span<const int> membership_labels,
                             int class_count) {
    if (features.rows != membership_labels.size())
        throw DimensionError("compute_centers: label count != feature rows");
    ClassCenters cc;
    cc.centers.assign(class_count, std::nullopt);
    cc.member_counts.assign(class_count, 0);
    std::vector<std::vector<double>> sums(class_count,
                                          std::vector<double>(features.cols, 0.0));
    for (std::size_t i = 0; i < features.rows; ++i) {
        std::vector<double> f = l2_normalize(features.row(i));
        int c = membership_labels[i];
        for (std::size_t j = 0; j < features.cols; ++j) sums[c][j] += f[j];
        ++cc.member_counts[c];
    }
    for (int c = 0; c < class_count; ++c) {
        if (cc.member_counts[c] == 0) continue;  // absent, never NaN
        double n = norm2(sums[c]);
        if (!(n > 1e-12))
            throw DegenerateDataError("compute_centers: degenerate center for class " +
                                      std::to_string(c));
        for (double& v : sums[c]) v /= n;
        cc.centers[c] = std::move(sums[c]);
    }
    return cc;
}

std::vector<double> compute_similarities(const Matrix& features, const ClassCenters& centers,
                                         std::span<const int> noisy_labels) {
    std::vector<double> sims(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        int c = noisy_labels[i];
        if (c < 0 || c >= static_cast<int>(centers.centers.size()) || !centers.centers[c])
            throw DegenerateDataError("compute_similarities: missing center for class " +
                                      std::to_string(c));
        std::vector<double> f = l2_normalize(features.row(i));
        double s = dot(f, *centers.centers[c]);
        // unit vectors; clamp pure rounding excursions
        sims[i] = std::clamp(s, -1.0, 1.0);
    }
    return sims;
}

std::vector<int> aggregate_rare_classes(
    const std::vector<std::optional<double>>& class_entropies, double theta_agg) {
    const int c = static_cast<int>(class_entropies.size());
    std::vector<int> grouping(c);
    for (int k = 0; k < c; ++k) {
        bool aggregate = !class_entropies[k].has_value() || *class_entropies[k] > theta_agg;
        grouping[k] = aggregate ? c : k;
    }
    return grouping;
}

std::vector<double> minmax_normalize(std::span<const double> values) {
    auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    double mn = *mn_it, mx = *mx_it;
    std::vector<double> out(values.size());
    if (mx - mn < 1e-12) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mn) / (mx - mn);
    return out;
}

Partition stage1_partition(const ModelParams& model, const LabeledDataset& ds,
                           const Stage1Options& opts) {
    const std::size_t n = ds.size();
    const int c = ds.class_count;
    ForwardResult fwd = forward(model, ds.features);

    std::vector<int> membership;
    if (opts.membership == MembershipSource::NoisyLabel) {
        membership = ds.noisy_labels;
    } else {
        membership.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bp = -1.0;
            for (std::size_t j = 0; j < fwd.probs1.cols; ++j) {
                double p = 0.5 * (fwd.probs1(i, j) + fwd.probs2(i, j));
                if (p > bp) {
                    bp = p;
                    best = j;
                }
            }
            membership[i] = static_cast<int>(best);
        }
    }

    ClassCenters centers = compute_centers(fwd.features, membership, c);
    std::vector<double> sims = compute_similarities(fwd.features, centers, ds.noisy_labels);

    // per-class min-max normalization of similarity scores
    std::vector<std::vector<std::size_t>> members(c);
    for (std::size_t i = 0; i < n; ++i) members[ds.noisy_labels[i]].push_back(i);
    std::vector<double> norm_scores(n, 0.5);
    for (int k = 0; k < c; ++k) {
        if (members[k].empty()) continue;
        std::vector<double> vals;
        vals.reserve(members[k].size());
        for (std::size_t i : members[k]) vals.push_back(sims[i]);
        std::vector<double> nv = minmax_normalize(vals);
        for (std::size_t j = 0; j < members[k].size(); ++j) norm_scores[members[k][j]] = nv[j];
    }

    // per-class fits; failures and scale-less splits fall through to the
    // aggregate group
    auto raw_range = [&](const std::vector<std::size_t>& rows) {
        double lo = sims[rows.front()], hi = lo;
        for (std::size_t i : rows) {
            lo = std::min(lo, sims[i]);
            hi = std::max(hi, sims[i]);
        }
        return hi - lo;
    };
    std::vector<std::optional<Gmm1DFit>> fits(c);
    std::vector<std::optional<double>> entropies(c);
    for (int k = 0; k < c; ++k) {
        if (members[k].empty()) continue;
        std::vector<double> vals;
        vals.reserve(members[k].size());
        for (std::size_t i : members[k]) vals.push_back(norm_scores[i]);
        try {
            Gmm1DFit f = fit_gmm1d(vals, opts.gmm);
            if ((f.mean_b - f.mean_a) * raw_range(members[k]) < kMinRawGap) continue;
            entropies[k] = mean_posterior_entropy(f, vals);
            fits[k] = f;
        } catch (const InsufficientDataError&) {
        } catch (const DegenerateDataError&) {
        }
    }

    std::vector<int> grouping = aggregate_rare_classes(entropies, opts.theta_agg);

    // one pooled fit for the aggregate group, if any class was aggregated
    std::optional<Gmm1DFit> agg_fit;
    std::vector<double> agg_vals;
    std::vector<std::size_t> agg_rows;
    for (int k = 0; k < c; ++k) {
        if (grouping[k] != c) continue;
        for (std::size_t i : members[k]) {
            agg_vals.push_back(norm_scores[i]);
            agg_rows.push_back(i);
        }
    }
    bool agg_split = false;
    if (!agg_vals.empty()) {
        try {
            agg_fit = fit_gmm1d(agg_vals, opts.gmm);
            // The pooled fit gets the same reliability tests as the
            // per-class fits; an uninformative pool has no noisy mode worth
            // thresholding. Dataset-wide degenerate scores still propagate.
            agg_split =
                mean_posterior_entropy(*agg_fit, agg_vals) <= opts.theta_agg &&
                (agg_fit->mean_b - agg_fit->mean_a) * raw_range(agg_rows) >= kMinRawGap;
        } catch (const InsufficientDataError&) {
            // a pool of a handful of samples; keep it on the monotone path
        }
    }

    Partition part;
    part.stage = Stage::S1;
    part.class_grouping = grouping;
    part.score = norm_scores;
    part.is_clean.assign(n, false);
    part.posterior_clean.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        int k = ds.noisy_labels[i];
        double pc;
        if (grouping[k] == c && !agg_split) {
            // No evidence of a noisy mode even after pooling: keep everyone,
            // ranked by score inside the upper half of the posterior range.
            pc = 0.5 + 0.5 * norm_scores[i];
        } else {
            const Gmm1DFit& f = grouping[k] == c ? *agg_fit : *fits[k];
            // A small monotone score term breaks the ties a saturated
            // posterior would otherwise produce across classes.
            pc = (1.0 - kScoreBlend) * posterior(f, norm_scores[i]).p_component_b +
                 kScoreBlend * norm_scores[i];
        }
        part.posterior_clean[i] = pc;
        part.is_clean[i] = pc > opts.theta;
    }
    return part;
}

}  // namespace cleanset
