#include "cleanset/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cleanset/errors.hpp"

namespace cleanset {

namespace {

double percentile(std::vector<double> sorted, double p) {
    double idx = p * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(idx);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = idx - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double log_gauss(double x, double mean, double var) {
    double d = x - mean;
    return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

// log(w_a * N_a(x)) and log(w_b * N_b(x)) combined via log-sum-exp
double log_mix_density(const Gmm1DFit& f, double x, double* log_pa, double* log_pb) {
    double la = std::log(f.weight_a) + log_gauss(x, f.mean_a, f.var_a);
    double lb = std::log(f.weight_b) + log_gauss(x, f.mean_b, f.var_b);
    double m = std::max(la, lb);
    double lse = m + std::log(std::exp(la - m) + std::exp(lb - m));
    if (log_pa) *log_pa = la - lse;
    if (log_pb) *log_pb = lb - lse;
    return lse;
}

}  // namespace

Gmm1DFit fit_gmm1d(std::span<const double> values, const GmmOptions& opts) {
    const std::size_t n = values.size();
    if (n < 4) throw InsufficientDataError("fit_gmm1d: need at least 4 values, got " +
                                           std::to_string(n));
    for (double v : values)
        if (!std::isfinite(v)) throw NumericError("fit_gmm1d: non-finite input value");

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.back() - sorted.front() < 1e-12)
        throw DegenerateDataError("fit_gmm1d: all values equal");

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = std::max(var / static_cast<double>(n), opts.var_floor);

    Gmm1DFit f;
    f.mean_a = percentile(sorted, 0.10);
    f.mean_b = percentile(sorted, 0.90);
    if (f.mean_b - f.mean_a < 1e-12) {
        f.mean_a = sorted.front();
        f.mean_b = sorted.back();
    }
    f.var_a = f.var_b = var;
    f.weight_a = f.weight_b = 0.5;

    std::vector<double> resp_a(n);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iter; ++it) {
        // E step
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double la, lb;
            ll += log_mix_density(f, values[i], &la, &lb);
            resp_a[i] = std::exp(la);
        }
        f.log_likelihood = ll;
        f.loglik_trace.push_back(ll);
        f.iterations = it + 1;
        if (ll - prev_ll < opts.tol && it > 0) break;
        prev_ll = ll;

        // M step
        double na = 0.0, sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            na += resp_a[i];
            sa += resp_a[i] * values[i];
            sb += (1.0 - resp_a[i]) * values[i];
        }
        double nb = static_cast<double>(n) - na;
        na = std::max(na, 1e-12);
        nb = std::max(nb, 1e-12);
        double ma = sa / na, mb = sb / nb;
        double va = 0.0, vb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            va += resp_a[i] * (values[i] - ma) * (values[i] - ma);
            vb += (1.0 - resp_a[i]) * (values[i] - mb) * (values[i] - mb);
        }
        f.mean_a = ma;
        f.mean_b = mb;
        f.var_a = std::max(va / na, opts.var_floor);
        f.var_b = std::max(vb / nb, opts.var_floor);
        f.weight_a = na / static_cast<double>(n);
        f.weight_b = nb / static_cast<double>(n);
    }

    if (f.mean_a > f.mean_b) {
        std::swap(f.mean_a, f.mean_b);
        std::swap(f.var_a, f.var_b);
        std::swap(f.weight_a, f.weight_b);
    }
    return f;
}

PosteriorRow posterior(const Gmm1DFit& fit, double value) {
    double la, lb;
    log_mix_density(fit, value, &la, &lb);
    PosteriorRow r;
    r.p_component_a = std::exp(la);
    r.p_component_b = std::exp(lb);
    return r;
}

std::vector<bool> partition_by_posterior(std::span<const double> values, const Gmm1DFit& fit,
                                         double theta, CleanComponent clean) {
    if (!(theta > 0.0 && theta < 1.0))
        throw ConfigError("partition_by_posterior: theta must be in (0,1)");
    std::vector<bool> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        PosteriorRow p = posterior(fit, values[i]);
        double pc = clean == CleanComponent::LargerMean ? p.p_component_b : p.p_component_a;
        out[i] = pc > theta;
    }
    return out;
}

}  // namespace cleanset
