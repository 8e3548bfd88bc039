#pragma once

// Shared helpers for the test binaries: parameter flattening and central
// finite-difference gradient checks against backward().

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cleanset/model.hpp"
#include "cleanset/rng.hpp"

namespace cleanset::testutil {

// ModelParams and Gradients share the extractor/head1/head2 layout.
template <typename T>
std::vector<double*> flat_ptrs(T& m, ParamGroup group) {
    std::vector<double*> out;
    auto add = [&](auto& layer) {
        for (double& v : layer.weight.data) out.push_back(&v);
        for (double& v : layer.bias) out.push_back(&v);
    };
    if (group != ParamGroup::HeadsOnly)
        for (auto& l : m.extractor) add(l);
    if (group != ParamGroup::ExtractorOnly) {
        add(m.head1);
        add(m.head2);
    }
    return out;
}

struct FdReport {
    double max_rel_err = 0.0;
    int checked = 0;
};

// Central differences on `coords` random parameter coordinates of `group`,
// compared against the already-accumulated analytic gradients.
inline FdReport fd_check(ModelParams& model, ParamGroup group,
                         const std::function<double(const ModelParams&)>& loss,
                         Gradients& analytic, Rng& pick, int coords, double h = 1e-5) {
    std::vector<double*> ptrs = flat_ptrs(model, group);
    std::vector<double*> gptrs = flat_ptrs(analytic, group);
    FdReport rep;
    for (int k = 0; k < coords; ++k) {
        std::size_t i = pick.uniform_int(ptrs.size());
        double saved = *ptrs[i];
        *ptrs[i] = saved + h;
        double lp = loss(model);
        *ptrs[i] = saved - h;
        double lm = loss(model);
        *ptrs[i] = saved;
        double fd = (lp - lm) / (2.0 * h);
        double an = *gptrs[i];
        if (std::abs(fd) < 1e-7 && std::abs(an) < 1e-7) {
            ++rep.checked;  // dead ReLU path; nothing to compare
            continue;
        }
        double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - an) / denom);
        ++rep.checked;
    }
    return rep;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = scale * rng.gaussian();
    return m;
}

inline Matrix random_onehot(std::size_t rows, std::size_t classes, Rng& rng) {
    Matrix t(rows, classes, 0.0);
    for (std::size_t i = 0; i < rows; ++i) t(i, rng.uniform_int(classes)) = 1.0;
    return t;
}

}  // namespace cleanset::testutil
