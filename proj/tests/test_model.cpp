#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cleanset/errors.hpp"
#include "cleanset/matrix.hpp"
#include "cleanset/model.hpp"
#include "test_util.hpp"

using namespace cleanset;
using namespace cleanset::testutil;

TEST_CASE("l2_normalize") {
    std::vector<double> v = {3.0, 4.0};
    auto n = l2_normalize(v);
    CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(norm2(n) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> z = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS((void)l2_normalize(z), DegenerateDataError);
}

TEST_CASE("softmax is shift-invariant and normalized") {
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> logits(6);
        for (double& v : logits) v = 3.0 * rng.gaussian();
        auto p = softmax_row(logits);
        double sum = 0.0;
        for (double v : p) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

        std::vector<double> shifted = logits;
        for (double& v : shifted) v += 17.5;
        auto q = softmax_row(shifted);
        for (std::size_t j = 0; j < p.size(); ++j)
            CHECK(p[j] == doctest::Approx(q[j]).epsilon(1e-12));
    }
}

TEST_CASE("forward matches a hand-rolled oracle") {
    // 2 -> 2 (relu) -> 2 features -> 2 heads, fixed weights
    ModelParams m;
    m.extractor.resize(2);
    m.extractor[0].weight = Matrix(2, 2);
    m.extractor[0].weight.data = {1.0, -2.0, 0.5, 1.5};
    m.extractor[0].bias = {0.1, -0.2};
    m.extractor[1].weight = Matrix(2, 2);
    m.extractor[1].weight.data = {0.3, -0.7, 1.1, 0.2};
    m.extractor[1].bias = {0.0, 0.4};
    m.head1.weight = Matrix(2, 2);
    m.head1.weight.data = {2.0, -1.0, 0.5, 0.5};
    m.head1.bias = {0.0, 0.1};
    m.head2.weight = Matrix(2, 2);
    m.head2.weight.data = {-0.5, 1.0, 1.0, -0.5};
    m.head2.bias = {0.2, 0.0};

    Matrix x(1, 2);
    x.data = {0.7, -0.3};
    ForwardResult fr = forward(m, x);

    // oracle with explicit scalar arithmetic
    double h0 = std::max(0.0, 1.0 * 0.7 + (-2.0) * (-0.3) + 0.1);
    double h1 = std::max(0.0, 0.5 * 0.7 + 1.5 * (-0.3) + (-0.2));
    double f0 = 0.3 * h0 + (-0.7) * h1 + 0.0;
    double f1 = 1.1 * h0 + 0.2 * h1 + 0.4;
    double l10 = 2.0 * f0 + (-1.0) * f1 + 0.0;
    double l11 = 0.5 * f0 + 0.5 * f1 + 0.1;
    double l20 = -0.5 * f0 + 1.0 * f1 + 0.2;
    double l21 = 1.0 * f0 + (-0.5) * f1 + 0.0;

    CHECK(fr.features(0, 0) == doctest::Approx(f0).epsilon(1e-10));
    CHECK(fr.features(0, 1) == doctest::Approx(f1).epsilon(1e-10));
    CHECK(fr.logits1(0, 0) == doctest::Approx(l10).epsilon(1e-10));
    CHECK(fr.logits1(0, 1) == doctest::Approx(l11).epsilon(1e-10));
    CHECK(fr.logits2(0, 0) == doctest::Approx(l20).epsilon(1e-10));
    CHECK(fr.logits2(0, 1) == doctest::Approx(l21).epsilon(1e-10));

    double e0 = std::exp(l10 - std::max(l10, l11)), e1 = std::exp(l11 - std::max(l10, l11));
    CHECK(fr.probs1(0, 0) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-10));
}

TEST_CASE("loss gradients pass central finite differences") {
    Rng rng(42), pick(43), head2(44);
    for (int cfg = 0; cfg < 3; ++cfg) {
        std::size_t in = 3 + cfg, classes = 2 + cfg, batch = 5;
        ModelParams model = make_mlp_model(in, {6}, 4, classes, rng, head2);
        Matrix x = random_matrix(batch, in, rng);
        Matrix t = random_onehot(batch, classes, rng);
        std::vector<double> w(batch);
        for (double& v : w) v = rng.uniform();

        {
            Gradients g = zeros_like(model);
            ForwardCache fc = forward_cached(model, x);
            LossGrad lg = cross_entropy_loss(fc.out, t);
            backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);
            auto rep = fd_check(
                model, ParamGroup::All,
                [&](const ModelParams& m) { return cross_entropy_loss(forward(m, x), t).value; },
                g, pick, 25);
            CHECK(rep.max_rel_err < 1e-4);
        }
        {
            Gradients g = zeros_like(model);
            ForwardCache fc = forward_cached(model, x);
            LossGrad lg = squared_error_loss(fc.out, t);
            backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);
            auto rep = fd_check(
                model, ParamGroup::All,
                [&](const ModelParams& m) { return squared_error_loss(forward(m, x), t).value; },
                g, pick, 25);
            CHECK(rep.max_rel_err < 1e-4);
        }
        {
            Gradients g = zeros_like(model);
            ForwardCache fc = forward_cached(model, x);
            LossGrad lg = weighted_discrepancy_loss(fc.out, w);
            backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);
            auto rep = fd_check(
                model, ParamGroup::All,
                [&](const ModelParams& m) {
                    return weighted_discrepancy_loss(forward(m, x), w).value;
                },
                g, pick, 25);
            CHECK(rep.max_rel_err < 1e-4);
        }
    }
}

TEST_CASE("backward respects parameter-group routing") {
    Rng rng(5), head2(6);
    ModelParams model = make_mlp_model(4, {8}, 4, 3, rng, head2);
    Matrix x = random_matrix(6, 4, rng);
    Matrix t = random_onehot(6, 3, rng);
    ForwardCache fc = forward_cached(model, x);
    LossGrad lg = cross_entropy_loss(fc.out, t);

    Gradients heads = zeros_like(model);
    backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::HeadsOnly, heads);
    for (const auto& l : heads.extractor)
        for (double v : l.weight.data) CHECK(v == 0.0);
    double head_mass = 0.0;
    for (double v : heads.head1.weight.data) head_mass += std::abs(v);
    CHECK(head_mass > 0.0);

    Gradients extr = zeros_like(model);
    backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::ExtractorOnly, extr);
    for (double v : extr.head1.weight.data) CHECK(v == 0.0);
    for (double v : extr.head2.weight.data) CHECK(v == 0.0);
    double extr_mass = 0.0;
    for (double v : extr.extractor[0].weight.data) extr_mass += std::abs(v);
    CHECK(extr_mass > 0.0);
}

TEST_CASE("sgd_step freezes masked groups bit-exactly, momentum included") {
    Rng rng(7), head2(8);
    ModelParams model = make_mlp_model(4, {8}, 4, 3, rng, head2);
    OptimState optim = make_optim(model, 0.05, 0.9, 0.001);
    Matrix x = random_matrix(6, 4, rng);
    Matrix t = random_onehot(6, 3, rng);

    auto step = [&](ParamGroup mask) {
        ForwardCache fc = forward_cached(model, x);
        LossGrad lg = cross_entropy_loss(fc.out, t);
        Gradients g = zeros_like(model);
        backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);
        sgd_step(model, optim, g, mask);
    };

    ModelParams before = model;
    Gradients mom_before = optim.momentum;
    step(ParamGroup::HeadsOnly);
    for (std::size_t i = 0; i < model.extractor.size(); ++i) {
        CHECK(model.extractor[i].weight.data == before.extractor[i].weight.data);
        CHECK(optim.momentum.extractor[i].weight.data == mom_before.extractor[i].weight.data);
    }
    CHECK(model.head1.weight.data != before.head1.weight.data);

    before = model;
    mom_before = optim.momentum;
    step(ParamGroup::ExtractorOnly);
    CHECK(model.head1.weight.data == before.head1.weight.data);
    CHECK(model.head2.weight.data == before.head2.weight.data);
    CHECK(optim.momentum.head1.weight.data == mom_before.head1.weight.data);
    CHECK(model.extractor[0].weight.data != before.extractor[0].weight.data);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    Rng rng(9), head2(10);
    ModelParams model = make_mlp_model(3, {5}, 3, 2, rng, head2);
    OptimState optim = make_optim(model, 0.0, 0.9, 0.001);
    Matrix x = random_matrix(4, 3, rng);
    Matrix t = random_onehot(4, 2, rng);
    ForwardCache fc = forward_cached(model, x);
    LossGrad lg = cross_entropy_loss(fc.out, t);
    Gradients g = zeros_like(model);
    backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);

    ModelParams before = model;
    sgd_step(model, optim, g, ParamGroup::All);
    CHECK(model == before);
}

TEST_CASE("initialization is deterministic and heads differ") {
    Rng a1(21), a2(22), b1(21), b2(22);
    ModelParams m1 = make_mlp_model(5, {8, 8}, 4, 3, a1, a2);
    ModelParams m2 = make_mlp_model(5, {8, 8}, 4, 3, b1, b2);
    CHECK(m1 == m2);
    CHECK(m1.head1.weight.data != m1.head2.weight.data);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    Rng rng(31), head2(32);
    ModelParams model = make_mlp_model(4, {6}, 4, 3, rng, head2);
    OptimState optim = make_optim(model, 0.02, 0.9, 0.0005);
    // take one step so momentum buffers are non-trivial
    Matrix x = random_matrix(5, 4, rng);
    Matrix t = random_onehot(5, 3, rng);
    ForwardCache fc = forward_cached(model, x);
    LossGrad lg = cross_entropy_loss(fc.out, t);
    Gradients g = zeros_like(model);
    backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, g);
    sgd_step(model, optim, g, ParamGroup::All);

    auto path = (std::filesystem::temp_directory_path() / "cleanset_ckpt_test.bin").string();
    save_checkpoint(path, model, optim);
    ModelParams loaded;
    OptimState loaded_optim;
    load_checkpoint(path, loaded, loaded_optim);
    std::filesystem::remove(path);

    CHECK(loaded == model);
    CHECK(loaded_optim.momentum.head1.weight.data == optim.momentum.head1.weight.data);
    CHECK(loaded_optim.momentum.extractor[0].weight.data ==
          optim.momentum.extractor[0].weight.data);
    CHECK(loaded_optim.learning_rate == optim.learning_rate);
    CHECK(loaded_optim.momentum_coef == optim.momentum_coef);
    CHECK(loaded_optim.weight_decay == optim.weight_decay);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/nowhere.bin", loaded, loaded_optim),
                    ConfigError);
}

TEST_CASE("discrepancy basics") {
    std::vector<double> p = {0.25, 0.25, 0.5};
    CHECK(discrepancy(p, p) == 0.0);
    std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0};
    CHECK(discrepancy(a, b) == doctest::Approx(2.0));
}
