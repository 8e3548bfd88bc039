#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cleanset/errors.hpp"
#include "cleanset/trainer.hpp"
#include "test_util.hpp"

using namespace cleanset;
using namespace cleanset::testutil;

TEST_CASE("sharpen_rows: T=1 identity, T->0 approaches one-hot") {
    Matrix p(1, 3);
    p.data = {0.5, 0.3, 0.2};
    Matrix same = sharpen_rows(p, 1.0);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(same(0, j) == doctest::Approx(p(0, j)).epsilon(1e-12));

    Matrix sharp = sharpen_rows(p, 0.05);
    CHECK(sharp(0, 0) > 0.999);
    double sum = sharp(0, 0) + sharp(0, 1) + sharp(0, 2);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    Matrix zero(1, 2, 0.0);
    CHECK_THROWS_AS((void)sharpen_rows(zero, 0.5), NumericError);
}

TEST_CASE("guess_labels with no jitter and T=1 is the plain head average") {
    Rng rng(51), h2(52), grng(53);
    ModelParams model = make_mlp_model(4, {6}, 4, 3, rng, h2);
    Matrix x = random_matrix(5, 4, rng);
    Matrix guessed = guess_labels(model, x, 1.0, 1, 0.0, grng);
    ForwardResult fr = forward(model, x);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(guessed(i, j) ==
                  doctest::Approx(0.5 * (fr.probs1(i, j) + fr.probs2(i, j))).epsilon(1e-12));
    CHECK_THROWS_AS((void)guess_labels(model, x, 1.0, 0, 0.0, grng), ConfigError);
}

TEST_CASE("mix_rows with lambda=1 returns the first batch") {
    Rng rng(61);
    Matrix x1 = random_matrix(4, 3, rng), x2 = random_matrix(4, 3, rng);
    Matrix t1 = random_onehot(4, 2, rng), t2 = random_onehot(4, 2, rng);
    Matrix xo, to;
    mix_rows(x1, t1, x2, t2, 1.0, &xo, &to);
    CHECK(xo.data == x1.data);
    CHECK(to.data == t1.data);
    mix_rows(x1, t1, x2, t2, 0.25, &xo, &to);
    for (std::size_t i = 0; i < xo.data.size(); ++i)
        CHECK(xo.data[i] == doctest::Approx(0.25 * x1.data[i] + 0.75 * x2.data[i]));
}

TEST_CASE("prepare_step4_batch shapes and mixup dominance") {
    Rng rng(71), h2(72), mix(73);
    ModelParams model = make_mlp_model(4, {6}, 4, 3, rng, h2);
    Matrix cx = random_matrix(6, 4, rng);
    Matrix ct = random_onehot(6, 3, rng);
    Matrix nx = random_matrix(4, 4, rng);
    std::vector<double> w(10, 0.25);
    TrainConfig cfg;
    Step4Batch b = prepare_step4_batch(model, cx, ct, nx, w, cfg, mix);
    CHECK(b.clean_x.rows == 6);
    CHECK(b.clean_t.rows == 6);
    CHECK(b.noisy_x.rows == 4);
    CHECK(b.noisy_t.rows == 4);
    CHECK(b.raw_x.rows == 10);
    CHECK(b.raw_w.size() == 10);
    // lambda' = max(lambda, 1-lambda) >= 0.5 keeps the own-batch rows dominant:
    // mixed targets put at least half their mass on the original target rows
    for (std::size_t i = 0; i < 6; ++i) {
        double mass = 0.0;
        for (std::size_t j = 0; j < 3; ++j)
            if (ct(i, j) == 1.0) mass += b.clean_t(i, j);
        CHECK(mass >= 0.5 - 1e-12);
    }
    // targets remain distributions
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 3; ++j) s += b.noisy_t(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("step4 loss routing: the consistency term touches only the extractor") {
    Rng rng(81), h2(82), mix(83);
    ModelParams model = make_mlp_model(4, {6}, 4, 3, rng, h2);
    Matrix cx = random_matrix(6, 4, rng);
    Matrix ct = random_onehot(6, 3, rng);
    Matrix nx = random_matrix(6, 4, rng);
    std::vector<double> w(12, 0.3);
    TrainConfig cfg;
    Step4Batch b = prepare_step4_batch(model, cx, ct, nx, w, cfg, mix);

    Gradients g0 = zeros_like(model), g1 = zeros_like(model);
    Step4Losses l0 = step4_gradients(model, b, 25.0, 0.0, g0);
    Step4Losses l1 = step4_gradients(model, b, 25.0, 0.1, g1);
    CHECK(l0.lmax == 0.0);
    CHECK(l1.lmax != 0.0);
    CHECK(l0.lx == l1.lx);
    CHECK(l0.lu == l1.lu);
    CHECK(l1.total() == doctest::Approx(l1.lx + l1.lu + l1.lmax).epsilon(1e-15));
    // heads see identical gradients with and without the lambda_max term
    CHECK(g0.head1.weight.data == g1.head1.weight.data);
    CHECK(g0.head2.weight.data == g1.head2.weight.data);
    CHECK(g0.extractor[0].weight.data != g1.extractor[0].weight.data);
}

TEST_CASE("step4 with lambda_u=0 and lambda_max=0 reduces to supervised CE") {
    Rng rng(91), h2(92), mix(93);
    ModelParams model = make_mlp_model(4, {6}, 4, 3, rng, h2);
    Matrix cx = random_matrix(6, 4, rng);
    Matrix ct = random_onehot(6, 3, rng);
    std::vector<double> w(6, 0.3);
    TrainConfig cfg;
    Step4Batch b = prepare_step4_batch(model, cx, ct, Matrix(0, 4), w, cfg, mix);

    Gradients g = zeros_like(model);
    Step4Losses l = step4_gradients(model, b, 0.0, 0.0, g);
    Gradients ref = zeros_like(model);
    ForwardCache fc = forward_cached(model, b.clean_x);
    LossGrad lg = cross_entropy_loss(fc.out, b.clean_t);
    backward(model, fc, lg.dlogits1, lg.dlogits2, ParamGroup::All, ref);
    CHECK(l.lx == lg.value);
    CHECK(l.lu == 0.0);
    CHECK(l.lmax == 0.0);
    CHECK(g.head1.weight.data == ref.head1.weight.data);
    CHECK(g.extractor[0].weight.data == ref.extractor[0].weight.data);
}

TEST_CASE("step4 gradients pass finite differences per routing group") {
    Rng rng(101), h2(102), mix(103), pick(104);
    ModelParams model = make_mlp_model(4, {6}, 4, 3, rng, h2);
    Matrix cx = random_matrix(5, 4, rng);
    Matrix ct = random_onehot(5, 3, rng);
    Matrix nx = random_matrix(5, 4, rng);
    std::vector<double> w(10);
    for (double& v : w) v = rng.uniform();
    TrainConfig cfg;
    Step4Batch b = prepare_step4_batch(model, cx, ct, nx, w, cfg, mix);
    const double lu = 3.0, lm = 0.2;

    Gradients g = zeros_like(model);
    step4_gradients(model, b, lu, lm, g);

    // extractor coordinates feel all three terms
    auto total = [&](const ModelParams& m) {
        Gradients scratch = zeros_like(m);
        return step4_gradients(m, b, lu, lm, scratch).total();
    };
    auto rep = fd_check(model, ParamGroup::ExtractorOnly, total, g, pick, 25);
    CHECK(rep.max_rel_err < 1e-4);

    // head coordinates feel only L_X + lambda_u * L_U by design
    auto supervised = [&](const ModelParams& m) {
        Gradients scratch = zeros_like(m);
        Step4Losses l = step4_gradients(m, b, lu, lm, scratch);
        return l.lx + l.lu;
    };
    rep = fd_check(model, ParamGroup::HeadsOnly, supervised, g, pick, 25);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("zero epochs of CE training change nothing") {
    Rng rng(111), h2(112), shuf(113);
    ModelParams model = make_mlp_model(8, {6}, 4, 4, rng, h2);
    OptimState optim = make_optim(model, 0.02, 0.9, 0.0005);
    BlobSpec spec;
    spec.n_per_class = 20;
    LabeledDataset ds = make_blobs(spec, 3);
    ModelParams before = model;
    train_cross_entropy_epochs(model, optim, ds, 0, 64, shuf);
    CHECK(model == before);
    train_cross_entropy_epochs(model, optim, ds, 2, 64, shuf);
    CHECK_FALSE(model == before);
}

TEST_CASE("row-restricted CE trains only as supervised by those rows") {
    Rng rng(121), h2(122), shuf(123);
    ModelParams model = make_mlp_model(8, {6}, 4, 4, rng, h2);
    OptimState optim = make_optim(model, 0.02, 0.9, 0.0005);
    BlobSpec spec;
    spec.n_per_class = 20;
    LabeledDataset ds = make_blobs(spec, 3);
    double loss = -1.0;
    train_cross_entropy_on_rows(model, optim, ds, {0, 1, 2, 3, 20, 21}, 4, shuf, &loss);
    CHECK(loss > 0.0);
}

namespace {

TrainConfig tiny_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.data.n_per_class = 40;
    cfg.test_n_per_class = 20;
    cfg.epochs = 10;
    cfg.warmup_epochs = 3;
    cfg.n_max = 10;
    return cfg;
}

}  // namespace

TEST_CASE("run_training produces a coherent report") {
    TrainConfig cfg = tiny_config(5);
    TrainOutput out = run_training(cfg);
    CHECK(out.report.epochs.size() == 7);  // epochs - warmup
    CHECK(out.report.train_noise_rate == doctest::Approx(0.4).epsilon(0.05));
    for (const auto& e : out.report.epochs) {
        CHECK(e.test_acc_ensemble >= 0.0);
        CHECK(e.test_acc_ensemble <= 1.0);
        CHECK(e.n_s2_clean <= out.train_set.size());
        CHECK(e.n_s2_clean <= e.n_s1_clean);  // stage-2 only ever trims
        if (!std::isnan(e.auc_s1)) {
            CHECK(e.auc_s1 >= 0.0);
            CHECK(e.auc_s1 <= 1.0);
        }
    }
}

TEST_CASE("run_training is deterministic") {
    TrainConfig cfg = tiny_config(7);
    TrainOutput a = run_training(cfg);
    TrainOutput b = run_training(cfg);
    CHECK(report_to_json(a.report) == report_to_json(b.report));
    CHECK(report_to_csv(a.report) == report_to_csv(b.report));
    CHECK(a.model == b.model);
}

TEST_CASE("ablation switches change the step-4 objective") {
    TrainConfig cfg = tiny_config(9);
    cfg.use_stage1 = false;
    cfg.use_stage2 = false;
    TrainOutput ce = run_training(cfg);
    for (const auto& e : ce.report.epochs) {
        CHECK(e.n_s1_clean == ce.train_set.size());  // everything "clean"
        CHECK(e.loss_u == 0.0);
        CHECK(e.loss_max == 0.0);
        CHECK(e.loss_min == 0.0);
    }

    cfg.use_stage1 = true;
    TrainOutput s1only = run_training(cfg);
    for (const auto& e : s1only.report.epochs) {
        CHECK(e.loss_u == 0.0);  // no MixMatch without stage 2
        CHECK(e.loss_max == 0.0);
        CHECK(e.n_s2_clean == e.n_s1_clean);  // pass-through partition
    }

    cfg.use_stage2 = true;
    TrainOutput full = run_training(cfg);
    bool any_semi = false;
    for (const auto& e : full.report.epochs)
        if (e.loss_u != 0.0 || e.loss_max != 0.0) any_semi = true;
    CHECK(any_semi);
}

TEST_CASE("lambda_u ramp reaches its plateau") {
    TrainConfig cfg = tiny_config(11);
    cfg.lambda_u_ramp_epochs = 0;  // disabled: full weight from the start
    TrainOutput out = run_training(cfg);
    CHECK(out.report.epochs.size() == 7);
}

TEST_CASE("report serialization carries config and per-epoch keys") {
    TrainConfig cfg = tiny_config(13);
    TrainOutput out = run_training(cfg);
    std::string json = report_to_json(out.report);
    for (const char* key :
         {"\"config\"", "\"seed\"", "\"warmup_test_acc\"", "\"train_noise_rate\"",
          "\"auc_s1\"", "\"auc_s2\"", "\"precision_s1\"", "\"precision_s2\"",
          "\"s1_class_distribution\"", "\"loss_min\"", "\"note\""})
        CHECK(json.find(key) != std::string::npos);
    std::string csv = report_to_csv(out.report);
    CHECK(csv.rfind("epoch, acc, auc_s1, auc_s2, n_s1, n_s2, Lx, Lu, Lmin, Lmax\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == out.report.epochs.size() + 1);
}

TEST_CASE("train/test sets share geometry but not samples") {
    TrainConfig cfg = tiny_config(15);
    LabeledDataset train = build_train_dataset(cfg);
    LabeledDataset test = build_test_dataset(cfg);
    CHECK(train.size() == 160);
    CHECK(test.size() == 80);
    CHECK(test.noisy_labels == test.true_labels);  // test labels stay clean
    CHECK(train.features.data != test.features.data);
}
