#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cleanset/errors.hpp"
#include "cleanset/noisegen.hpp"
#include "cleanset/stage2.hpp"
#include "cleanset/trainer.hpp"
#include "test_util.hpp"

using namespace cleanset;
using namespace cleanset::testutil;

TEST_CASE("discrepancy worked examples") {
    std::vector<double> p = {0.5, 0.5};
    CHECK(discrepancy(p, p) == 0.0);
    std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0};
    CHECK(discrepancy(a, b) == doctest::Approx(2.0).epsilon(1e-12));
    std::vector<double> c = {0.6, 0.4}, d = {0.5, 0.5};
    CHECK(discrepancy(c, d) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("discrepancy is symmetric and bounded on probability rows") {
    Rng rng(81);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> a(5), b(5);
        double sa = 0.0, sb = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            a[j] = rng.uniform();
            b[j] = rng.uniform();
            sa += a[j];
            sb += b[j];
        }
        for (std::size_t j = 0; j < 5; ++j) {
            a[j] /= sa;
            b[j] /= sb;
        }
        double dab = discrepancy(a, b);
        CHECK(dab == discrepancy(b, a));
        CHECK(dab >= 0.0);
        CHECK(dab <= 2.0 + 1e-12);
    }
}

TEST_CASE("weighted discrepancy scales linearly in the class weight") {
    std::vector<double> p1 = {0.7, 0.3}, p2 = {0.5, 0.5};  // D = 0.4
    CHECK(weighted_discrepancy(p1, p2, 0.0) == 0.0);
    CHECK(weighted_discrepancy(p1, p2, 1.0) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(weighted_discrepancy(p1, p2, 0.3) == doctest::Approx(0.12).epsilon(1e-12));
    CHECK_THROWS_AS((void)weighted_discrepancy(p1, p2, 1.5), ConfigError);
}

TEST_CASE("class_frequencies sum to one and match counts") {
    std::vector<int> labels = {0, 0, 0, 1, 2, 2};
    auto w = class_frequencies(labels, 3);
    CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<int> none;
    CHECK_THROWS_AS((void)class_frequencies(none, 3), ConfigError);
}

namespace {

struct Fixture {
    LabeledDataset train;
    ModelParams model;
    OptimState optim;
    Partition s1;

    explicit Fixture(std::uint64_t seed = 3) : optim{} {
        BlobSpec spec;
        spec.n_per_class = 100;
        train = apply_boundary_idn(make_blobs(spec, seed), 0.4, seed);
        Rng init(derive_stream(seed, "model-init")), h2(derive_stream(seed, "head2-init"));
        Rng shuf(derive_stream(seed, "train-shuffle"));
        model = make_mlp_model(8, {32, 32}, 16, 4, init, h2);
        optim = make_optim(model, 0.02, 0.9, 0.0005);
        train_cross_entropy_epochs(model, optim, train, 5, 64, shuf);
        Stage1Options s1opts;
        s1opts.membership = MembershipSource::PredictedLabel;
        s1 = stage1_partition(model, train, s1opts);
    }
};

}  // namespace

TEST_CASE("discrepancy maximization trains only the heads") {
    Fixture fx;
    auto freqs = class_frequencies(fx.train.noisy_labels, 4);
    auto s1_clean = clean_indices(fx.s1);
    REQUIRE(!s1_clean.empty());

    ModelParams before = fx.model;
    Gradients mom_before = fx.optim.momentum;
    double saved_lr = fx.optim.learning_rate;
    Stage2Options opts;
    opts.head_lr_scale = 0.1;
    Rng batch_rng(99);
    double lmin = maximize_head_discrepancy(fx.model, fx.optim, fx.train, s1_clean, freqs, opts,
                                            batch_rng);
    CHECK(lmin <= 0.0);  // L_min = -lambda_min * D*, D* >= 0
    for (std::size_t i = 0; i < fx.model.extractor.size(); ++i) {
        CHECK(fx.model.extractor[i].weight.data == before.extractor[i].weight.data);
        CHECK(fx.model.extractor[i].bias == before.extractor[i].bias);
        CHECK(fx.optim.momentum.extractor[i].weight.data ==
              mom_before.extractor[i].weight.data);
    }
    CHECK(fx.model.head1.weight.data != before.head1.weight.data);
    CHECK(fx.model.head2.weight.data != before.head2.weight.data);
    CHECK(fx.optim.learning_rate == saved_lr);  // restored after the scaled steps

    // the trained objective actually grew
    auto d_before = evaluate_consistency(before, fx.train, s1_clean, freqs);
    auto d_after = evaluate_consistency(fx.model, fx.train, s1_clean, freqs);
    double m0 = std::accumulate(d_before.d_star.begin(), d_before.d_star.end(), 0.0);
    double m1 = std::accumulate(d_after.d_star.begin(), d_after.d_star.end(), 0.0);
    CHECK(m1 > m0);
}

TEST_CASE("lambda_min = 0 is a strict no-op") {
    Fixture fx;
    auto freqs = class_frequencies(fx.train.noisy_labels, 4);
    auto s1_clean = clean_indices(fx.s1);
    ModelParams before = fx.model;
    Stage2Options opts;
    opts.lambda_min = 0.0;
    Rng batch_rng(7);
    double lmin = maximize_head_discrepancy(fx.model, fx.optim, fx.train, s1_clean, freqs, opts,
                                            batch_rng);
    CHECK(lmin == 0.0);
    CHECK(fx.model == before);
}

TEST_CASE("evaluate_consistency reports D and class-weighted D*") {
    Fixture fx;
    auto freqs = class_frequencies(fx.train.noisy_labels, 4);
    auto s1_clean = clean_indices(fx.s1);
    auto rep = evaluate_consistency(fx.model, fx.train, s1_clean, freqs);
    REQUIRE(rep.d.size() == s1_clean.size());
    ForwardResult fr = forward(fx.model, fx.train.features);
    for (std::size_t i = 0; i < s1_clean.size(); ++i) {
        std::size_t s = s1_clean[i];
        double oracle = 0.0;
        for (std::size_t j = 0; j < 4; ++j)
            oracle += std::abs(fr.probs1(s, j) - fr.probs2(s, j));
        CHECK(rep.d[i] == doctest::Approx(oracle).epsilon(1e-12));
        CHECK(rep.d_star[i] ==
              doctest::Approx(freqs[fx.train.noisy_labels[s]] * oracle).epsilon(1e-12));
    }
}

TEST_CASE("stage-2 clean set nests inside stage 1") {
    Fixture fx;
    auto freqs = class_frequencies(fx.train.noisy_labels, 4);
    auto s1_clean = clean_indices(fx.s1);
    Stage2Options opts;
    opts.head_lr_scale = 0.1;
    Rng batch_rng(5);
    maximize_head_discrepancy(fx.model, fx.optim, fx.train, s1_clean, freqs, opts, batch_rng);
    Stage2Result res = stage2_partition(fx.model, fx.train, fx.s1, opts);
    CHECK(res.partition.stage == Stage::S2);
    for (std::size_t i = 0; i < fx.train.size(); ++i) {
        if (res.partition.is_clean[i]) CHECK(fx.s1.is_clean[i]);
        if (!fx.s1.is_clean[i]) {
            // rejects keep their stage-1 posterior and stay rejected
            CHECK(res.partition.posterior_clean[i] == fx.s1.posterior_clean[i]);
        } else if (!res.fell_back) {
            CHECK(res.partition.posterior_clean[i] > opts.theta * 0.999);
        }
    }
    CHECK(res.partition.clean_count() <= fx.s1.clean_count());
}

TEST_CASE("identical heads give constant D and a flagged fallback") {
    Fixture fx;
    fx.model.head2 = fx.model.head1;  // D == 0 everywhere
    Stage2Options opts;
    Stage2Result res = stage2_partition(fx.model, fx.train, fx.s1, opts);
    CHECK(res.fell_back);
    CHECK(res.partition.is_clean == fx.s1.is_clean);
    CHECK(res.partition.stage == Stage::S2);
}

TEST_CASE("empty stage-1 clean set falls back") {
    Fixture fx;
    Partition empty = fx.s1;
    std::fill(empty.is_clean.begin(), empty.is_clean.end(), false);
    Stage2Result res = stage2_partition(fx.model, fx.train, empty, {});
    CHECK(res.fell_back);
    CHECK(res.partition.clean_count() == 0);
    Rng rng(1);
    CHECK_THROWS_AS(maximize_head_discrepancy(fx.model, fx.optim, fx.train, {}, {}, {}, rng),
                    ConfigError);
}

TEST_CASE("mislabeled stage-1 survivors show larger discrepancy than clean ones") {
    Fixture fx;
    auto freqs = class_frequencies(fx.train.noisy_labels, 4);
    auto s1_clean = clean_indices(fx.s1);
    Stage2Options opts;
    opts.head_lr_scale = 0.1;
    Rng batch_rng(13);
    maximize_head_discrepancy(fx.model, fx.optim, fx.train, s1_clean, freqs, opts, batch_rng);
    auto rep = evaluate_consistency(fx.model, fx.train, s1_clean, freqs);
    double d_clean = 0.0, d_noisy = 0.0;
    std::size_t nc = 0, nn = 0;
    for (std::size_t i = 0; i < s1_clean.size(); ++i) {
        std::size_t s = s1_clean[i];
        if (fx.train.true_labels[s] == fx.train.noisy_labels[s]) {
            d_clean += rep.d[i];
            ++nc;
        } else {
            d_noisy += rep.d[i];
            ++nn;
        }
    }
    REQUIRE(nc > 0);
    REQUIRE(nn > 0);
    CHECK(d_noisy / static_cast<double>(nn) > d_clean / static_cast<double>(nc));
}

TEST_CASE("class-coverage guard rejects class-killing splits") {
    Fixture fx;
    // push head2 far from head1 on one class direction so the GMM split
    // would strip it; a synthetic check of the guard is simpler and exact:
    Stage2Options opts;
    opts.min_class_coverage = 1.01;  // impossible to satisfy -> always fall back
    Stage2Result res = stage2_partition(fx.model, fx.train, fx.s1, opts);
    CHECK(res.fell_back);
    CHECK(res.partition.is_clean == fx.s1.is_clean);
}
