#include "doctest.h"

#include <cmath>

#include "test_support.hpp"

using namespace ccombat;

TEST_CASE("generation is deterministic per seed") {
    const SynthData a = generate(table1_config(1, 17));
    const SynthData b = generate(table1_config(1, 17));
    const SynthData c = generate(table1_config(1, 18));
    CHECK(a.dataset.features() == b.dataset.features());
    CHECK(a.truth.ground_truth == b.truth.ground_truth);
    CHECK_FALSE(a.dataset.features() == c.dataset.features());
}

TEST_CASE("preset shapes and cluster layout") {
    const std::size_t sites[] = {20, 25, 30, 35, 40}, feats[] = {20, 25, 30, 40, 50};
    for (int k = 1; k <= 5; ++k) {
        const SynthConfig cfg = table1_config(k);
        CHECK(cfg.n_sites == sites[k - 1]);
        CHECK(cfg.samples_per_site == sites[k - 1]);
        CHECK(cfg.n_features == feats[k - 1]);
        CHECK(cfg.n_clusters() == sites[k - 1] / 5);
    }
    CHECK_THROWS_AS(table1_config(6), RangeError);
    CHECK_THROWS_AS(table1_config(0), RangeError);
    SynthConfig bad = table1_config(1);
    bad.sites_per_cluster = 3;
    CHECK_THROWS_AS(generate(bad), ConfigError);
}

TEST_CASE("sites in one cluster share location and scale parameters") {
    const SynthData sd = generate(table1_config(1, 3));
    const auto& t = sd.truth;
    for (std::size_t i = 0; i < 20; ++i) CHECK(t.cluster_of_site[i] == i / 5);
    for (std::size_t r = 0; r < sd.dataset.n_samples(); ++r)
        CHECK(t.cluster_of_row[r] == t.cluster_of_site[sd.dataset.site_index_of()[r]]);
    // Ground truth is alpha + X beta.
    const auto& p = t.params;
    for (std::size_t r = 0; r < sd.dataset.n_samples(); r += 7)
        for (std::size_t g = 0; g < 20; ++g) {
            double v = p.alpha[g];
            for (std::size_t k = 0; k < 5; ++k) v += sd.dataset.covariates()(r, k) * p.beta(k, g);
            CHECK(t.ground_truth(r, g) == doctest::Approx(v).epsilon(1e-12));
        }
    // Centered location effects.
    for (std::size_t g = 0; g < 20; ++g) {
        double s = 0;
        for (std::size_t c = 0; c < 4; ++c) s += p.gamma(c, g);
        CHECK(std::abs(s) < 1e-9);
    }
}

TEST_CASE("per-cluster residual means match the generating location effects") {
    SynthConfig cfg = table1_config(1, 11);
    cfg.samples_per_site = 200;
    const SynthData sd = generate(cfg);
    const auto& p = sd.truth.params;
    const std::size_t c_count = cfg.n_clusters(), g_count = cfg.n_features;
    Matrix sum(c_count, g_count);
    std::vector<double> count(c_count, 0);
    for (std::size_t r = 0; r < sd.dataset.n_samples(); ++r) {
        const std::size_t c = sd.truth.cluster_of_row[r];
        ++count[c];
        for (std::size_t g = 0; g < g_count; ++g) sum(c, g) += sd.dataset.features()(r, g) - sd.truth.ground_truth(r, g);
    }
    for (std::size_t c = 0; c < c_count; ++c)
        for (std::size_t g = 0; g < g_count; ++g) {
            const double tol = 3.0 * p.delta(c, g) * p.sigma[g] / std::sqrt(count[c]);
            CHECK(std::abs(sum(c, g) / count[c] - p.gamma(c, g)) < tol);
        }
}

TEST_CASE("labels are balanced and shift the covariates") {
    const SynthData sd = generate(table1_config(2, 1));
    double pos = 0, mean1 = 0, mean0 = 0;
    for (std::size_t r = 0; r < sd.truth.labels.size(); ++r) {
        const double x = sd.dataset.covariates()(r, 0);
        if (sd.truth.labels[r] == 1) ++pos, mean1 += x;
        else mean0 += x;
    }
    const double n = static_cast<double>(sd.truth.labels.size());
    CHECK(std::abs(pos / n - 0.5) < 0.05);
    CHECK(mean1 / pos > 0.3);
    CHECK(mean0 / (n - pos) < -0.3);
}
