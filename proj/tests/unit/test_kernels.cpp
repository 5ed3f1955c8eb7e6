#include "doctest.h"

#include <cstring>

#include "test_support.hpp"

using namespace ccombat;

namespace {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("serial and OpenMP kernels produce bitwise identical results") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const std::size_t n = 200, g = 37, p = 3, k = 6;
        const Matrix design = testing::random_matrix(n, p + 1, seed);
        const Matrix y = testing::random_matrix(n, g, seed + 1, 4.0);
        const Cholesky ch(gram(design));
        const auto fs = kernels::serial::feature_ols(design, ch, y);
        const auto fo = kernels::omp::feature_ols(design, ch, y);
        CHECK(bitwise_equal(fs.coefficients, fo.coefficients));
        CHECK(std::memcmp(fs.rss.data(), fo.rss.data(), g * sizeof(double)) == 0);

        const Matrix x = testing::random_matrix(n, p, seed + 2);
        const Matrix beta = testing::random_matrix(p, g, seed + 3);
        Vector alpha(g), sigma(g);
        Rng rng(seed);
        for (std::size_t j = 0; j < g; ++j) alpha[j] = rng.normal(), sigma[j] = rng.uniform(0.5, 2);
        const Matrix zs = kernels::serial::standardize(y, x, alpha, beta, sigma);
        CHECK(bitwise_equal(zs, kernels::omp::standardize(y, x, alpha, beta, sigma)));

        std::vector<std::size_t> groups(n);
        for (std::size_t r = 0; r < n; ++r) groups[r] = r % k;
        const auto ss = kernels::serial::group_stats(zs, groups, k);
        const auto so = kernels::omp::group_stats(zs, groups, k);
        CHECK(bitwise_equal(ss.mean, so.mean));
        CHECK(bitwise_equal(ss.centered_ss, so.centered_ss));

        const EBPriors pr = fit_priors(ss);
        const auto es = kernels::serial::eb_solve(ss, pr, {});
        const auto eo = kernels::omp::eb_solve(ss, pr, {});
        CHECK(bitwise_equal(es.gamma_star, eo.gamma_star));
        CHECK(bitwise_equal(es.delta_sq_star, eo.delta_sq_star));

        CHECK(bitwise_equal(kernels::serial::harmonize(y, x, alpha, beta, sigma, es.gamma_star, es.delta_sq_star, groups),
                            kernels::omp::harmonize(y, x, alpha, beta, sigma, es.gamma_star, es.delta_sq_star, groups)));

        const Matrix cents = testing::random_matrix(k, g, seed + 4);
        std::vector<std::size_t> as(n), ao(n);
        std::vector<double> ds(n), dd(n);
        const double is = kernels::serial::assign_nearest(zs, cents, as, ds);
        const double io = kernels::omp::assign_nearest(zs, cents, ao, dd);
        CHECK(as == ao);
        CHECK(std::memcmp(&is, &io, sizeof(double)) == 0);
    }
}
