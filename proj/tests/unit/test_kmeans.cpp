#include "doctest.h"

#include <algorithm>
#include <limits>

#include "test_support.hpp"

using namespace ccombat;

TEST_CASE("two clusters on a line: known optimum") {
    const Matrix x = Matrix::from_rows({{0}, {1}, {9}, {10}});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto fit = kmeans_fit(x, 2, seed, ClusterSpace::SampleFeature, {300, 1e-10, 5});
        std::vector<double> c{fit.model.centroids(0, 0), fit.model.centroids(1, 0)};
        std::sort(c.begin(), c.end());
        CHECK(c[0] == doctest::Approx(0.5));
        CHECK(c[1] == doctest::Approx(9.5));
        CHECK(fit.model.inertia == doctest::Approx(1.0));
    }
}

TEST_CASE("k-means reaches the brute-force optimum on small separated sets") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const std::size_t n = 8;
        Matrix x(n, 2);
        for (std::size_t r = 0; r < n; ++r) {
            const double off = r < 4 ? 0.0 : 20.0;
            x(r, 0) = off + rng.normal();
            x(r, 1) = rng.normal();
        }
        // Exhaustive search over 2-partitions.
        double best = std::numeric_limits<double>::infinity();
        for (unsigned mask = 1; mask < (1u << n) - 1; ++mask) {
            double total = 0.0;
            for (unsigned side = 0; side < 2; ++side) {
                double mx = 0, my = 0, cnt = 0;
                for (std::size_t r = 0; r < n; ++r)
                    if (((mask >> r) & 1u) == side) mx += x(r, 0), my += x(r, 1), ++cnt;
                mx /= cnt, my /= cnt;
                for (std::size_t r = 0; r < n; ++r)
                    if (((mask >> r) & 1u) == side)
                        total += (x(r, 0) - mx) * (x(r, 0) - mx) + (x(r, 1) - my) * (x(r, 1) - my);
            }
            best = std::min(best, total);
        }
        const auto fit = kmeans_fit(x, 2, seed, ClusterSpace::SampleFeature, {300, 1e-12, 10});
        CHECK(fit.model.inertia == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("k-means edge cases") {
    const Matrix x = testing::random_matrix(6, 3, 2);
    SUBCASE("one cluster is the mean") {
        const auto fit = kmeans_fit(x, 1, 0);
        for (std::size_t c = 0; c < 3; ++c) {
            double m = 0;
            for (std::size_t r = 0; r < 6; ++r) m += x(r, c);
            CHECK(fit.model.centroids(0, c) == doctest::Approx(m / 6));
        }
    }
    SUBCASE("as many clusters as points gives zero inertia") {
        const auto fit = kmeans_fit(x, 6, 0);
        CHECK(fit.model.inertia == doctest::Approx(0.0));
    }
    SUBCASE("invalid counts") {
        CHECK_THROWS_AS(kmeans_fit(x, 0, 0), RangeError);
        CHECK_THROWS_AS(kmeans_fit(x, 7, 0), RangeError);
    }
}

TEST_CASE("nearest-centroid ties go to the lowest index") {
    ClusterModel m;
    m.centroids = Matrix::from_rows({{-1.0}, {1.0}, {1.0}});
    const auto a = kmeans_predict(m, Matrix::from_rows({{0.0}, {1.0}, {2.0}}));
    CHECK(a == std::vector<std::size_t>{0, 1, 1});
}

TEST_CASE("Lloyd iterations never increase inertia") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix x = testing::random_matrix(50, 3, seed);
        const auto fit = kmeans_fit(x, 4, seed);
        for (std::size_t i = 1; i < fit.inertia_trace.size(); ++i)
            CHECK(fit.inertia_trace[i] <= fit.inertia_trace[i - 1] + 1e-9);
        CHECK(kmeans_predict(fit.model, x) == fit.assignment);
    }
}

TEST_CASE("k-means is deterministic for a seed") {
    const Matrix x = testing::random_matrix(40, 2, 5);
    const auto a = kmeans_fit(x, 3, 11, ClusterSpace::SampleFeature, {300, 1e-10, 3});
    const auto b = kmeans_fit(x, 3, 11, ClusterSpace::SampleFeature, {300, 1e-10, 3});
    CHECK(a.model.centroids == b.model.centroids);
    CHECK(a.assignment == b.assignment);
}

TEST_CASE("standardizer uses population sd and treats constant columns as unit scale") {
    const Matrix x = Matrix::from_rows({{1, 5}, {3, 5}});
    Vector shift, scale;
    fit_standardizer(x, shift, scale);
    CHECK(shift == Vector{2, 5});
    CHECK(scale == Vector{1, 1});
    const Matrix z = apply_standardizer(x, shift, scale);
    CHECK(z(0, 0) == -1.0);
    CHECK(z(1, 1) == 0.0);
}
