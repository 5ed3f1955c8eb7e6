#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "test_support.hpp"

using namespace ccombat;

TEST_CASE("rmse, mae and accuracy against hand computations") {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix b = Matrix::from_rows({{1, 0}, {3, 8}});
    CHECK(rmse(a, b) == doctest::Approx(std::sqrt(20.0 / 4.0)));
    CHECK_THROWS_AS(rmse(a, Matrix(1, 2)), DimensionError);
    CHECK(mae(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 1}) == doctest::Approx(1.0));
    CHECK(classification_accuracy(std::vector<int>{1, 0, 1, 1}, std::vector<int>{1, 1, 1, 0}) == doctest::Approx(0.5));
}

TEST_CASE("adjusted Rand index reference values") {
    using V = std::vector<std::size_t>;
    CHECK(adjusted_rand_index(V{0, 0, 1, 1}, V{1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index(V{0, 0, 1, 1}, V{0, 0, 1, 2}) == doctest::Approx(4.0 / 7.0));
    CHECK(adjusted_rand_index(V{0, 0, 1, 1}, V{0, 1, 0, 1}) == doctest::Approx(-0.5));
    CHECK(adjusted_rand_index(V{0, 0, 0, 0}, V{0, 1, 2, 3}) == doctest::Approx(0.0));
    CHECK(adjusted_rand_index(V{0, 0, 0}, V{0, 0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("EvalReport summary and round trip") {
    EvalReport r{"rmse:combat", "Data-1", {1, 2, 3}, {1.0, 2.0, 4.0}};
    CHECK(r.mean() == doctest::Approx(7.0 / 3.0));
    CHECK(r.variance() == doctest::Approx(((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) +
                                           (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2.0));
    const EvalReport back = EvalReport::from_json(r.to_json());
    CHECK(back.values == r.values);
    CHECK(back.seeds == r.seeds);
    CHECK(EvalReport{"m", "c", {1}, {3.0}}.variance() == 0.0);
}

TEST_CASE("linear regression matches an Eigen least-squares fit") {
    const Matrix x = testing::random_matrix(30, 3, 4);
    Vector y(30);
    Rng rng(5);
    for (std::size_t r = 0; r < 30; ++r) y[r] = 1.5 + 2 * x(r, 0) - x(r, 2) + rng.normal(0, 0.1);
    const auto res = linreg_fit_predict(x, y, x);
    Eigen::MatrixXd d(30, 4);
    d.col(0).setOnes();
    d.rightCols(3) = testing::to_eigen(x);
    Eigen::VectorXd ey(30);
    for (int r = 0; r < 30; ++r) ey(r) = y[r];
    const Eigen::VectorXd coef = d.colPivHouseholderQr().solve(ey);
    for (int k = 0; k < 4; ++k) CHECK(res.coefficients[k] == doctest::Approx(coef(k)).epsilon(1e-10));
    CHECK_FALSE(res.ridge_fallback);
}

TEST_CASE("logistic regression separates separable data with a monotone objective") {
    Rng rng(1);
    const std::size_t n = 200;
    Matrix x(n, 2);
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        y[r] = static_cast<int>(r % 3);
        x(r, 0) = 4.0 * y[r] + rng.normal(0, 0.3);
        x(r, 1) = rng.normal();
    }
    const LogRegModel m = logreg_fit(x, y, 3);
    CHECK(classification_accuracy(logreg_predict(m, x), y) == doctest::Approx(1.0));
    for (std::size_t i = 1; i < m.loss_trace.size(); ++i) CHECK(m.loss_trace[i] <= m.loss_trace[i - 1]);
    CHECK(m.loss_trace.front() == doctest::Approx(std::log(3.0)));
}

TEST_CASE("logistic regression on noise is near chance") {
    const Matrix train = testing::random_matrix(2000, 5, 7), test = testing::random_matrix(2000, 5, 8);
    Rng rng(9);
    std::vector<int> ytr(2000), yte(2000);
    for (auto& v : ytr) v = static_cast<int>(rng.index(2));
    for (auto& v : yte) v = static_cast<int>(rng.index(2));
    const double acc = classification_accuracy(logreg_fit_predict(train, ytr, test, 2), yte);
    CHECK(std::abs(acc - 0.5) < 0.05);
}

TEST_CASE("logistic regression input checks") {
    const Matrix x = testing::random_matrix(4, 2, 1);
    CHECK_THROWS_AS(logreg_fit(x, std::vector<int>{0, 0, 0, 0}, 2), RangeError);
    CHECK_THROWS_AS(logreg_fit(x, std::vector<int>{0, 1, 2, 0}, 2), RangeError);
}

TEST_CASE("PCA plot export writes one row per sample") {
    const SynthData sd = generate(table1_config(1, 1));
    const auto path = std::filesystem::temp_directory_path() / "ccombat_unit" / "pca.csv";
    std::filesystem::create_directories(path.parent_path());
    export_pca_plot_data(sd.dataset.features(), sd.dataset.site_of(), sd.truth.cluster_of_row, sd.truth.labels, path);
    const CsvTable t = read_csv_table(path);
    CHECK(t.header == std::vector<std::string>{"pc1", "pc2", "site", "cluster", "label"});
    CHECK(t.rows.size() == sd.dataset.n_samples());
}
