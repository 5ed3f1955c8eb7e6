#include "ccombat/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccombat/error.hpp"

namespace ccombat {

Cholesky::Cholesky(const Matrix& a, double rel_tol) : l_(a.rows(), a.cols()) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw DimensionError("Cholesky: matrix is not square");
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
    const double floor = rel_tol * std::max(max_diag, 1e-300);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
        if (!(d > floor))
            throw RankDeficientError("normal matrix is singular or not positive definite (pivot " +
                                     std::to_string(j) + "); set a positive ridge to regularize");
        const double ljj = std::sqrt(d);
        l_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
            l_(i, j) = s / ljj;
        }
    }
}

void Cholesky::solve_in_place(std::span<double> x) const {
    const std::size_t n = size();
    if (x.size() != n) throw DimensionError("Cholesky::solve: rhs has wrong length");
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * x[k];
        x[i] = s / l_(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * x[k];
        x[ii] = s / l_(ii, ii);
    }
}

Vector Cholesky::solve(std::span<const double> rhs) const {
    Vector x(rhs.begin(), rhs.end());
    solve_in_place(x);
    return x;
}

Matrix gram(const Matrix& d) {
    const std::size_t q = d.cols();
    Matrix g(q, q);
    for (std::size_t r = 0; r < d.rows(); ++r) {
        auto row = d.row(r);
        for (std::size_t i = 0; i < q; ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            for (std::size_t j = 0; j <= i; ++j) g(i, j) += ri * row[j];
        }
    }
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < i; ++j) g(j, i) = g(i, j);
    return g;
}

Vector cross(const Matrix& d, std::span<const double> y) {
    if (y.size() != d.rows()) throw DimensionError("response length does not match design rows");
    Vector out(d.cols(), 0.0);
    for (std::size_t r = 0; r < d.rows(); ++r) {
        auto row = d.row(r);
        for (std::size_t i = 0; i < d.cols(); ++i) out[i] += row[i] * y[r];
    }
    return out;
}

namespace {

Cholesky factor_normal(const Matrix& design, double ridge) {
    if (design.rows() == 0 || design.cols() == 0) throw DimensionError("design matrix is empty");
    if (ridge < 0.0) throw RangeError("ridge must be nonnegative");
    Matrix g = gram(design);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
    return Cholesky(g);
}

}  // namespace

NormalEquations::NormalEquations(const Matrix& design, double ridge)
    : design_(design), ridge_(ridge), factor_(factor_normal(design, ridge)) {}

LinearSystemSolution NormalEquations::solve(std::span<const double> response) const {
    LinearSystemSolution sol;
    sol.coefficients = factor_.solve(cross(design_, response));
    double rss = 0.0;
    for (std::size_t r = 0; r < design_.rows(); ++r) {
        auto row = design_.row(r);
        double fit = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) fit += row[i] * sol.coefficients[i];
        const double e = response[r] - fit;
        rss += e * e;
    }
    sol.residual_variance = rss / static_cast<double>(design_.rows());
    return sol;
}

LinearSystemSolution ols_solve(const Matrix& design, std::span<const double> response, double ridge) {
    if (response.size() != design.rows()) throw DimensionError("response length does not match design rows");
    return NormalEquations(design, ridge).solve(response);
}

SymmetricEigen symmetric_eigen(const Matrix& a_in, double tol, std::size_t max_sweeps) {
    const std::size_t n = a_in.rows();
    if (a_in.cols() != n) throw DimensionError("symmetric_eigen: matrix is not square");
    Matrix a = a_in;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };
    double scale = 0.0;
    for (double x : a.data()) scale = std::max(scale, std::abs(x));

    for (std::size_t sweep = 0; sweep < max_sweeps && off_norm() > tol * std::max(scale, 1e-300); ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (std::size_t r = 0; r < n; ++r) {
        out.values[r] = a(order[r], order[r]);
        for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(k, order[r]);
    }
    return out;
}

PcaResult pca_project(const Matrix& data, std::size_t k) {
    const std::size_t n = data.rows(), g = data.cols();
    if (n < 2) throw RangeError("pca_project needs at least two samples");
    if (k < 1 || k > std::min(n, g))
        throw RangeError("component count must be in [1, min(N, G)], got " + std::to_string(k));

    PcaResult res;
    res.mean.assign(g, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < g; ++c) res.mean[c] += data(r, c);
    for (double& m : res.mean) m /= static_cast<double>(n);

    Matrix centered(n, g);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < g; ++c) centered(r, c) = data(r, c) - res.mean[c];

    Matrix cov = gram(centered);
    for (double& x : cov.data()) x /= static_cast<double>(n - 1);

    SymmetricEigen eig = symmetric_eigen(cov);
    res.components = Matrix(k, g);
    res.explained_variance.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        auto comp = eig.vectors.row(j);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < g; ++c)
            if (std::abs(comp[c]) > std::abs(comp[arg])) arg = c;
        const double sign = comp[arg] < 0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < g; ++c) res.components(j, c) = sign * comp[c];
        res.explained_variance[j] = std::max(eig.values[j], 0.0);
    }

    res.scores = Matrix(n, k);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < g; ++c) s += centered(r, c) * res.components(j, c);
            res.scores(r, j) = s;
        }
    return res;
}

}  // namespace ccombat
