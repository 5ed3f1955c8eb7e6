#include "ccombat/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "ccombat/error.hpp"
#include "ccombat/numerics.hpp"

namespace ccombat {

namespace {

Matrix with_intercept(const Matrix& x) {
    Matrix d(x.rows(), x.cols() + 1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        d(r, 0) = 1.0;
        for (std::size_t c = 0; c < x.cols(); ++c) d(r, c + 1) = x(r, c);
    }
    return d;
}

// Mean cross-entropy plus (l2 / 2) ||W||^2 over non-bias weights.
// When grad is non-null it receives the gradient.
double logreg_objective(const Matrix& x, std::span<const int> y, const Matrix& w, double l2, Matrix* grad) {
    const std::size_t n = x.rows(), d = x.cols(), k = w.cols();
    if (grad) *grad = Matrix(d + 1, k);
    std::vector<double> z(k);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
            double s = w(d, j);
            for (std::size_t c = 0; c < d; ++c) s += x(r, c) * w(c, j);
            z[j] = s;
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double& v : z) {
            v = std::exp(v - zmax);
            denom += v;
        }
        const auto yr = static_cast<std::size_t>(y[r]);
        loss -= std::log(z[yr] / denom);
        if (grad) {
            for (std::size_t j = 0; j < k; ++j) {
                const double g = z[j] / denom - (j == yr ? 1.0 : 0.0);
                for (std::size_t c = 0; c < d; ++c) (*grad)(c, j) += g * x(r, c);
                (*grad)(d, j) += g;
            }
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double penalty = 0.0;
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t j = 0; j < k; ++j) penalty += w(c, j) * w(c, j);
    if (grad) {
        for (std::size_t c = 0; c <= d; ++c)
            for (std::size_t j = 0; j < k; ++j) {
                (*grad)(c, j) *= inv_n;
                if (c < d) (*grad)(c, j) += l2 * w(c, j);
            }
    }
    return loss * inv_n + 0.5 * l2 * penalty;
}

Matrix apply_scaling(const Matrix& x, const Vector& shift, const Vector& scale) {
    Matrix out = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - shift[c]) / scale[c];
    return out;
}

}  // namespace

LinRegResult linreg_fit_predict(const Matrix& train_x, std::span<const double> train_y, const Matrix& test_x) {
    if (train_x.rows() != train_y.size()) throw DimensionError("linreg: target length mismatch");
    if (train_x.cols() != test_x.cols()) throw DimensionError("linreg: feature count mismatch");
    const Matrix design = with_intercept(train_x);
    LinRegResult out;
    try {
        out.coefficients = ols_solve(design, train_y).coefficients;
    } catch (const RankDeficientError&) {
        std::cerr << "warning: linear regression design is rank deficient; using ridge 1e-8\n";
        out.coefficients = ols_solve(design, train_y, 1e-8).coefficients;
        out.ridge_fallback = true;
    }
    out.predictions.resize(test_x.rows());
    for (std::size_t r = 0; r < test_x.rows(); ++r) {
        double s = out.coefficients[0];
        for (std::size_t c = 0; c < test_x.cols(); ++c) s += out.coefficients[c + 1] * test_x(r, c);
        out.predictions[r] = s;
    }
    return out;
}

LogRegModel logreg_fit(const Matrix& x, std::span<const int> labels, std::size_t classes, const LogRegOptions& opts) {
    const std::size_t n = x.rows(), d = x.cols();
    if (labels.size() != n) throw DimensionError("logreg: label length mismatch");
    if (n == 0) throw DimensionError("logreg: empty training set");
    if (classes < 2) throw RangeError("logreg: need at least 2 classes");
    std::vector<bool> seen(classes, false);
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw RangeError("logreg: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
        seen[static_cast<std::size_t>(y)] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2) throw RangeError("logreg: training labels contain a single class");

    LogRegModel m;
    m.classes = classes;
    m.shift.assign(d, 0.0);
    m.scale.assign(d, 1.0);
    if (opts.standardize) {
        for (std::size_t c = 0; c < d; ++c) {
            double mu = 0.0;
            for (std::size_t r = 0; r < n; ++r) mu += x(r, c);
            mu /= static_cast<double>(n);
            double v = 0.0;
            for (std::size_t r = 0; r < n; ++r) v += (x(r, c) - mu) * (x(r, c) - mu);
            const double sd = std::sqrt(v / static_cast<double>(n));
            m.shift[c] = mu;
            m.scale[c] = sd > 1e-12 ? sd : 1.0;
        }
    }
    const Matrix xs = apply_scaling(x, m.shift, m.scale);

    m.weights = Matrix(d + 1, classes);
    Matrix grad;
    double f = logreg_objective(xs, labels, m.weights, opts.l2, &grad);
    m.loss_trace.push_back(f);
    double step = 1.0;
    for (m.epochs = 0; m.epochs < opts.max_epochs; ++m.epochs) {
        double gsq = 0.0;
        for (double g : grad.data()) gsq += g * g;
        m.grad_norm = std::sqrt(gsq);
        if (m.grad_norm < opts.grad_tol) break;
        // Armijo backtracking, starting from twice the last accepted step.
        step = std::min(step * 2.0, 1e4);
        Matrix trial;
        double ft = 0.0;
        bool accepted = false;
        while (step > 1e-12) {
            trial = m.weights;
            for (std::size_t i = 0; i < trial.data().size(); ++i) trial.data()[i] -= step * grad.data()[i];
            ft = logreg_objective(xs, labels, trial, opts.l2, nullptr);
            if (ft <= f - 0.5 * step * gsq) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        m.weights = std::move(trial);
        f = logreg_objective(xs, labels, m.weights, opts.l2, &grad);
        m.loss_trace.push_back(f);
    }
    return m;
}

std::vector<int> logreg_predict(const LogRegModel& model, const Matrix& x) {
    const std::size_t d = model.weights.rows() - 1, k = model.classes;
    if (x.cols() != d) throw DimensionError("logreg: expected " + std::to_string(d) + " features");
    std::vector<int> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double best = -INFINITY;
        int arg = 0;
        for (std::size_t j = 0; j < k; ++j) {
            double s = model.weights(d, j);
            for (std::size_t c = 0; c < d; ++c) s += (x(r, c) - model.shift[c]) / model.scale[c] * model.weights(c, j);
            if (s > best) {
                best = s;
                arg = static_cast<int>(j);
            }
        }
        out[r] = arg;
    }
    return out;
}

std::vector<int> logreg_fit_predict(const Matrix& train_x, std::span<const int> train_labels, const Matrix& test_x,
                                    std::size_t classes, const LogRegOptions& opts) {
    return logreg_predict(logreg_fit(train_x, train_labels, classes, opts), test_x);
}

}  // namespace ccombat
