#include "ccombat/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccombat/error.hpp"
#include "ccombat/kernels.hpp"
#include "ccombat/rng.hpp"

namespace ccombat {

std::string to_string(ClusterSpace s) {
    return s == ClusterSpace::SampleFeature ? "sample-feature" : "site-parameter";
}

ClusterSpace cluster_space_from_string(const std::string& s) {
    if (s == "sample-feature") return ClusterSpace::SampleFeature;
    if (s == "site-parameter") return ClusterSpace::SiteParameter;
    throw SchemaError("unknown cluster space '" + s + "'");
}

void fit_standardizer(const Matrix& points, Vector& shift, Vector& scale) {
    const std::size_t n = points.rows(), d = points.cols();
    shift.assign(d, 0.0);
    scale.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) shift[c] += points(r, c);
    for (double& s : shift) s /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) scale[c] += (points(r, c) - shift[c]) * (points(r, c) - shift[c]);
    for (double& s : scale) {
        s = std::sqrt(s / static_cast<double>(n));
        if (!(s > 0.0)) s = 1.0;
    }
}

Matrix apply_standardizer(const Matrix& points, const Vector& shift, const Vector& scale) {
    if (shift.empty()) return points;
    if (shift.size() != points.cols() || scale.size() != points.cols())
        throw DimensionError("standardizer dimension does not match points");
    Matrix out(points.rows(), points.cols());
    for (std::size_t r = 0; r < points.rows(); ++r)
        for (std::size_t c = 0; c < points.cols(); ++c) out(r, c) = (points(r, c) - shift[c]) / scale[c];
    return out;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
    return d;
}

// k-means++ seeding: first center uniform, the rest with probability
// proportional to squared distance from the nearest chosen center.
Matrix seed_plus_plus(const Matrix& x, std::size_t c_count, Rng& rng) {
    const std::size_t n = x.rows();
    Matrix centers(c_count, x.cols());
    std::size_t first = rng.index(n);
    std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());
    std::vector<double> d2(n);
    for (std::size_t r = 0; r < n; ++r) d2[r] = sq_dist(x.row(r), centers.row(0));
    for (std::size_t c = 1; c < c_count; ++c) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t pick = n - 1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                acc += d2[r];
                if (acc > target) {
                    pick = r;
                    break;
                }
            }
        } else {
            pick = rng.index(n);  // all remaining points coincide with a center
        }
        std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
        for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], sq_dist(x.row(r), centers.row(c)));
    }
    return centers;
}

KMeansFit lloyd(const Matrix& x, Matrix centers, const KMeansOptions& opts) {
    const std::size_t n = x.rows(), d = x.cols(), c_count = centers.rows();
    KMeansFit fit;
    fit.assignment.assign(n, 0);
    std::vector<double> dist2(n);
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        fit.inertia_trace.push_back(kernels::omp::assign_nearest(x, centers, fit.assignment, dist2));
        fit.iterations = it + 1;

        Matrix next(c_count, d);
        std::vector<std::size_t> counts(c_count, 0);
        for (std::size_t r = 0; r < n; ++r) {
            ++counts[fit.assignment[r]];
            auto row = x.row(r);
            auto dst = next.row(fit.assignment[r]);
            for (std::size_t k = 0; k < d; ++k) dst[k] += row[k];
        }
        for (std::size_t c = 0; c < c_count; ++c) {
            if (counts[c] == 0) {
                // Empty cluster: move it onto the point farthest from its centroid.
                std::size_t far = static_cast<std::size_t>(std::max_element(dist2.begin(), dist2.end()) - dist2.begin());
                std::copy(x.row(far).begin(), x.row(far).end(), next.row(c).begin());
                dist2[far] = 0.0;
                continue;
            }
            for (double& v : next.row(c)) v /= static_cast<double>(counts[c]);
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < c_count; ++c) shift = std::max(shift, std::sqrt(sq_dist(next.row(c), centers.row(c))));
        centers = std::move(next);
        if (shift < opts.tol) break;
    }
    // Final labels and inertia always come from the returned centroids, so
    // predict() on the training points reproduces the training assignment.
    fit.model.inertia = kernels::omp::assign_nearest(x, centers, fit.assignment, dist2);
    fit.inertia_trace.push_back(fit.model.inertia);
    fit.model.centroids = std::move(centers);
    return fit;
}

}  // namespace

KMeansFit kmeans_fit(const Matrix& points, std::size_t n_clusters, std::uint64_t seed, ClusterSpace space,
                     const KMeansOptions& opts) {
    if (points.cols() < 1) throw DimensionError("k-means needs at least one dimension");
    if (n_clusters < 1 || n_clusters > points.rows())
        throw RangeError("cluster count " + std::to_string(n_clusters) + " must be in [1, " +
                         std::to_string(points.rows()) + "]");
    for (double v : points.data())
        if (!std::isfinite(v)) throw NonFiniteError("k-means input contains non-finite values");

    Rng rng(seed);
    KMeansFit best;
    bool have = false;
    for (std::size_t rep = 0; rep < std::max<std::size_t>(opts.restarts, 1); ++rep) {
        KMeansFit fit = lloyd(points, seed_plus_plus(points, n_clusters, rng), opts);
        if (!have || fit.model.inertia < best.model.inertia) {
            best = std::move(fit);
            have = true;
        }
    }
    best.model.space = space;
    return best;
}

std::vector<std::size_t> kmeans_predict(const ClusterModel& model, const Matrix& points) {
    if (points.cols() != model.dim())
        throw DimensionError("point dimension " + std::to_string(points.cols()) + " does not match centroids (" +
                             std::to_string(model.dim()) + ")");
    const Matrix x = apply_standardizer(points, model.shift, model.scale);
    std::vector<std::size_t> assignment(x.rows());
    std::vector<double> dist2(x.rows());
    kernels::omp::assign_nearest(x, model.centroids, assignment, dist2);
    return assignment;
}

}  // namespace ccombat
