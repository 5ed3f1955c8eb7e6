#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ccombat/matrix.hpp"

namespace ccombat {

// Which domain a cluster model was trained in. Fixed at fit time.
enum class ClusterSpace { SampleFeature, SiteParameter };

std::string to_string(ClusterSpace s);
ClusterSpace cluster_space_from_string(const std::string& s);

struct ClusterModel {
    Matrix centroids;  // C x D
    ClusterSpace space{ClusterSpace::SampleFeature};
    double inertia{0.0};
    // Optional per-coordinate affine map applied to points before distance
    // computations: (x - shift) / scale. Empty means identity.
    Vector shift;
    Vector scale;

    std::size_t n_clusters() const noexcept { return centroids.rows(); }
    std::size_t dim() const noexcept { return centroids.cols(); }
};

struct KMeansOptions {
    std::size_t max_iter{300};
    double tol{1e-10};          // stop when every centroid moves less than this
    std::size_t restarts{1};    // k-means++ restarts; lowest inertia wins
};

struct KMeansFit {
    ClusterModel model;
    std::vector<std::size_t> assignment;  // nearest-centroid labels of the fitted points
    std::vector<double> inertia_trace;    // after each assignment step of the winning restart
    std::size_t iterations{0};
};

KMeansFit kmeans_fit(const Matrix& points, std::size_t n_clusters, std::uint64_t seed,
                     ClusterSpace space = ClusterSpace::SampleFeature, const KMeansOptions& opts = {});

// Nearest centroid by Euclidean distance; ties go to the lowest index.
std::vector<std::size_t> kmeans_predict(const ClusterModel& model, const Matrix& points);

// Column-wise z-scoring parameters (population sd, 1 for constant columns).
void fit_standardizer(const Matrix& points, Vector& shift, Vector& scale);
Matrix apply_standardizer(const Matrix& points, const Vector& shift, const Vector& scale);

}  // namespace ccombat
