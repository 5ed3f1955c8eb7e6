#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccombat/matrix.hpp"

namespace ccombat {

// Root mean squared elementwise difference.
double rmse(const Matrix& a, const Matrix& b);
double mae(std::span<const double> pred, std::span<const double> target);
double classification_accuracy(std::span<const int> pred, std::span<const int> truth);
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

// Per-seed values of one metric plus their summary. Variance is the
// unbiased sample variance (0 for a single seed).
struct EvalReport {
    std::string metric;
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::vector<double> values;

    double mean() const;
    double variance() const;
    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

// Writes pc1, pc2, site, cluster, label rows for external plotting.
void export_pca_plot_data(const Matrix& data, std::span<const std::string> site,
                          std::span<const std::size_t> cluster, std::span<const int> label,
                          const std::filesystem::path& path);

}  // namespace ccombat
