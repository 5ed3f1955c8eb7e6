#include "ccombat/metrics.hpp"

#include <cmath>
#include <map>

#include "ccombat/dataset.hpp"
#include "ccombat/error.hpp"
#include "ccombat/numerics.hpp"

namespace ccombat {

double rmse(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("rmse: shape mismatch");
    if (a.empty()) throw DimensionError("rmse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.data().size()));
}

double mae(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw DimensionError("mae: length mismatch");
    if (pred.empty()) throw DimensionError("mae: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

double classification_accuracy(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw DimensionError("accuracy: length mismatch");
    if (pred.empty()) throw DimensionError("accuracy: empty input");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw DimensionError("adjusted_rand_index: length mismatch");
    const double n = static_cast<double>(a.size());
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    std::map<std::size_t, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    auto c2 = [](double x) { return x * (x - 1) / 2; };
    double sj = 0, sa = 0, sb = 0;
    for (const auto& [k, v] : joint) sj += c2(v);
    for (const auto& [k, v] : ra) sa += c2(v);
    for (const auto& [k, v] : rb) sb += c2(v);
    const double expected = sa * sb / c2(n);
    const double max_index = (sa + sb) / 2;
    if (max_index == expected) return 1.0;  // both partitions trivial
    return (sj - expected) / (max_index - expected);
}

double EvalReport::mean() const {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double EvalReport::variance() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return s / static_cast<double>(values.size() - 1);
}

nlohmann::json EvalReport::to_json() const {
    return {{"metric", metric}, {"config", config}, {"seeds", seeds},
            {"values", values}, {"mean", mean()},   {"variance", variance()}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    return {j.at("metric").get<std::string>(), j.at("config").get<std::string>(),
            j.at("seeds").get<std::vector<std::uint64_t>>(), j.at("values").get<std::vector<double>>()};
}

void export_pca_plot_data(const Matrix& data, std::span<const std::string> site,
                          std::span<const std::size_t> cluster, std::span<const int> label,
                          const std::filesystem::path& path) {
    const std::size_t n = data.rows();
    if (site.size() != n || cluster.size() != n || label.size() != n)
        throw DimensionError("label columns must have one entry per row");
    const PcaResult pca = pca_project(data, std::min<std::size_t>(2, data.cols()));
    CsvTable t;
    t.header = {"pc1", "pc2", "site", "cluster", "label"};
    for (std::size_t r = 0; r < n; ++r)
        t.rows.push_back({format_double(pca.scores(r, 0)),
                          format_double(pca.scores.cols() > 1 ? pca.scores(r, 1) : 0.0), site[r],
                          std::to_string(cluster[r]), std::to_string(label[r])});
    write_csv_table(path, t);
}

}  // namespace ccombat
