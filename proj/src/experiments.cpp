#include "ccombat/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>

#include "ccombat/combat.hpp"
#include "ccombat/error.hpp"
#include "ccombat/model_io.hpp"
#include "ccombat/rng.hpp"

#ifdef CCOMBAT_HAVE_OPENMP
#include <omp.h>
#endif

namespace ccombat {

namespace {

constexpr std::uint64_t kSplitKey = 0x5b11;
constexpr std::uint64_t kClusterKey = 0xc1a5;

std::size_t idx(Algorithm a) { return static_cast<std::size_t>(a); }

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
    return out;
}

std::vector<int> gather(const std::vector<int>& v, std::span<const std::size_t> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(v[r]);
    return out;
}

// Harmonized train and held-out rows of one algorithm, in split order.
struct Harmonized {
    Matrix train;
    Matrix test;
};

Matrix stack_sites(const Dataset& ds, const std::function<Matrix(const Dataset&)>& per_site) {
    Matrix out(ds.n_samples(), ds.n_features());
    for (std::size_t s = 0; s < ds.n_sites(); ++s) {
        const Matrix h = per_site(ds.select_site(ds.sites()[s]));
        const auto& rows = ds.site_rows()[s];
        for (std::size_t r = 0; r < rows.size(); ++r) std::copy(h.row(r).begin(), h.row(r).end(), out.row(rows[r]).begin());
    }
    return out;
}

std::array<Harmonized, 5> harmonize_all(const SynthData& data, const SplitResult& split, std::size_t n_clusters,
                                        std::uint64_t seed, const ExperimentOptions& opts) {
    const Dataset& ds = data.dataset;
    std::array<Harmonized, 5> out;
    out[idx(Algorithm::None)] = {split.train.features(), split.test.features()};

    {
        const CombatFit fit = combat_fit(ds, opts.centralized.fit, opts.centralized.eb);
        const Matrix h = combat_apply(ds, fit);
        out[idx(Algorithm::Combat)] = {gather_rows(h, split.train_rows), gather_rows(h, split.test_rows)};
    }
    {
        const ClusterCombatArtifact art = cluster_combat_fit(split.train, n_clusters, seed ^ kClusterKey, opts.centralized);
        out[idx(Algorithm::ClusterCombat)] = {cluster_combat_harmonize_training(art, split.train),
                                              harmonize_unseen_centralized(art, split.test)};
    }
    {
        federated::InProcessTransport transport;
        const auto res = federated::run_distributed(ds, ds.n_sites(), federated::DistributedMode::PerSite, transport,
                                                    seed ^ kClusterKey, opts.distributed);
        out[idx(Algorithm::DistCombat)] = {gather_rows(res.harmonized, split.train_rows),
                                           gather_rows(res.harmonized, split.test_rows)};
    }
    {
        federated::InProcessTransport transport;
        const auto res = federated::run_distributed(split.train, n_clusters, federated::DistributedMode::Clustered,
                                                    transport, seed ^ kClusterKey, opts.distributed);
        const Matrix test = stack_sites(split.test, [&](const Dataset& site) {
            return federated::onboard_unseen_site(site, res.global, res.effects, opts.distributed.fit);
        });
        out[idx(Algorithm::DistClusterCombat)] = {res.harmonized, test};
    }
    return out;
}

double downstream_accuracy(const Matrix& train, const Matrix& test, const std::vector<int>& y_train,
                           const std::vector<int>& y_test, const LogRegOptions& opts) {
    const auto pred = logreg_fit_predict(train, y_train, test, 2, opts);
    return classification_accuracy(pred, y_test);
}

}  // namespace

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::None: return "none";
        case Algorithm::Combat: return "combat";
        case Algorithm::ClusterCombat: return "cluster-combat";
        case Algorithm::DistCombat: return "dist-combat";
        case Algorithm::DistClusterCombat: return "dist-cluster-combat";
    }
    return "?";
}

std::string display_name(Algorithm a) {
    switch (a) {
        case Algorithm::None: return "No harmonization";
        case Algorithm::Combat: return "ComBat";
        case Algorithm::ClusterCombat: return "Cluster ComBat";
        case Algorithm::DistCombat: return "Distributed ComBat";
        case Algorithm::DistClusterCombat: return "Distributed Cluster ComBat";
    }
    return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
    for (Algorithm a : kAllAlgorithms)
        if (to_string(a) == s) return a;
    throw ConfigError("unknown algorithm '" + s +
                      "' (expected none, combat, cluster-combat, dist-combat or dist-cluster-combat)");
}

std::size_t held_out_sites(std::size_t n_sites, double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw RangeError("test fraction must be in (0, 1)");
    const auto n = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n_sites)));
    return std::clamp<std::size_t>(n, 1, n_sites - 1);
}

Table2SeedResult run_table2_seed(const SynthConfig& cfg_in, std::uint64_t seed, const ExperimentOptions& opts) {
    SynthConfig cfg = cfg_in;
    cfg.seed = seed;
    const SynthData data = generate(cfg);
    const SplitResult split =
        split_by_sites(data.dataset, held_out_sites(cfg.n_sites, opts.test_fraction), splitmix64(seed ^ kSplitKey));
    const std::size_t n_clusters = opts.n_clusters ? opts.n_clusters : cfg.n_clusters();

    const auto harmonized = harmonize_all(data, split, n_clusters, seed, opts);
    const Matrix truth_test = gather_rows(data.truth.ground_truth, split.test_rows);

    Table2SeedResult res;
    res.seed = seed;
    res.accuracy.fill(std::numeric_limits<double>::quiet_NaN());
    res.truth_accuracy = std::numeric_limits<double>::quiet_NaN();
    for (Algorithm a : kAllAlgorithms) res.rmse[idx(a)] = rmse(harmonized[idx(a)].test, truth_test);

    if (opts.with_accuracy) {
        const auto y_train = gather(data.truth.labels, split.train_rows);
        const auto y_test = gather(data.truth.labels, split.test_rows);
        for (Algorithm a : kAllAlgorithms)
            res.accuracy[idx(a)] =
                downstream_accuracy(harmonized[idx(a)].train, harmonized[idx(a)].test, y_train, y_test, opts.logreg);
        res.truth_accuracy = downstream_accuracy(gather_rows(data.truth.ground_truth, split.train_rows), truth_test,
                                                 y_train, y_test, opts.logreg);
    }
    return res;
}

std::vector<double> map_seeds(std::uint64_t base_seed, std::size_t n_seeds, std::size_t jobs,
                              const std::function<double(std::uint64_t)>& fn) {
    std::vector<double> out(n_seeds);
    std::vector<std::exception_ptr> errors(n_seeds);
    const long long count = static_cast<long long>(n_seeds);
    [[maybe_unused]] const int threads = static_cast<int>(std::max<std::size_t>(jobs, 1));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < count; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = fn(base_seed + static_cast<std::uint64_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::vector<Table2SeedResult> run_table2_seeds(const SynthConfig& cfg, std::uint64_t base_seed, std::size_t n_seeds,
                                               const ExperimentOptions& opts, std::size_t jobs) {
    std::vector<Table2SeedResult> out(n_seeds);
    map_seeds(base_seed, n_seeds, jobs, [&](std::uint64_t seed) {
        out[seed - base_seed] = run_table2_seed(cfg, seed, opts);
        return 0.0;
    });
    return out;
}

SynthConfig identifiability_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_sites = 10;
    cfg.samples_per_site = 40;
    cfg.n_features = 20;
    cfg.sites_per_cluster = 2;
    cfg.n_covariates = 5;
    cfg.seed = seed;
    return cfg;
}

IdentifiabilityResult run_identifiability(const SynthConfig& cfg_in, std::uint64_t seed, const ExperimentOptions& opts) {
    SynthConfig cfg = cfg_in;
    cfg.seed = seed;
    const SynthData data = generate(cfg);
    const Dataset& ds = data.dataset;
    const std::size_t n_clusters = opts.n_clusters ? opts.n_clusters : cfg.n_clusters();
    const ClusterCombatArtifact art = cluster_combat_fit(ds, n_clusters, seed ^ kClusterKey, opts.centralized);
    const Matrix harmonized = cluster_combat_harmonize_training(art, ds);

    // Seeded 70/30 sample split.
    std::vector<std::size_t> order(ds.n_samples());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(splitmix64(seed ^ kSplitKey));
    rng.shuffle(order);
    const auto n_test = static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(order.size())));
    std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());

    std::vector<int> site(ds.n_samples()), cluster(ds.n_samples());
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
        site[r] = static_cast<int>(ds.site_index_of()[r]);
        cluster[r] = static_cast<int>(data.truth.cluster_of_row[r]);
    }
    auto score = [&](const Matrix& x, const std::vector<int>& y, std::size_t k) {
        const auto pred = logreg_fit_predict(gather_rows(x, train_rows), gather(y, train_rows), gather_rows(x, test_rows),
                                             k, opts.logreg);
        return classification_accuracy(pred, gather(y, test_rows));
    };
    IdentifiabilityResult res;
    res.site_before = score(ds.features(), site, ds.n_sites());
    res.site_after = score(harmonized, site, ds.n_sites());
    res.cluster_before = score(ds.features(), cluster, cfg.n_clusters());
    res.cluster_after = score(harmonized, cluster, cfg.n_clusters());
    res.site_chance = 1.0 / static_cast<double>(ds.n_sites());
    res.cluster_chance = 1.0 / static_cast<double>(cfg.n_clusters());
    return res;
}

SynthConfig parameter_recovery_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_sites = 9;
    cfg.samples_per_site = 10;
    cfg.n_features = 20;
    cfg.sites_per_cluster = 3;
    cfg.n_covariates = 5;
    cfg.seed = seed;
    return cfg;
}

double run_parameter_recovery(const SynthConfig& cfg_in, std::uint64_t seed, const federated::DistributedOptions& opts) {
    SynthConfig cfg = cfg_in;
    cfg.seed = seed;
    const SynthData data = generate(cfg);
    const Dataset& ds = data.dataset;
    std::vector<federated::SiteLocalParams> locals;
    for (const auto& id : ds.sites()) locals.push_back(federated::site_local_fit(ds.select_site(id), opts.fit));
    const federated::GlobalParams global = federated::server_aggregate_global(
        locals, cfg.n_clusters(), seed ^ kClusterKey, federated::DistributedMode::Clustered, opts);
    std::vector<std::size_t> found, truth;
    for (std::size_t s = 0; s < ds.n_sites(); ++s) {
        found.push_back(global.cluster_of(ds.sites()[s]));
        truth.push_back(data.truth.cluster_of_site[s]);
    }
    return adjusted_rand_index(found, truth);
}

std::array<double, 5> run_regression_seed(const SynthConfig& cfg_in, std::uint64_t seed, const ExperimentOptions& opts) {
    SynthConfig cfg = cfg_in;
    cfg.seed = seed;
    const SynthData data = generate(cfg);
    if (data.dataset.n_covariates() < 1) throw ConfigError("regression protocol needs at least one covariate");
    const SplitResult split =
        split_by_sites(data.dataset, held_out_sites(cfg.n_sites, opts.test_fraction), splitmix64(seed ^ kSplitKey));
    const std::size_t n_clusters = opts.n_clusters ? opts.n_clusters : cfg.n_clusters();
    const auto harmonized = harmonize_all(data, split, n_clusters, seed, opts);

    auto target = [](const Dataset& ds) {
        Vector t(ds.n_samples());
        for (std::size_t r = 0; r < t.size(); ++r) t[r] = ds.covariates()(r, 0);
        return t;
    };
    const Vector y_train = target(split.train), y_test = target(split.test);
    std::array<double, 5> out{};
    for (Algorithm a : kAllAlgorithms) {
        const auto fit = linreg_fit_predict(harmonized[idx(a)].train, y_train, harmonized[idx(a)].test);
        out[idx(a)] = mae(fit.predictions, y_test);
    }
    return out;
}

OnboardingTiming run_onboarding_timing(const SynthConfig& cfg_in, std::uint64_t seed, const ExperimentOptions& opts,
                                       std::size_t repeats) {
    using clock = std::chrono::steady_clock;
    SynthConfig cfg = cfg_in;
    cfg.seed = seed;
    const SynthData data = generate(cfg);
    const SplitResult split =
        split_by_sites(data.dataset, held_out_sites(cfg.n_sites, opts.test_fraction), splitmix64(seed ^ kSplitKey));
    const std::size_t n_clusters = opts.n_clusters ? opts.n_clusters : cfg.n_clusters();
    const ClusterCombatArtifact art = cluster_combat_fit(split.train, n_clusters, seed ^ kClusterKey, opts.centralized);
    const std::string before = cluster_combat_document(art, ModelHeader{"cluster-combat", {}, {}}).dump();

    // The new site and the training data plus that site.
    const std::string new_id = split.split.test_sites.front();
    const Dataset site = data.dataset.select_site(new_id);
    std::vector<std::size_t> rows = split.train_rows;
    const std::size_t site_idx = data.dataset.find_site(new_id);
    rows.insert(rows.end(), data.dataset.site_rows()[site_idx].begin(), data.dataset.site_rows()[site_idx].end());
    const Dataset with_site = data.dataset.select_rows(rows);

    OnboardingTiming t;
    t.onboard_seconds = t.refit_seconds = std::numeric_limits<double>::infinity();
    Matrix onboarded;
    for (std::size_t k = 0; k < std::max<std::size_t>(repeats, 1); ++k) {
        auto t0 = clock::now();
        onboarded = harmonize_unseen_centralized(art, site);
        auto t1 = clock::now();
        const ClusterCombatArtifact refit = cluster_combat_fit(with_site, n_clusters, seed ^ kClusterKey, opts.centralized);
        const Matrix refit_h = cluster_combat_harmonize_training(refit, with_site);
        auto t2 = clock::now();
        t.onboard_seconds = std::min(t.onboard_seconds, std::chrono::duration<double>(t1 - t0).count());
        t.refit_seconds = std::min(t.refit_seconds, std::chrono::duration<double>(t2 - t1).count());
    }
    t.model_unchanged = cluster_combat_document(art, ModelHeader{"cluster-combat", {}, {}}).dump() == before;
    const Matrix truth = gather_rows(data.truth.ground_truth, data.dataset.site_rows()[site_idx]);
    t.onboard_rmse = rmse(onboarded, truth);
    t.unharmonized_rmse = rmse(site.features(), truth);

    using federated::DistributedMode;
    federated::InProcessTransport transport;
    const auto dist = federated::run_distributed(split.train, n_clusters, DistributedMode::Clustered, transport,
                                                 seed ^ kClusterKey, opts.distributed);
    const auto frozen = [&] { return federated::to_json(dist.global).dump() + federated::to_json(dist.effects).dump(); };
    const std::string dist_before = frozen();
    t.dist_onboard_seconds = t.dist_refit_seconds = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < std::max<std::size_t>(repeats, 1); ++k) {
        auto t0 = clock::now();
        onboarded = federated::onboard_unseen_site(site, dist.global, dist.effects, opts.distributed.fit);
        auto t1 = clock::now();
        federated::InProcessTransport fresh;
        federated::run_distributed(with_site, n_clusters, DistributedMode::Clustered, fresh, seed ^ kClusterKey,
                                   opts.distributed);
        auto t2 = clock::now();
        t.dist_onboard_seconds = std::min(t.dist_onboard_seconds, std::chrono::duration<double>(t1 - t0).count());
        t.dist_refit_seconds = std::min(t.dist_refit_seconds, std::chrono::duration<double>(t2 - t1).count());
    }
    t.dist_model_unchanged = frozen() == dist_before;
    t.dist_onboard_rmse = rmse(onboarded, truth);
    return t;
}

Table2Report summarize_table2(const std::vector<std::string>& config_names,
                              const std::vector<std::vector<Table2SeedResult>>& per_config) {
    if (config_names.size() != per_config.size()) throw DimensionError("one seed list per config expected");
    Table2Report rep;
    rep.config_names = config_names;
    for (std::size_t c = 0; c < per_config.size(); ++c) {
        std::array<EvalReport, 5> r, a;
        EvalReport truth{"accuracy:ground-truth", config_names[c], {}, {}};
        for (Algorithm alg : kAllAlgorithms) {
            r[idx(alg)] = {"rmse:" + to_string(alg), config_names[c], {}, {}};
            a[idx(alg)] = {"accuracy:" + to_string(alg), config_names[c], {}, {}};
        }
        for (const auto& s : per_config[c]) {
            for (Algorithm alg : kAllAlgorithms) {
                r[idx(alg)].seeds.push_back(s.seed);
                r[idx(alg)].values.push_back(s.rmse[idx(alg)]);
                if (!std::isnan(s.accuracy[idx(alg)])) {
                    a[idx(alg)].seeds.push_back(s.seed);
                    a[idx(alg)].values.push_back(s.accuracy[idx(alg)]);
                }
            }
            if (!std::isnan(s.truth_accuracy)) {
                truth.seeds.push_back(s.seed);
                truth.values.push_back(s.truth_accuracy);
            }
        }
        rep.rmse.push_back(std::move(r));
        rep.accuracy.push_back(std::move(a));
        rep.truth_accuracy.push_back(std::move(truth));
    }
    return rep;
}

namespace {

std::string cell(const EvalReport& r, double scale) {
    if (r.values.empty()) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f±%.2f", r.mean() * scale, r.variance() * scale * scale);
    return buf;
}

}  // namespace

CsvTable table2_csv(const Table2Report& rep) {
    CsvTable t;
    t.header.push_back("method");
    for (const auto& n : rep.config_names) t.header.push_back(n + " RMSE");
    for (const auto& n : rep.config_names) t.header.push_back(n + " Acc. (%)");
    for (Algorithm alg : kAllAlgorithms) {
        std::vector<std::string> row{display_name(alg)};
        for (const auto& r : rep.rmse) row.push_back(cell(r[idx(alg)], 1.0));
        for (const auto& a : rep.accuracy) row.push_back(cell(a[idx(alg)], 100.0));
        t.rows.push_back(std::move(row));
    }
    std::vector<std::string> row{"Ground truth"};
    for (std::size_t c = 0; c < rep.config_names.size(); ++c) row.push_back("");
    for (const auto& a : rep.truth_accuracy) row.push_back(cell(a, 100.0));
    t.rows.push_back(std::move(row));
    return t;
}

CsvTable table2_seed_csv(const std::vector<std::string>& config_names,
                         const std::vector<std::vector<Table2SeedResult>>& per_config) {
    CsvTable t;
    t.header = {"config", "seed", "method", "rmse", "accuracy"};
    for (std::size_t c = 0; c < per_config.size(); ++c)
        for (const auto& s : per_config[c]) {
            for (Algorithm alg : kAllAlgorithms)
                t.rows.push_back({config_names[c], std::to_string(s.seed), to_string(alg), format_double(s.rmse[idx(alg)]),
                                  std::isnan(s.accuracy[idx(alg)]) ? "" : format_double(s.accuracy[idx(alg)])});
            t.rows.push_back({config_names[c], std::to_string(s.seed), "ground-truth", "",
                              std::isnan(s.truth_accuracy) ? "" : format_double(s.truth_accuracy)});
        }
    return t;
}

}  // namespace ccombat
