// Serial reference vs OpenMP kernels on a synthetic problem of
// configurable size (N rows, G features).
#include <benchmark/benchmark.h>

#include <map>

#include "ccombat/combat.hpp"
#include "ccombat/kernels.hpp"
#include "ccombat/synthgen.hpp"

namespace {

using namespace ccombat;

struct Problem {
    Dataset ds;
    Matrix design;
    Matrix z;
    std::vector<std::size_t> groups;
    std::size_t n_groups;
    FeatureWiseModel model;
    EBPriors priors;
    kernels::GroupStats stats;
    BatchEffects effects;
};

const Problem& problem(std::size_t sites, std::size_t features) {
    static std::map<std::pair<std::size_t, std::size_t>, Problem> cache;
    auto key = std::make_pair(sites, features);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    SynthConfig cfg;
    cfg.n_sites = sites;
    cfg.samples_per_site = 50;
    cfg.n_features = features;
    cfg.sites_per_cluster = 5;
    cfg.seed = 7;
    SynthData data = generate(cfg);
    const Dataset& ds = data.dataset;
    Problem p{ds, Matrix(ds.n_samples(), ds.n_sites() + ds.n_covariates()), {}, ds.site_index_of(), ds.n_sites(),
              {}, {}, {}, {}};
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
        p.design(r, ds.site_index_of()[r]) = 1.0;
        for (std::size_t c = 0; c < ds.n_covariates(); ++c) p.design(r, ds.n_sites() + c) = ds.covariates()(r, c);
    }
    p.model = fit_feature_model(ds);
    p.z = standardize(ds, p.model);
    p.stats = kernels::serial::group_stats(p.z, p.groups, p.n_groups);
    p.priors = fit_priors(p.stats);
    p.effects = eb_fit(p.z, p.groups, p.n_groups, p.priors);
    return cache.emplace(key, std::move(p)).first->second;
}

template <bool Parallel>
void BM_FeatureOls(benchmark::State& st) {
    const Problem& p = problem(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    const Cholesky chol(gram(p.design));
    for (auto _ : st) {
        auto fit = Parallel ? kernels::omp::feature_ols(p.design, chol, p.ds.features())
                            : kernels::serial::feature_ols(p.design, chol, p.ds.features());
        benchmark::DoNotOptimize(fit.rss.data());
    }
}

template <bool Parallel>
void BM_Standardize(benchmark::State& st) {
    const Problem& p = problem(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    for (auto _ : st) {
        auto z = Parallel ? kernels::omp::standardize(p.ds.features(), p.ds.covariates(), p.model.alpha, p.model.beta,
                                                      p.model.sigma)
                          : kernels::serial::standardize(p.ds.features(), p.ds.covariates(), p.model.alpha,
                                                         p.model.beta, p.model.sigma);
        benchmark::DoNotOptimize(z.data().data());
    }
}

template <bool Parallel>
void BM_EbSolve(benchmark::State& st) {
    const Problem& p = problem(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    for (auto _ : st) {
        auto s = Parallel ? kernels::omp::eb_solve(p.stats, p.priors, {}) : kernels::serial::eb_solve(p.stats, p.priors, {});
        benchmark::DoNotOptimize(s.gamma_star.data().data());
    }
}

template <bool Parallel>
void BM_Harmonize(benchmark::State& st) {
    const Problem& p = problem(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    for (auto _ : st) {
        auto h = Parallel ? kernels::omp::harmonize(p.ds.features(), p.ds.covariates(), p.model.alpha, p.model.beta,
                                                    p.model.sigma, p.effects.gamma_star, p.effects.delta_sq_star,
                                                    p.groups)
                          : kernels::serial::harmonize(p.ds.features(), p.ds.covariates(), p.model.alpha, p.model.beta,
                                                       p.model.sigma, p.effects.gamma_star, p.effects.delta_sq_star,
                                                       p.groups);
        benchmark::DoNotOptimize(h.data().data());
    }
}

template <bool Parallel>
void BM_AssignNearest(benchmark::State& st) {
    const Problem& p = problem(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    const Matrix centroids = p.ds.features().select_rows(std::vector<std::size_t>{0, 50, 100, 150});
    std::vector<std::size_t> assignment(p.ds.n_samples());
    std::vector<double> dist2(p.ds.n_samples());
    for (auto _ : st) {
        double inertia = Parallel ? kernels::omp::assign_nearest(p.ds.features(), centroids, assignment, dist2)
                                  : kernels::serial::assign_nearest(p.ds.features(), centroids, assignment, dist2);
        benchmark::DoNotOptimize(inertia);
    }
}

#define CCOMBAT_BENCH_PAIR(fn)                                                        \
    BENCHMARK_TEMPLATE(fn, false)->Name(#fn "/serial")->Args({20, 50})->Args({40, 400}); \
    BENCHMARK_TEMPLATE(fn, true)->Name(#fn "/omp")->Args({20, 50})->Args({40, 400});

CCOMBAT_BENCH_PAIR(BM_FeatureOls)
CCOMBAT_BENCH_PAIR(BM_Standardize)
CCOMBAT_BENCH_PAIR(BM_EbSolve)
CCOMBAT_BENCH_PAIR(BM_Harmonize)
CCOMBAT_BENCH_PAIR(BM_AssignNearest)

}  // namespace

BENCHMARK_MAIN();
