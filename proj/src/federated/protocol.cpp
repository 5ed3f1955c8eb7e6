#include "ccombat/federated/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "ccombat/error.hpp"
#include "ccombat/kernels.hpp"
#include "ccombat/numerics.hpp"

namespace ccombat::federated {

namespace {

// Runs fn(i) for every site concurrently and rethrows the first failure in
// site order, so errors are reported deterministically.
template <class Fn>
void for_each_site(std::size_t n, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

FeatureWiseModel global_model(const GlobalParams& g) {
    FeatureWiseModel m;
    m.alpha = g.alpha;
    m.beta = g.beta;
    m.sigma = g.sigma;
    return m;
}

void require_single_site(const Dataset& ds) {
    if (ds.n_sites() != 1)
        throw ConfigError("expected data from exactly one site, got " + std::to_string(ds.n_sites()));
}

bool drops(const DistributedOptions& opts, const std::string& site, int round) {
    auto it = opts.dropout_at_round.find(site);
    return it != opts.dropout_at_round.end() && it->second <= round;
}

}  // namespace

SiteLocalParams site_local_fit(const Dataset& ds, const FitOptions& opts) {
    require_single_site(ds);
    const std::size_t n = ds.n_samples(), p = ds.n_covariates(), g_count = ds.n_features(), q = p + 1;
    if (n < 2) throw UnderdeterminedError("site '" + ds.sites()[0] + "' has fewer than 2 samples");

    Matrix design(n, q);
    for (std::size_t r = 0; r < n; ++r) {
        design(r, 0) = 1.0;
        for (std::size_t k = 0; k < p; ++k) design(r, k + 1) = ds.covariates()(r, k);
    }
    SiteLocalParams out;
    out.site_id = ds.sites()[0];
    out.n_samples = n;
    out.design_gram = gram(design);

    Matrix normal = out.design_gram;
    double ridge = opts.ridge;
    if (n <= q && ridge <= 0.0) {
        ridge = kLocalRidge;
        out.ridge_fallback = true;
    }
    for (std::size_t i = 0; i < q; ++i) normal(i, i) += ridge;
    std::unique_ptr<Cholesky> factor;
    try {
        factor = std::make_unique<Cholesky>(normal);
    } catch (const RankDeficientError&) {
        for (std::size_t i = 0; i < q; ++i) normal(i, i) += kLocalRidge;
        factor = std::make_unique<Cholesky>(normal);
        out.ridge_fallback = true;
    }
    const kernels::FeatureFit fit = kernels::omp::feature_ols(design, *factor, ds.features());

    out.alpha_local.resize(g_count);
    out.beta_local = Matrix(p, g_count);
    out.gamma_local.assign(g_count, 0.0);
    out.design_cross = Matrix(q, g_count);
    out.response_sq.assign(g_count, 0.0);
    for (std::size_t g = 0; g < g_count; ++g) {
        out.alpha_local[g] = fit.coefficients(0, g);
        for (std::size_t k = 0; k < p; ++k) out.beta_local(k, g) = fit.coefficients(k + 1, g);
    }
    for (std::size_t r = 0; r < n; ++r) {
        auto row = design.row(r);
        for (std::size_t g = 0; g < g_count; ++g) {
            const double y = ds.features()(r, g);
            out.response_sq[g] += y * y;
            for (std::size_t i = 0; i < q; ++i) out.design_cross(i, g) += row[i] * y;
        }
    }
    return out;
}

GlobalParams server_aggregate_global(std::span<const SiteLocalParams> msgs, std::size_t n_clusters,
                                     std::uint64_t seed, DistributedMode mode, const DistributedOptions& opts) {
    const std::size_t m = msgs.size();
    if (m < 2) throw ProtocolError("aggregation needs at least 2 sites, got " + std::to_string(m));
    const std::size_t g_count = msgs[0].alpha_local.size(), p = msgs[0].beta_local.rows(), q = p + 1;
    std::size_t n_total = 0;
    for (const auto& s : msgs) {
        if (s.alpha_local.size() != g_count || s.beta_local.rows() != p || s.beta_local.cols() != g_count ||
            s.gamma_local.size() != g_count || s.design_gram.rows() != q || s.design_cross.rows() != q ||
            s.design_cross.cols() != g_count || s.response_sq.size() != g_count)
            throw ProtocolError("site '" + s.site_id + "' sent parameters with inconsistent G/P");
        if (s.n_samples < 2) throw ProtocolError("site '" + s.site_id + "' reports fewer than 2 samples");
        n_total += s.n_samples;
    }
    const std::size_t c_count = mode == DistributedMode::PerSite ? m : n_clusters;
    if (c_count < 1 || c_count > m)
        throw RangeError("cluster count " + std::to_string(c_count) + " must be in [1, " + std::to_string(m) + "]");

    Vector w(m);
    for (std::size_t i = 0; i < m; ++i)
        w[i] = opts.weighting == Weighting::Uniform
                   ? 1.0 / static_cast<double>(m)
                   : static_cast<double>(msgs[i].n_samples) / static_cast<double>(n_total);

    GlobalParams gp;
    gp.mode = mode;
    gp.alpha.assign(g_count, 0.0);
    gp.beta = Matrix(p, g_count);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t g = 0; g < g_count; ++g) gp.alpha[g] += w[i] * msgs[i].alpha_local[g];
        for (std::size_t k = 0; k < p * g_count; ++k) gp.beta.data()[k] += w[i] * msgs[i].beta_local.data()[k];
    }

    // sigma_g^2 = sum_i RSS_ig / N, each site's RSS taken at the global
    // beta_g and the site intercept that is optimal given it. This is the
    // centralized estimate whenever local betas average to the pooled one.
    gp.sigma.assign(g_count, 0.0);
    Vector coef(q);
    for (std::size_t g = 0; g < g_count; ++g) {
        double rss = 0.0;
        for (const auto& s : msgs) {
            for (std::size_t k = 0; k < p; ++k) coef[k + 1] = gp.beta(k, g);
            double icpt = s.design_cross(0, g);
            for (std::size_t k = 0; k < p; ++k) icpt -= s.design_gram(0, k + 1) * coef[k + 1];
            coef[0] = icpt / s.design_gram(0, 0);
            double quad = 0.0, lin = 0.0;
            for (std::size_t a = 0; a < q; ++a) {
                lin += coef[a] * s.design_cross(a, g);
                for (std::size_t b = 0; b < q; ++b) quad += coef[a] * s.design_gram(a, b) * coef[b];
            }
            rss += std::max(s.response_sq[g] - 2.0 * lin + quad, 0.0);
        }
        double sigma = std::sqrt(rss / static_cast<double>(n_total));
        if (!(sigma >= kVarianceFloor)) {
            if (!opts.fit.variance_floor)
                throw DegenerateFeatureError(g, "feature " + std::to_string(g) +
                                                    " has zero pooled residual variance; enable the variance floor");
            sigma = kVarianceFloor;
        }
        gp.sigma[g] = sigma;
    }

    Matrix points(m, 2 * g_count + p * g_count);
    for (std::size_t i = 0; i < m; ++i) {
        Vector gamma(g_count);
        for (std::size_t g = 0; g < g_count; ++g) gamma[g] = msgs[i].alpha_local[g] - gp.alpha[g];
        const Vector v = parameter_vector(msgs[i].alpha_local, msgs[i].beta_local, gamma);
        std::copy(v.begin(), v.end(), points.row(i).begin());
    }
    if (opts.standardize_params) {
        fit_standardizer(points, gp.cluster_model.shift, gp.cluster_model.scale);
        points = apply_standardizer(points, gp.cluster_model.shift, gp.cluster_model.scale);
    }

    std::vector<std::size_t> assignment(m);
    if (mode == DistributedMode::PerSite) {
        gp.cluster_model.centroids = points;
        for (std::size_t i = 0; i < m; ++i) assignment[i] = i;
    } else {
        KMeansFit km = kmeans_fit(points, c_count, seed, ClusterSpace::SiteParameter, opts.kmeans);
        gp.cluster_model.centroids = std::move(km.model.centroids);
        gp.cluster_model.inertia = km.model.inertia;
        assignment = std::move(km.assignment);
    }
    gp.cluster_model.space = ClusterSpace::SiteParameter;
    for (std::size_t i = 0; i < m; ++i) gp.cluster_of_site.emplace_back(msgs[i].site_id, assignment[i]);
    return gp;
}

SiteEBParams site_local_eb(const Dataset& ds, const GlobalParams& global, const EBOptions& opts) {
    require_single_site(ds);
    const Matrix z = standardize(ds, global_model(global));
    const std::vector<std::size_t> groups(ds.n_samples(), 0);
    const EBPriors priors = fit_priors(z, groups, 1);
    const BatchEffects fx = eb_fit(z, groups, 1, priors, opts);
    auto g0 = fx.gamma_star.row(0);
    auto d0 = fx.delta_sq_star.row(0);
    return {ds.sites()[0], Vector(g0.begin(), g0.end()), Vector(d0.begin(), d0.end())};
}

BatchEffects server_aggregate_cluster_effects(std::span<const SiteEBParams> msgs,
                                              const std::vector<std::pair<std::string, std::size_t>>& cluster_of_site,
                                              std::size_t n_clusters) {
    if (msgs.empty()) throw ProtocolError("no EB parameters to aggregate");
    const std::size_t g_count = msgs[0].gamma_star_local.size();
    BatchEffects fx{Matrix(n_clusters, g_count), Matrix(n_clusters, g_count), {}};
    std::vector<std::size_t> members(n_clusters, 0);
    for (const auto& s : msgs) {
        auto it = std::find_if(cluster_of_site.begin(), cluster_of_site.end(),
                               [&](const auto& e) { return e.first == s.site_id; });
        if (it == cluster_of_site.end()) throw ProtocolError("site '" + s.site_id + "' has no cluster assignment");
        if (it->second >= n_clusters) throw ProtocolError("cluster index out of range for '" + s.site_id + "'");
        if (s.gamma_star_local.size() != g_count || s.delta_sq_star_local.size() != g_count)
            throw ProtocolError("site '" + s.site_id + "' sent EB parameters with inconsistent G");
        const std::size_t c = it->second;
        ++members[c];
        for (std::size_t g = 0; g < g_count; ++g) {
            fx.gamma_star(c, g) += s.gamma_star_local[g];
            fx.delta_sq_star(c, g) += s.delta_sq_star_local[g];
        }
    }
    for (std::size_t c = 0; c < n_clusters; ++c) {
        if (members[c] == 0) throw ProtocolError("cluster " + std::to_string(c) + " has no member sites");
        for (std::size_t g = 0; g < g_count; ++g) {
            fx.gamma_star(c, g) /= static_cast<double>(members[c]);
            fx.delta_sq_star(c, g) /= static_cast<double>(members[c]);
        }
        fx.group_labels.push_back(std::to_string(c));
    }
    return fx;
}

Matrix site_harmonize(const Dataset& ds, const GlobalParams& global, const BatchEffects& effects,
                      std::size_t cluster) {
    const std::vector<std::size_t> groups(ds.n_samples(), cluster);
    return harmonize(ds, global_model(global), effects, groups);
}

namespace {

BatchEffects restrict_to(const BatchEffects& fx, std::size_t c) {
    BatchEffects out{Matrix(1, fx.gamma_star.cols()), Matrix(1, fx.gamma_star.cols()), {fx.group_labels[c]}};
    std::copy(fx.gamma_star.row(c).begin(), fx.gamma_star.row(c).end(), out.gamma_star.row(0).begin());
    std::copy(fx.delta_sq_star.row(c).begin(), fx.delta_sq_star.row(c).end(), out.delta_sq_star.row(0).begin());
    return out;
}

}  // namespace

DistributedResult run_distributed(const Dataset& ds, std::size_t n_clusters, DistributedMode mode,
                                  Transport& transport, std::uint64_t seed, const DistributedOptions& opts) {
    const std::size_t m = ds.n_sites();
    if (m < 2) throw RangeError("the distributed protocol needs at least 2 sites");
    const auto& sites = ds.sites();
    std::vector<Dataset> local;
    local.reserve(m);
    for (const auto& s : sites) local.push_back(ds.select_site(s));
    const std::size_t c_count = mode == DistributedMode::PerSite ? m : n_clusters;

    // Round 1: sites -> coordinator.
    for_each_site(m, [&](std::size_t i) {
        if (drops(opts, sites[i], 1)) return;
        transport.post({Round::LocalParams, sites[i], kCoordinator, site_local_fit(local[i], opts.fit)});
    });
    std::vector<SiteLocalParams> round1;
    for (const auto& s : sites)
        round1.push_back(std::get<SiteLocalParams>(transport.fetch(Round::LocalParams, s, kCoordinator).payload));

    // Round 2: coordinator -> sites.
    GlobalParams global = server_aggregate_global(round1, c_count, seed, mode, opts);
    transport.publish("global.json", to_json(global));
    for (const auto& s : sites) transport.post({Round::GlobalParams, kCoordinator, s, global});

    // Round 3: sites -> coordinator.
    std::vector<GlobalParams> received(m);
    for_each_site(m, [&](std::size_t i) {
        received[i] = std::get<GlobalParams>(transport.fetch(Round::GlobalParams, kCoordinator, sites[i]).payload);
        if (drops(opts, sites[i], 3)) return;
        transport.post({Round::LocalEB, sites[i], kCoordinator, site_local_eb(local[i], received[i], opts.eb)});
    });
    std::vector<SiteEBParams> round3;
    for (const auto& s : sites)
        round3.push_back(std::get<SiteEBParams>(transport.fetch(Round::LocalEB, s, kCoordinator).payload));

    // Round 4: coordinator -> sites, each receiving its own cluster's effects.
    BatchEffects effects = server_aggregate_cluster_effects(round3, global.cluster_of_site, global.n_clusters());
    transport.publish("effects.json", to_json(effects));
    for (const auto& s : sites)
        transport.post({Round::ClusterEB, kCoordinator, s, restrict_to(effects, global.cluster_of(s))});

    DistributedResult res;
    res.site_harmonized.resize(m);
    for_each_site(m, [&](std::size_t i) {
        const auto fx = std::get<BatchEffects>(transport.fetch(Round::ClusterEB, kCoordinator, sites[i]).payload);
        res.site_harmonized[i] = site_harmonize(local[i], received[i], fx, 0);
    });

    res.harmonized = Matrix(ds.n_samples(), ds.n_features());
    for (std::size_t i = 0; i < m; ++i) {
        const auto& rows = ds.site_rows()[i];
        for (std::size_t j = 0; j < rows.size(); ++j)
            std::copy(res.site_harmonized[i].row(j).begin(), res.site_harmonized[i].row(j).end(),
                      res.harmonized.row(rows[j]).begin());
    }
    res.global = std::move(global);
    res.effects = std::move(effects);
    res.site_order = sites;
    return res;
}

std::size_t onboard_cluster(const SiteLocalParams& local, const GlobalParams& global) {
    if (local.alpha_local.size() != global.n_features() || local.beta_local.rows() != global.n_covariates())
        throw DimensionError("site has G=" + std::to_string(local.alpha_local.size()) + ", P=" +
                             std::to_string(local.beta_local.rows()) + " but the model expects G=" +
                             std::to_string(global.n_features()) + ", P=" + std::to_string(global.n_covariates()));
    Vector gamma(global.n_features());
    for (std::size_t g = 0; g < gamma.size(); ++g) gamma[g] = local.alpha_local[g] - global.alpha[g];
    const Vector v = parameter_vector(local.alpha_local, local.beta_local, gamma);
    return kmeans_predict(global.cluster_model, Matrix::from_data(1, v.size(), v))[0];
}

Matrix onboard_unseen_site(const Dataset& ds_new, const GlobalParams& global, const BatchEffects& effects,
                           const FitOptions& opts) {
    if (global.mode != DistributedMode::Clustered)
        throw ConfigError("unseen sites can only be onboarded with a clustered-mode model");
    if (ds_new.n_features() != global.n_features() || ds_new.n_covariates() != global.n_covariates())
        throw DimensionError("site has G=" + std::to_string(ds_new.n_features()) + ", P=" +
                             std::to_string(ds_new.n_covariates()) + " but the model expects G=" +
                             std::to_string(global.n_features()) + ", P=" + std::to_string(global.n_covariates()));
    const std::size_t c = onboard_cluster(site_local_fit(ds_new, opts), global);
    return site_harmonize(ds_new, global, effects, c);
}

}  // namespace ccombat::federated
