#include "ccombat/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ccombat/error.hpp"
#include "ccombat/federated/messages.hpp"
#include "ccombat/rng.hpp"

namespace ccombat {

void SynthConfig::validate() const {
    if (n_sites < 1 || samples_per_site < 1 || n_features < 1 || sites_per_cluster < 1)
        throw ConfigError("synthetic config counts must all be >= 1");
    if (n_sites % sites_per_cluster != 0)
        throw ConfigError("sites_per_cluster (" + std::to_string(sites_per_cluster) + ") must divide n_sites (" +
                          std::to_string(n_sites) + ")");
    const auto& s = scales;
    if (!(s.alpha_sd >= 0 && s.beta_sd >= 0 && s.gamma_sd >= 0 && s.covariate_sd >= 0))
        throw ConfigError("effect spreads must be nonnegative");
    if (!(s.delta_lo > 0 && s.delta_hi >= s.delta_lo && s.sigma_lo > 0 && s.sigma_hi >= s.sigma_lo))
        throw ConfigError("delta and sigma ranges must be positive and ordered");
}

std::string SynthConfig::describe() const {
    std::ostringstream os;
    os << "M=" << n_sites << " N_i=" << samples_per_site << " G=" << n_features << " sites/cluster="
       << sites_per_cluster << " P=" << n_covariates << " seed=" << seed;
    return os.str();
}

SynthConfig table1_config(int index, std::uint64_t seed) {
    static constexpr std::size_t sites[] = {20, 25, 30, 35, 40};
    static constexpr std::size_t samples[] = {20, 25, 30, 35, 40};
    static constexpr std::size_t features[] = {20, 25, 30, 40, 50};
    if (index < 1 || index > 5) throw RangeError("preset index must be in 1..5, got " + std::to_string(index));
    SynthConfig cfg;
    cfg.n_sites = sites[index - 1];
    cfg.samples_per_site = samples[index - 1];
    cfg.n_features = features[index - 1];
    cfg.sites_per_cluster = 5;
    cfg.n_covariates = 5;
    cfg.seed = seed;
    return cfg;
}

namespace {

std::string site_name(std::size_t i, std::size_t m) {
    std::string num = std::to_string(i + 1);
    const std::size_t width = std::max<std::size_t>(2, std::to_string(m).size());
    return "site" + std::string(width - std::min(width, num.size()), '0') + num;
}

}  // namespace

SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t m = cfg.n_sites, n_i = cfg.samples_per_site, g_count = cfg.n_features,
                      p = cfg.n_covariates, c_count = cfg.n_clusters();
    const auto& sc = cfg.scales;

    Rng rng(cfg.seed);
    GeneratingParams gp;
    gp.alpha.resize(g_count);
    for (double& a : gp.alpha) a = rng.normal(0.0, sc.alpha_sd);
    gp.beta = Matrix(p, g_count);
    for (double& b : gp.beta.data()) b = rng.normal(0.0, sc.beta_sd);
    gp.gamma = Matrix(c_count, g_count);
    for (double& v : gp.gamma.data()) v = rng.normal(0.0, sc.gamma_sd);
    if (sc.center_gamma) {
        // Clusters hold equally many samples, so a zero column mean matches the
        // sum-to-zero convention the L/S fit uses to separate gamma from alpha.
        for (std::size_t g = 0; g < g_count; ++g) {
            double mean = 0.0;
            for (std::size_t c = 0; c < c_count; ++c) mean += gp.gamma(c, g);
            mean /= static_cast<double>(c_count);
            for (std::size_t c = 0; c < c_count; ++c) gp.gamma(c, g) -= mean;
        }
    }
    gp.delta = Matrix(c_count, g_count);
    for (double& v : gp.delta.data()) v = rng.uniform(sc.delta_lo, sc.delta_hi);
    gp.sigma.resize(g_count);
    for (double& s : gp.sigma) s = rng.uniform(sc.sigma_lo, sc.sigma_hi);

    const std::size_t n = m * n_i;
    Matrix y(n, g_count), x(n, p), truth(n, g_count);
    std::vector<std::string> site_of(n);
    SynthTruth st;
    st.labels.resize(n);
    st.cluster_of_row.resize(n);
    st.cluster_of_site.resize(m);

    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = i / cfg.sites_per_cluster;
        st.cluster_of_site[i] = c;
        Rng site_rng = Rng::substream(cfg.seed, i + 1);
        std::vector<int> labels(n_i, 0);
        for (std::size_t j = 0; j < n_i / 2; ++j) labels[j] = 1;
        site_rng.shuffle(labels);
        const std::string id = site_name(i, m);
        for (std::size_t j = 0; j < n_i; ++j) {
            const std::size_t r = i * n_i + j;
            site_of[r] = id;
            st.labels[r] = labels[j];
            st.cluster_of_row[r] = c;
            const double mu = labels[j] ? sc.covariate_shift : -sc.covariate_shift;
            for (std::size_t k = 0; k < p; ++k) x(r, k) = site_rng.normal(mu, sc.covariate_sd);
            for (std::size_t g = 0; g < g_count; ++g) {
                double t = gp.alpha[g];
                for (std::size_t k = 0; k < p; ++k) t += x(r, k) * gp.beta(k, g);
                truth(r, g) = t;
                y(r, g) = t + gp.gamma(c, g) + gp.delta(c, g) * gp.sigma[g] * site_rng.normal();
            }
        }
    }
    st.ground_truth = std::move(truth);
    st.params = std::move(gp);
    return {Dataset::create(std::move(y), std::move(x), std::move(site_of)), std::move(st)};
}

nlohmann::json to_json(const GeneratingParams& p) {
    using federated::to_json;
    return {{"alpha", p.alpha},
            {"beta", to_json(p.beta)},
            {"gamma", to_json(p.gamma)},
            {"delta", to_json(p.delta)},
            {"sigma", p.sigma}};
}

nlohmann::json to_json(const SynthConfig& cfg) {
    const auto& s = cfg.scales;
    return {{"n_sites", cfg.n_sites},
            {"samples_per_site", cfg.samples_per_site},
            {"n_features", cfg.n_features},
            {"sites_per_cluster", cfg.sites_per_cluster},
            {"n_covariates", cfg.n_covariates},
            {"seed", cfg.seed},
            {"effect_scales",
             {{"alpha_sd", s.alpha_sd},
              {"beta_sd", s.beta_sd},
              {"gamma_sd", s.gamma_sd},
              {"delta_lo", s.delta_lo},
              {"delta_hi", s.delta_hi},
              {"sigma_lo", s.sigma_lo},
              {"sigma_hi", s.sigma_hi},
              {"covariate_shift", s.covariate_shift},
              {"covariate_sd", s.covariate_sd},
              {"center_gamma", s.center_gamma}}}};
}

void write_synth_outputs(const std::filesystem::path& dir, const SynthData& data, const SynthConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const Dataset& ds = data.dataset;
    save_csv(dir / "data.csv", ds);

    CsvTable truth;
    truth.header.push_back("site");
    for (const auto& f : ds.feature_names()) truth.header.push_back(f);
    truth.header.push_back("label");
    truth.header.push_back("cluster");
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
        std::vector<std::string> rec{ds.site_of()[r]};
        for (double v : data.truth.ground_truth.row(r)) rec.push_back(format_double(v));
        rec.push_back(std::to_string(data.truth.labels[r]));
        rec.push_back(std::to_string(data.truth.cluster_of_row[r]));
        truth.rows.push_back(std::move(rec));
    }
    write_csv_table(dir / "truth.csv", truth);

    nlohmann::json cluster_map = nlohmann::json::object();
    for (std::size_t i = 0; i < ds.n_sites(); ++i) cluster_map[ds.sites()[i]] = data.truth.cluster_of_site[i];
    nlohmann::json params = {{"config", to_json(cfg)},
                             {"generating_params", to_json(data.truth.params)},
                             {"cluster_of_site", cluster_map}};
    std::ofstream(dir / "params.json") << params.dump(2) << "\n";
    std::ofstream(dir / "schema.json") << schema_of(ds).to_json().dump(2) << "\n";
}

TruthTable load_truth_csv(const std::filesystem::path& path, std::size_t n_features) {
    const CsvTable t = read_csv_table(path);
    if (t.header.size() < n_features + 2) throw SchemaError("truth file has too few columns");
    std::size_t label_col = t.header.size();
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == "label") label_col = i;
    if (label_col == t.header.size()) throw SchemaError("truth file has no 'label' column");
    TruthTable out{Matrix(t.rows.size(), n_features), std::vector<int>(t.rows.size())};
    std::vector<std::string> names(t.header.begin() + 1, t.header.begin() + 1 + static_cast<long>(n_features));
    CsvSchema s{t.header[0], names, {}, {"label"}};
    const Dataset ds = dataset_from_table(t, s);
    out.ground_truth = ds.features();
    for (std::size_t r = 0; r < t.rows.size(); ++r) out.labels[r] = static_cast<int>(ds.targets()(r, 0));
    return out;
}

}  // namespace ccombat
