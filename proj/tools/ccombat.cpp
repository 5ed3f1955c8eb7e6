// ccombat: command-line front end for generation, fitting, harmonization,
// federated simulation, onboarding and evaluation.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccombat/ccombat.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ccombat;

namespace {

constexpr const char* kVersion = "1.0.0";

// Flags shared by the fitting subcommands.
struct ModelFlags {
    std::string algo{"cluster-combat"};
    std::size_t clusters{0};
    std::uint64_t seed{0};
    bool variance_floor{false};
    double ridge{0.0};
    double eb_tol{1e-6};
    std::size_t eb_max_iter{100};
    std::size_t kmeans_restarts{1};
    std::size_t kmeans_max_iter{300};
    bool cluster_standardized{false};
    bool weight_by_samples{false};
    bool standardize_params{false};
    double timeout_seconds{60.0};

    ClusterCombatOptions centralized() const {
        ClusterCombatOptions o;
        o.fit = {variance_floor, ridge};
        o.eb = {eb_tol, eb_max_iter};
        o.kmeans.max_iter = kmeans_max_iter;
        o.kmeans.restarts = kmeans_restarts;
        o.cluster_standardized = cluster_standardized;
        return o;
    }
    federated::DistributedOptions distributed() const {
        federated::DistributedOptions o;
        o.weighting = weight_by_samples ? federated::Weighting::BySamples : federated::Weighting::Uniform;
        o.standardize_params = standardize_params;
        o.fit = {variance_floor, ridge};
        o.eb = {eb_tol, eb_max_iter};
        o.kmeans.max_iter = kmeans_max_iter;
        o.kmeans.restarts = kmeans_restarts;
        return o;
    }
    json to_json() const {
        return {{"algo", algo},
                {"clusters", clusters},
                {"seed", seed},
                {"variance_floor", variance_floor},
                {"ridge", ridge},
                {"eb_tol", eb_tol},
                {"eb_max_iter", eb_max_iter},
                {"kmeans_restarts", kmeans_restarts},
                {"kmeans_max_iter", kmeans_max_iter},
                {"cluster_standardized", cluster_standardized},
                {"weight_by_samples", weight_by_samples},
                {"standardize_params", standardize_params},
                {"timeout_seconds", timeout_seconds}};
    }
};

void add_model_flags(CLI::App* cmd, ModelFlags& f, bool with_algo) {
    if (with_algo)
        cmd->add_option("--algo", f.algo, "combat | cluster-combat | dist-combat | dist-cluster-combat")
            ->check(CLI::IsMember({"combat", "cluster-combat", "dist-combat", "dist-cluster-combat"}))
            ->capture_default_str();
    cmd->add_option("-k,--clusters", f.clusters, "number of clusters for the cluster variants (required there)");
    cmd->add_option("--seed", f.seed, "clustering seed")->capture_default_str();
    cmd->add_flag("--variance-floor", f.variance_floor,
                  "floor per-feature sigma at 1e-12 instead of rejecting constant features");
    cmd->add_option("--ridge", f.ridge, "ridge added to the OLS normal matrix")->capture_default_str();
    cmd->add_option("--eb-tol", f.eb_tol, "empirical Bayes convergence tolerance")->capture_default_str();
    cmd->add_option("--eb-max-iter", f.eb_max_iter, "empirical Bayes iteration cap")->capture_default_str();
    cmd->add_option("--kmeans-restarts", f.kmeans_restarts, "k-means++ restarts (lowest inertia wins)")
        ->capture_default_str();
    cmd->add_option("--kmeans-max-iter", f.kmeans_max_iter, "Lloyd iteration cap")->capture_default_str();
    cmd->add_flag("--cluster-standardized", f.cluster_standardized,
                  "cluster standardized residuals instead of raw feature rows (centralized)");
    cmd->add_flag("--weight-by-samples", f.weight_by_samples,
                  "average site parameters weighted by sample count (distributed)");
    cmd->add_flag("--standardize-params", f.standardize_params,
                  "z-score site parameter vectors before clustering (distributed)");
    cmd->add_option("--timeout", f.timeout_seconds, "per-round federated timeout in seconds")->capture_default_str();
}

// Schema: explicit --schema, else --site/--features/--covariates flags, else
// a schema.json next to the CSV, else the names stored in a model.
struct SchemaFlags {
    std::string schema_path;
    std::string site;
    std::vector<std::string> features;
    std::vector<std::string> covariates;
    std::vector<std::string> targets;
};

void add_schema_flags(CLI::App* cmd, SchemaFlags& s) {
    cmd->add_option("--schema", s.schema_path, "JSON schema sidecar");
    cmd->add_option("--site-column", s.site, "site column name");
    cmd->add_option("--features", s.features, "feature column names")->delimiter(',');
    cmd->add_option("--covariates", s.covariates, "covariate column names")->delimiter(',');
    cmd->add_option("--targets", s.targets, "target column names")->delimiter(',');
}

CsvSchema resolve_schema(const SchemaFlags& s, const fs::path& csv, const ModelHeader* model = nullptr) {
    if (!s.schema_path.empty()) return CsvSchema::load(s.schema_path);
    if (!s.features.empty()) {
        CsvSchema out;
        out.site = s.site.empty() ? "site" : s.site;
        out.features = s.features;
        out.covariates = s.covariates;
        out.targets = s.targets;
        return out;
    }
    const fs::path sibling = csv.parent_path() / "schema.json";
    if (fs::exists(sibling)) return CsvSchema::load(sibling);
    if (model) {
        CsvSchema out;
        out.site = s.site.empty() ? "site" : s.site;
        out.features = model->feature_names;
        out.covariates = model->covariate_names;
        return out;
    }
    throw ConfigError("no schema: pass --schema, --features/--covariates, or place schema.json next to " +
                      csv.string());
}

std::string file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return federated::content_digest(ss.str());
}

// Run manifest written next to the outputs.
void write_manifest(const fs::path& path, const std::string& subcommand, const std::vector<std::string>& argv,
                    const json& config, const std::vector<fs::path>& outputs) {
    json outs = json::array();
    for (const auto& o : outputs)
        if (fs::exists(o)) outs.push_back({{"path", o.filename().string()}, {"digest", file_digest(o)}});
    json m{{"tool", "ccombat"},
           {"version", kVersion},
           {"model_format_version", kModelFormatVersion},
           {"protocol_version", federated::kProtocolVersion},
           {"subcommand", subcommand},
           {"argv", argv},
           {"config", config},
           {"outputs", outs}};
    save_json(path, m);
}

fs::path manifest_path_for(const fs::path& output) {
    if (fs::is_directory(output)) return output / "manifest.json";
    return output.parent_path() / (output.stem().string() + ".manifest.json");
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

ModelHeader header_of(const std::string& kind, const Dataset& ds) {
    return {kind, ds.feature_names(), ds.covariate_names()};
}

void check_against_header(const ModelHeader& h, const Dataset& ds) {
    if (h.feature_names.size() != ds.n_features())
        throw DimensionError("model has " + std::to_string(h.feature_names.size()) + " features, data has " +
                             std::to_string(ds.n_features()));
    if (h.covariate_names.size() != ds.n_covariates())
        throw DimensionError("model has " + std::to_string(h.covariate_names.size()) + " covariates, data has " +
                             std::to_string(ds.n_covariates()));
    if (h.feature_names != ds.feature_names()) throw SchemaError("feature names differ from the model's");
}

std::size_t require_clusters(const ModelFlags& f) {
    if (f.clusters == 0) throw ConfigError("--clusters is required for " + f.algo);
    return f.clusters;
}

// Fits the selected algorithm; returns the model document and the
// harmonized training rows.
std::pair<json, Matrix> fit_model(const Dataset& ds, const ModelFlags& f) {
    if (f.algo == "combat") {
        const CombatFit fit = combat_fit(ds, {f.variance_floor, f.ridge}, {f.eb_tol, f.eb_max_iter});
        return {combat_document(fit, header_of("combat", ds)), combat_apply(ds, fit)};
    }
    if (f.algo == "cluster-combat") {
        const auto art = cluster_combat_fit(ds, require_clusters(f), f.seed, f.centralized());
        return {cluster_combat_document(art, header_of("cluster-combat", ds)),
                cluster_combat_harmonize_training(art, ds)};
    }
    const bool clustered = f.algo == "dist-cluster-combat";
    const auto timeout = std::chrono::milliseconds(static_cast<long long>(f.timeout_seconds * 1000));
    federated::InProcessTransport transport(timeout);
    const auto res = federated::run_distributed(
        ds, clustered ? require_clusters(f) : ds.n_sites(),
        clustered ? federated::DistributedMode::Clustered : federated::DistributedMode::PerSite, transport, f.seed,
        f.distributed());
    return {distributed_document({res.global, res.effects}, header_of(f.algo, ds)), res.harmonized};
}

// Applies a stored model to data whose sites are either part of the model
// (ComBat variants) or new (cluster variants).
Matrix apply_model(const json& doc, const Dataset& ds, const ModelFlags& f) {
    const ModelHeader h = read_header(doc);
    check_against_header(h, ds);
    if (h.kind == "combat") return combat_apply(ds, combat_from_document(doc));
    if (h.kind == "cluster-combat") return harmonize_unseen_centralized(cluster_combat_from_document(doc), ds);
    const DistributedModel model = distributed_from_document(doc);
    Matrix out(ds.n_samples(), ds.n_features());
    for (std::size_t s = 0; s < ds.n_sites(); ++s) {
        const Dataset site = ds.select_site(ds.sites()[s]);
        Matrix h_site;
        const bool known = std::any_of(model.global.cluster_of_site.begin(), model.global.cluster_of_site.end(),
                                       [&](const auto& p) { return p.first == ds.sites()[s]; });
        if (known)
            h_site = federated::site_harmonize(site, model.global, model.effects, model.global.cluster_of(ds.sites()[s]));
        else
            h_site = federated::onboard_unseen_site(site, model.global, model.effects, {f.variance_floor, f.ridge});
        const auto& rows = ds.site_rows()[s];
        for (std::size_t r = 0; r < rows.size(); ++r)
            std::copy(h_site.row(r).begin(), h_site.row(r).end(), out.row(rows[r]).begin());
    }
    return out;
}

Matrix onboard_model(const json& doc, const Dataset& ds, const ModelFlags& f) {
    const ModelHeader h = read_header(doc);
    if (h.kind == "combat" || h.kind == "dist-combat")
        throw ConfigError("a " + h.kind + " model cannot harmonize unseen sites; use a cluster model");
    check_against_header(h, ds);
    if (h.kind == "cluster-combat") return harmonize_unseen_centralized(cluster_combat_from_document(doc), ds);
    const DistributedModel model = distributed_from_document(doc);
    Matrix out(ds.n_samples(), ds.n_features());
    for (std::size_t s = 0; s < ds.n_sites(); ++s) {
        const Matrix h_site =
            federated::onboard_unseen_site(ds.select_site(ds.sites()[s]), model.global, model.effects,
                                           {f.variance_floor, f.ridge});
        const auto& rows = ds.site_rows()[s];
        for (std::size_t r = 0; r < rows.size(); ++r)
            std::copy(h_site.row(r).begin(), h_site.row(r).end(), out.row(rows[r]).begin());
    }
    return out;
}

void save_harmonized(const fs::path& path, const Dataset& ds, const Matrix& h) {
    ensure_parent(path);
    save_csv(path, ds.with_features(h));
}

std::string join_path_list(const std::vector<fs::path>& v) {
    std::string s;
    for (const auto& p : v) s += (s.empty() ? "" : ", ") + p.string();
    return s;
}

void write_report(const fs::path& dir, const std::string& name, const std::vector<EvalReport>& reports) {
    CsvTable t;
    t.header = {"metric", "config", "seed", "value"};
    json summary = json::array();
    for (const auto& r : reports) {
        for (std::size_t i = 0; i < r.values.size(); ++i)
            t.rows.push_back({r.metric, r.config, std::to_string(r.seeds[i]), format_double(r.values[i])});
        summary.push_back(r.to_json());
    }
    write_csv_table(dir / (name + ".csv"), t);
    save_json(dir / (name + ".json"), summary);
}

std::vector<std::size_t> parse_presets(const std::vector<int>& in) {
    std::vector<std::size_t> out;
    for (int p : in) {
        if (p < 1 || p > 5) throw RangeError("preset must be in 1..5, got " + std::to_string(p));
        out.push_back(static_cast<std::size_t>(p));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cluster ComBat harmonization toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    const std::vector<std::string> args(argv, argv + argc);

    // gen ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a synthetic multi-site dataset");
    int preset = 0;
    SynthConfig synth;
    std::string gen_out;
    gen->add_option("--preset", preset, "simulation preset 1..5 (overrides the size flags)")->check(CLI::Range(1, 5));
    gen->add_option("--sites", synth.n_sites, "number of sites")->capture_default_str();
    gen->add_option("--samples", synth.samples_per_site, "samples per site")->capture_default_str();
    gen->add_option("--n-features", synth.n_features, "features")->capture_default_str();
    gen->add_option("--sites-per-cluster", synth.sites_per_cluster, "sites per cluster")->capture_default_str();
    gen->add_option("--n-covariates", synth.n_covariates, "covariates")->capture_default_str();
    gen->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
    gen->add_option("--gamma-sd", synth.scales.gamma_sd, "spread of cluster location effects")->capture_default_str();
    gen->add_option("--beta-sd", synth.scales.beta_sd, "spread of covariate effects")->capture_default_str();
    gen->add_option("--alpha-sd", synth.scales.alpha_sd, "spread of feature means")->capture_default_str();
    gen->add_option("--delta-min", synth.scales.delta_lo, "lower bound of cluster scale effects")
        ->capture_default_str();
    gen->add_option("--delta-max", synth.scales.delta_hi, "upper bound of cluster scale effects")->capture_default_str();
    gen->add_option("--sigma-min", synth.scales.sigma_lo, "lower bound of feature noise")->capture_default_str();
    gen->add_option("--sigma-max", synth.scales.sigma_hi, "upper bound of feature noise")->capture_default_str();
    gen->add_option("-o,--out", gen_out, "output directory")->required();

    // fit / harmonize ---------------------------------------------------------
    ModelFlags fit_flags;
    SchemaFlags fit_schema;
    std::string fit_input, fit_out, fit_harmonized;
    auto* fit = app.add_subcommand("fit", "fit a harmonization model and save it as JSON");
    fit->add_option("input", fit_input, "training CSV")->required();
    fit->add_option("-o,--out", fit_out, "model JSON path")->required();
    fit->add_option("--harmonized", fit_harmonized, "also write harmonized training rows to this CSV");
    add_model_flags(fit, fit_flags, true);
    add_schema_flags(fit, fit_schema);

    ModelFlags harm_flags;
    SchemaFlags harm_schema;
    std::string harm_input, harm_out, harm_model, harm_model_out;
    auto* harm = app.add_subcommand("harmonize", "harmonize a CSV, fitting a model unless --model is given");
    harm->add_option("input", harm_input, "input CSV")->required();
    harm->add_option("-o,--out", harm_out, "harmonized CSV path")->required();
    harm->add_option("--model", harm_model, "apply this stored model instead of fitting");
    harm->add_option("--model-out", harm_model_out, "save the fitted model here");
    add_model_flags(harm, harm_flags, true);
    add_schema_flags(harm, harm_schema);

    // onboard -------------------------------------------------------------------
    ModelFlags onb_flags;
    SchemaFlags onb_schema;
    std::string onb_input, onb_out, onb_model;
    auto* onb = app.add_subcommand("onboard", "harmonize unseen sites with a frozen cluster model");
    onb->add_option("input", onb_input, "CSV of the new site(s)")->required();
    onb->add_option("--model", onb_model, "cluster-combat or dist-cluster-combat model JSON")
        ->required();
    onb->add_option("-o,--out", onb_out, "harmonized CSV path")->required();
    onb->add_flag("--variance-floor", onb_flags.variance_floor, "floor local sigma at 1e-12");
    add_schema_flags(onb, onb_schema);

    // federate ------------------------------------------------------------------
    ModelFlags fed_flags;
    SchemaFlags fed_schema;
    std::string fed_input, fed_out, fed_mode{"clustered"}, fed_workdir;
    auto* fed = app.add_subcommand("federate", "simulate the federated protocol over the file transport");
    fed->add_option("input", fed_input, "CSV holding every site's rows")->required();
    fed->add_option("-o,--out", fed_out, "output directory")->required();
    fed->add_option("--mode", fed_mode, "per-site | clustered")
        ->check(CLI::IsMember({"per-site", "clustered"}))
        ->capture_default_str();
    fed->add_option("--workdir", fed_workdir, "message directory (default: <out>/messages)");
    add_model_flags(fed, fed_flags, false);
    add_schema_flags(fed, fed_schema);

    // eval ------------------------------------------------------------------------
    std::string ev_protocol{"rmse"}, ev_out, ev_harmonized, ev_truth, ev_data;
    SchemaFlags ev_schema;
    std::size_t ev_seeds{30}, ev_jobs{1};
    std::uint64_t ev_base{0};
    int ev_preset{1};
    std::vector<std::size_t> ev_ks;
    std::vector<std::size_t> ev_samples;
    bool ev_raw_space{false};
    std::size_t ev_restarts{10};
    auto* ev = app.add_subcommand("eval", "metrics and evaluation protocols");
    ev->add_option("--protocol", ev_protocol,
                   "rmse | pca | reconstruction | identifiability | param-recovery | regression | onboard-timing | "
                   "k-sweep | limited-sample")
        ->check(CLI::IsMember({"rmse", "pca", "reconstruction", "identifiability", "param-recovery", "regression",
                               "onboard-timing", "k-sweep", "limited-sample"}))
        ->capture_default_str();
    ev->add_option("--harmonized", ev_harmonized, "harmonized CSV (rmse, pca)");
    ev->add_option("--truth", ev_truth, "truth.csv from gen (rmse, pca)");
    ev->add_option("--data", ev_data, "original data CSV (pca)");
    ev->add_option("-o,--out", ev_out, "output directory (or CSV path for pca)")->required();
    ev->add_option("--seeds", ev_seeds, "number of seeds")->capture_default_str();
    ev->add_option("--seed-base", ev_base, "first seed")->capture_default_str();
    ev->add_option("--jobs", ev_jobs, "seeds run concurrently")->capture_default_str();
    ev->add_option("--preset", ev_preset, "simulation preset")->check(CLI::Range(1, 5))->capture_default_str();
    ev->add_option("--ks", ev_ks, "cluster counts for k-sweep")->delimiter(',');
    ev->add_option("--samples", ev_samples, "samples per site for limited-sample")->delimiter(',');
    ev->add_flag("--raw-space", ev_raw_space, "cluster raw feature rows instead of standardized residuals");
    ev->add_option("--kmeans-restarts", ev_restarts, "k-means++ restarts")->capture_default_str();
    add_schema_flags(ev, ev_schema);

    // table2 ----------------------------------------------------------------------
    std::size_t t2_seeds{30}, t2_jobs{1};
    std::uint64_t t2_base{0};
    std::vector<int> t2_presets{1, 2, 3, 4, 5};
    std::string t2_out;
    bool t2_no_acc{false}, t2_raw_space{false};
    std::size_t t2_restarts{10};
    auto* t2 = app.add_subcommand("table2", "reconstruction RMSE and downstream accuracy over the five presets");
    t2->add_option("--seeds", t2_seeds, "seeds per preset")->capture_default_str();
    t2->add_option("--seed-base", t2_base, "first seed")->capture_default_str();
    t2->add_option("--jobs", t2_jobs, "seeds run concurrently")->capture_default_str();
    t2->add_option("--presets", t2_presets, "presets to run")->delimiter(',');
    t2->add_flag("--no-accuracy", t2_no_acc, "skip the downstream classifiers");
    t2->add_flag("--raw-space", t2_raw_space, "cluster raw feature rows instead of standardized residuals");
    t2->add_option("--kmeans-restarts", t2_restarts, "k-means++ restarts")->capture_default_str();
    t2->add_option("-o,--out", t2_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            SynthConfig cfg = synth;
            if (preset) {
                const SynthConfig p = table1_config(preset, synth.seed);
                cfg.n_sites = p.n_sites;
                cfg.samples_per_site = p.samples_per_site;
                cfg.n_features = p.n_features;
                cfg.sites_per_cluster = p.sites_per_cluster;
                cfg.n_covariates = p.n_covariates;
            }
            const SynthData data = generate(cfg);
            const fs::path dir(gen_out);
            write_synth_outputs(dir, data, cfg);
            write_manifest(dir / "manifest.json", "gen", args, to_json(cfg),
                           {dir / "data.csv", dir / "truth.csv", dir / "params.json", dir / "schema.json"});
            std::cout << "wrote " << dir.string() << " (" << cfg.describe() << ")\n";
        } else if (fit->parsed()) {
            const Dataset ds = load_csv(fit_input, resolve_schema(fit_schema, fit_input));
            auto [doc, harmonized] = fit_model(ds, fit_flags);
            ensure_parent(fit_out);
            save_json(fit_out, doc);
            std::vector<fs::path> outs{fit_out};
            if (!fit_harmonized.empty()) {
                save_harmonized(fit_harmonized, ds, harmonized);
                outs.emplace_back(fit_harmonized);
            }
            write_manifest(manifest_path_for(fit_out), "fit", args, fit_flags.to_json(), outs);
            std::cout << "wrote " << join_path_list(outs) << "\n";
        } else if (harm->parsed()) {
            std::optional<json> stored;
            std::optional<ModelHeader> header;
            if (!harm_model.empty()) {
                stored = load_json(harm_model);
                header = read_header(*stored);
            }
            const Dataset ds =
                load_csv(harm_input, resolve_schema(harm_schema, harm_input, header ? &*header : nullptr));
            std::vector<fs::path> outs{harm_out};
            Matrix h;
            if (stored) {
                h = apply_model(*stored, ds, harm_flags);
            } else {
                auto [doc, fitted] = fit_model(ds, harm_flags);
                h = std::move(fitted);
                if (!harm_model_out.empty()) {
                    ensure_parent(harm_model_out);
                    save_json(harm_model_out, doc);
                    outs.emplace_back(harm_model_out);
                }
            }
            save_harmonized(harm_out, ds, h);
            write_manifest(manifest_path_for(harm_out), "harmonize", args, harm_flags.to_json(), outs);
            std::cout << "wrote " << join_path_list(outs) << "\n";
        } else if (onb->parsed()) {
            const json doc = load_json(onb_model);
            const ModelHeader header = read_header(doc);
            const Dataset ds = load_csv(onb_input, resolve_schema(onb_schema, onb_input, &header));
            const Matrix h = onboard_model(doc, ds, onb_flags);
            save_harmonized(onb_out, ds, h);
            write_manifest(manifest_path_for(onb_out), "onboard", args,
                           {{"model", onb_model}, {"kind", header.kind}}, {onb_out});
            std::cout << "wrote " << onb_out << "\n";
        } else if (fed->parsed()) {
            const Dataset ds = load_csv(fed_input, resolve_schema(fed_schema, fed_input));
            const fs::path out(fed_out);
            fs::create_directories(out);
            const fs::path work = fed_workdir.empty() ? out / "messages" : fs::path(fed_workdir);
            const auto mode = federated::mode_from_string(fed_mode);
            const std::size_t c = mode == federated::DistributedMode::PerSite ? ds.n_sites() : require_clusters(fed_flags);
            federated::FileTransport transport(
                work, std::chrono::milliseconds(static_cast<long long>(fed_flags.timeout_seconds * 1000)));
            const auto res = federated::run_distributed(ds, c, mode, transport, fed_flags.seed, fed_flags.distributed());
            const std::string kind = mode == federated::DistributedMode::PerSite ? "dist-combat" : "dist-cluster-combat";
            save_json(out / "model.json", distributed_document({res.global, res.effects}, header_of(kind, ds)));
            save_harmonized(out / "harmonized.csv", ds, res.harmonized);
            const auto transcript = transport.canonical_transcript();
            save_json(out / "transcript.json", transcript);
            const auto violations = federated::scan_transcript(transcript, ds.site_sizes(), ds.n_features());
            save_json(out / "privacy.json", {{"clean", violations.empty()}, {"violations", violations}});
            write_manifest(out / "manifest.json", "federate", args, fed_flags.to_json(),
                           {out / "model.json", out / "harmonized.csv", out / "transcript.json", out / "privacy.json"});
            std::cout << "federated run over " << ds.n_sites() << " sites: " << transcript.size() << " messages, "
                      << (violations.empty() ? "privacy scan clean" : "privacy scan found violations") << "\n";
            if (!violations.empty()) return 1;
        } else if (ev->parsed()) {
            ExperimentOptions opts;
            opts.centralized.cluster_standardized = !ev_raw_space;
            opts.centralized.kmeans.restarts = opts.distributed.kmeans.restarts = ev_restarts;
            const SynthConfig cfg = table1_config(ev_preset);
            const std::string cfg_name = "Data-" + std::to_string(ev_preset);
            const fs::path out(ev_out);
            json config{{"protocol", ev_protocol}, {"preset", ev_preset}, {"seeds", ev_seeds}, {"seed_base", ev_base}};

            if (ev_protocol == "rmse") {
                if (ev_harmonized.empty() || ev_truth.empty()) throw ConfigError("rmse needs --harmonized and --truth");
                const Dataset h = load_csv(ev_harmonized, resolve_schema(ev_schema, ev_harmonized));
                const TruthTable truth = load_truth_csv(ev_truth, h.n_features());
                const double value = rmse(h.features(), truth.ground_truth);
                fs::create_directories(out);
                save_json(out / "rmse.json", {{"metric", "rmse"}, {"value", value}});
                write_manifest(out / "manifest.json", "eval", args, config, {out / "rmse.json"});
                std::cout << "rmse " << format_double(value) << "\n";
                return 0;
            }
            if (ev_protocol == "pca") {
                const std::string src = !ev_harmonized.empty() ? ev_harmonized : ev_data;
                if (src.empty() || ev_truth.empty()) throw ConfigError("pca needs --data or --harmonized, and --truth");
                const Dataset ds = load_csv(src, resolve_schema(ev_schema, src));
                const CsvTable truth = read_csv_table(ev_truth);
                std::vector<std::size_t> cluster;
                std::vector<int> label;
                const auto& hdr = truth.header;
                const auto ci = std::find(hdr.begin(), hdr.end(), "cluster") - hdr.begin();
                const auto li = std::find(hdr.begin(), hdr.end(), "label") - hdr.begin();
                if (ci == static_cast<std::ptrdiff_t>(hdr.size()) || li == static_cast<std::ptrdiff_t>(hdr.size()))
                    throw SchemaError("truth CSV needs 'cluster' and 'label' columns");
                for (const auto& row : truth.rows) {
                    cluster.push_back(std::stoul(row[static_cast<std::size_t>(ci)]));
                    label.push_back(std::stoi(row[static_cast<std::size_t>(li)]));
                }
                ensure_parent(out);
                export_pca_plot_data(ds.features(), ds.site_of(), cluster, label, out);
                write_manifest(manifest_path_for(out), "eval", args, config, {out});
                std::cout << "wrote " << out.string() << "\n";
                return 0;
            }

            fs::create_directories(out);
            std::vector<EvalReport> reports;
            auto report = [&](const std::string& metric, const std::string& cfgname, std::vector<double> values) {
                EvalReport r{metric, cfgname, {}, std::move(values)};
                for (std::size_t i = 0; i < r.values.size(); ++i) r.seeds.push_back(ev_base + i);
                std::cout << metric << " [" << cfgname << "] mean " << format_double(r.mean()) << " var "
                          << format_double(r.variance()) << "\n";
                reports.push_back(std::move(r));
            };
            auto table2_metrics = [&](const SynthConfig& c, const ExperimentOptions& o, const std::string& name,
                                      const std::vector<Algorithm>& algs) {
                const auto seeds = run_table2_seeds(c, ev_base, ev_seeds, o, ev_jobs);
                for (Algorithm a : algs) {
                    std::vector<double> v;
                    for (const auto& s : seeds) v.push_back(s.rmse[static_cast<std::size_t>(a)]);
                    report("rmse:" + to_string(a), name, v);
                }
            };

            if (ev_protocol == "reconstruction") {
                opts.with_accuracy = true;
                const auto seeds = run_table2_seeds(cfg, ev_base, ev_seeds, opts, ev_jobs);
                for (Algorithm a : kAllAlgorithms) {
                    std::vector<double> r, acc;
                    for (const auto& s : seeds) {
                        r.push_back(s.rmse[static_cast<std::size_t>(a)]);
                        acc.push_back(s.accuracy[static_cast<std::size_t>(a)]);
                    }
                    report("rmse:" + to_string(a), cfg_name, r);
                    report("accuracy:" + to_string(a), cfg_name, acc);
                }
            } else if (ev_protocol == "identifiability") {
                const SynthConfig ic = identifiability_config();
                std::vector<IdentifiabilityResult> res(ev_seeds);
                map_seeds(ev_base, ev_seeds, ev_jobs, [&](std::uint64_t s) {
                    res[s - ev_base] = run_identifiability(ic, s, opts);
                    return 0.0;
                });
                std::vector<double> sb, sa, cb, ca;
                for (const auto& r : res) {
                    sb.push_back(r.site_before);
                    sa.push_back(r.site_after);
                    cb.push_back(r.cluster_before);
                    ca.push_back(r.cluster_after);
                }
                report("site-accuracy:before", ic.describe(), sb);
                report("site-accuracy:after", ic.describe(), sa);
                report("cluster-accuracy:before", ic.describe(), cb);
                report("cluster-accuracy:after", ic.describe(), ca);
            } else if (ev_protocol == "param-recovery") {
                const SynthConfig pc = parameter_recovery_config();
                report("adjusted-rand", pc.describe(), map_seeds(ev_base, ev_seeds, ev_jobs, [&](std::uint64_t s) {
                           return run_parameter_recovery(pc, s, opts.distributed);
                       }));
            } else if (ev_protocol == "regression") {
                std::vector<std::array<double, 5>> res(ev_seeds);
                map_seeds(ev_base, ev_seeds, ev_jobs, [&](std::uint64_t s) {
                    res[s - ev_base] = run_regression_seed(cfg, s, opts);
                    return 0.0;
                });
                for (Algorithm a : kAllAlgorithms) {
                    std::vector<double> v;
                    for (const auto& r : res) v.push_back(r[static_cast<std::size_t>(a)]);
                    report("mae:" + to_string(a), cfg_name, v);
                }
            } else if (ev_protocol == "onboard-timing") {
                std::vector<OnboardingTiming> res(ev_seeds);
                // Timing runs stay sequential so they do not compete for cores.
                for (std::size_t i = 0; i < ev_seeds; ++i) res[i] = run_onboarding_timing(cfg, ev_base + i, opts);
                std::vector<double> on, re, ratio, d_on, d_re, d_ratio;
                for (const auto& r : res) {
                    on.push_back(r.onboard_seconds);
                    re.push_back(r.refit_seconds);
                    ratio.push_back(r.onboard_seconds / r.refit_seconds);
                    d_on.push_back(r.dist_onboard_seconds);
                    d_re.push_back(r.dist_refit_seconds);
                    d_ratio.push_back(r.dist_onboard_seconds / r.dist_refit_seconds);
                }
                report("onboard-seconds", cfg_name, on);
                report("refit-seconds", cfg_name, re);
                report("onboard/refit", cfg_name, ratio);
                report("dist-onboard-seconds", cfg_name, d_on);
                report("dist-refit-seconds", cfg_name, d_re);
                report("dist-onboard/refit", cfg_name, d_ratio);
            } else if (ev_protocol == "k-sweep") {
                if (ev_ks.empty()) throw ConfigError("k-sweep needs --ks");
                opts.with_accuracy = false;
                for (std::size_t k : ev_ks) {
                    ExperimentOptions o = opts;
                    o.n_clusters = k;
                    table2_metrics(cfg, o, cfg_name + " k=" + std::to_string(k),
                                   {Algorithm::ClusterCombat, Algorithm::DistClusterCombat});
                }
            } else if (ev_protocol == "limited-sample") {
                if (ev_samples.empty()) throw ConfigError("limited-sample needs --samples");
                opts.with_accuracy = false;
                for (std::size_t n : ev_samples) {
                    SynthConfig c = cfg;
                    c.samples_per_site = n;
                    table2_metrics(c, opts, cfg_name + " n=" + std::to_string(n),
                                   {kAllAlgorithms.begin(), kAllAlgorithms.end()});
                }
            }
            write_report(out, ev_protocol, reports);
            write_manifest(out / "manifest.json", "eval", args, config,
                           {out / (ev_protocol + ".csv"), out / (ev_protocol + ".json")});
        } else if (t2->parsed()) {
            ExperimentOptions opts;
            opts.with_accuracy = !t2_no_acc;
            opts.centralized.cluster_standardized = !t2_raw_space;
            opts.centralized.kmeans.restarts = opts.distributed.kmeans.restarts = t2_restarts;
            std::vector<std::string> names;
            std::vector<std::vector<Table2SeedResult>> per_config;
            for (std::size_t p : parse_presets(t2_presets)) {
                names.push_back("Data-" + std::to_string(p));
                per_config.push_back(run_table2_seeds(table1_config(static_cast<int>(p)), t2_base, t2_seeds, opts, t2_jobs));
                std::cerr << names.back() << " done\n";
            }
            const fs::path out(t2_out);
            fs::create_directories(out);
            const Table2Report rep = summarize_table2(names, per_config);
            write_csv_table(out / "table2.csv", table2_csv(rep));
            write_csv_table(out / "table2_seeds.csv", table2_seed_csv(names, per_config));
            json summary = json::array();
            for (std::size_t c = 0; c < names.size(); ++c) {
                for (const auto& r : rep.rmse[c]) summary.push_back(r.to_json());
                for (const auto& r : rep.accuracy[c])
                    if (!r.values.empty()) summary.push_back(r.to_json());
                if (!rep.truth_accuracy[c].values.empty()) summary.push_back(rep.truth_accuracy[c].to_json());
            }
            save_json(out / "summary.json", summary);
            write_manifest(out / "manifest.json", "table2", args,
                           {{"seeds", t2_seeds}, {"seed_base", t2_base}, {"presets", t2_presets},
                            {"accuracy", !t2_no_acc}, {"raw_space", t2_raw_space}, {"kmeans_restarts", t2_restarts}},
                           {out / "table2.csv", out / "table2_seeds.csv", out / "summary.json"});
            std::ifstream in(out / "table2.csv");
            std::cout << in.rdbuf();
        }
    } catch (const ccombat::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
