#include "doctest.h"

#include <filesystem>

#include "test_support.hpp"

using namespace ccombat;
using namespace ccombat::federated;
namespace fs = std::filesystem;

namespace {

SiteLocalParams fake_site(const std::string& id, std::vector<double> alpha, std::size_t n) {
    const std::size_t g = alpha.size();
    SiteLocalParams s;
    s.site_id = id;
    s.alpha_local = std::move(alpha);
    s.beta_local = Matrix(0, g);
    s.gamma_local = Vector(g, 0.0);
    s.n_samples = n;
    s.design_gram = Matrix(1, 1, static_cast<double>(n));
    s.design_cross = Matrix(1, g);
    for (std::size_t k = 0; k < g; ++k) s.design_cross(0, k) = s.alpha_local[k] * static_cast<double>(n);
    s.response_sq = Vector(g);
    for (std::size_t k = 0; k < g; ++k) s.response_sq[k] = s.alpha_local[k] * s.alpha_local[k] * n + n;
    return s;
}

// Sites share one covariate matrix, so the pooled fit and the average of
// local fits coincide.
Dataset balanced_dataset(std::size_t sites, std::size_t per_site, std::uint64_t seed) {
    const Matrix x0 = testing::random_matrix(per_site, 2, seed);
    const Dataset base = testing::random_dataset(sites, per_site, 4, 2, seed + 1);
    Matrix x(sites * per_site, 2);
    for (std::size_t i = 0; i < sites; ++i)
        for (std::size_t j = 0; j < per_site; ++j)
            for (std::size_t p = 0; p < 2; ++p) x(i * per_site + j, p) = x0(j, p);
    return Dataset::create(base.features(), x, base.site_of());
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "ccombat_unit" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("two sites aggregate to the midpoint") {
    const std::vector<SiteLocalParams> msgs{fake_site("a", {1.0, 2.0}, 4), fake_site("b", {3.0, 6.0}, 4)};
    const GlobalParams gp = server_aggregate_global(msgs, 2, 0, DistributedMode::PerSite);
    CHECK(gp.alpha[0] == doctest::Approx(2.0));
    CHECK(gp.alpha[1] == doctest::Approx(4.0));
    CHECK(gp.cluster_of("a") != gp.cluster_of("b"));
    CHECK_THROWS_AS(gp.cluster_of("zzz"), ProtocolError);
    const std::vector<SiteLocalParams> one{msgs[0]};
    CHECK_THROWS_AS(server_aggregate_global(one, 1, 0, DistributedMode::Clustered), ProtocolError);
}

TEST_CASE("balanced designs: aggregated parameters equal pooled OLS") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset ds = balanced_dataset(5, 9, seed);
        const FeatureWiseModel pooled = fit_feature_model(ds);
        std::vector<SiteLocalParams> msgs;
        for (const auto& s : ds.sites()) msgs.push_back(site_local_fit(ds.select_site(s)));
        const GlobalParams gp = server_aggregate_global(msgs, 5, seed, DistributedMode::PerSite);
        CHECK(max_abs_diff(gp.alpha, pooled.alpha) < 1e-9);
        CHECK(max_abs_diff(gp.beta, pooled.beta) < 1e-9);
        CHECK(max_abs_diff(gp.sigma, pooled.sigma) < 1e-9);
    }
}

TEST_CASE("clustered mode with one cluster per site equals per-site mode") {
    const Dataset ds = generate(table1_config(1, 2)).dataset;
    InProcessTransport t1, t2;
    const auto per_site = run_distributed(ds, 0, DistributedMode::PerSite, t1, 2);
    const auto clustered = run_distributed(ds, ds.n_sites(), DistributedMode::Clustered, t2, 2);
    CHECK(max_abs_diff(per_site.harmonized, clustered.harmonized) < 1e-12);
}

TEST_CASE("in-process and file transports give identical results") {
    const Dataset ds = generate(table1_config(1, 4)).dataset;
    InProcessTransport mem;
    FileTransport files(fresh_dir("file_transport"));
    const auto a = run_distributed(ds, 4, DistributedMode::Clustered, mem, 4);
    const auto b = run_distributed(ds, 4, DistributedMode::Clustered, files, 4);
    CHECK(a.harmonized == b.harmonized);
    const auto ta = mem.canonical_transcript(), tb = files.canonical_transcript();
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i].dump() == tb[i].dump());
    CHECK(fs::exists(files.path_for(Round::LocalParams, ds.sites()[0])));
    CHECK(fs::exists(files.path_for(Round::ClusterEB, ds.sites()[0])));
    // 2 site messages per site per direction.
    CHECK(ta.size() == 4 * ds.n_sites());
}

TEST_CASE("a silent site times out and is named") {
    const Dataset ds = testing::random_dataset(4, 6, 3, 1, 9);
    for (int round : {1, 3}) {
        DistributedOptions opts;
        opts.dropout_at_round["s2"] = round;
        InProcessTransport t(std::chrono::milliseconds(200));
        try {
            run_distributed(ds, 2, DistributedMode::Clustered, t, 0, opts);
            FAIL("expected TimeoutError");
        } catch (const TimeoutError& e) {
            CHECK(e.site() == "s2");
        }
    }
    DistributedOptions opts;
    opts.dropout_at_round["s1"] = 1;
    FileTransport ft(fresh_dir("timeout"), std::chrono::milliseconds(200));
    CHECK_THROWS_AS(run_distributed(ds, 2, DistributedMode::Clustered, ft, 0, opts), TimeoutError);
}

TEST_CASE("message envelopes reject tampering and version drift") {
    const RoundMessage msg{Round::LocalEB, "s1", kCoordinator, SiteEBParams{"s1", {0.1, 0.2}, {1.0, 1.1}}};
    const auto j = encode(msg);
    const RoundMessage back = decode(j);
    CHECK(std::get<SiteEBParams>(back.payload).gamma_star_local == Vector{0.1, 0.2});

    auto tampered = j;
    tampered["payload"]["gamma_star_local"][0] = 9.0;
    CHECK_THROWS_AS(decode(tampered), ProtocolError);
    auto version = j;
    version["protocol_version"] = kProtocolVersion + 1;
    CHECK_THROWS_AS(decode(version), ProtocolError);
    auto wrong_round = j;
    wrong_round["round"] = to_string(Round::LocalParams);
    CHECK_THROWS_AS(decode(wrong_round), ProtocolError);
    CHECK_THROWS_AS(decode(nlohmann::json::object()), ProtocolError);
}

TEST_CASE("transcripts carry only summary messages") {
    const SynthData sd = generate(table1_config(1, 6));
    for (auto mode : {DistributedMode::PerSite, DistributedMode::Clustered}) {
        InProcessTransport t;
        run_distributed(sd.dataset, 4, mode, t, 6);
        CHECK(scan_transcript(t.transcript(), sd.dataset.site_sizes(), sd.dataset.n_features()).empty());
    }
}

TEST_CASE("the privacy scanner flags feature-shaped payloads") {
    const Dataset ds = testing::random_dataset(2, 5, 3, 0, 1);
    std::vector<nlohmann::json> transcript;
    nlohmann::json leak = encode({Round::LocalEB, "s0", kCoordinator, SiteEBParams{"s0", {0, 0, 0}, {1, 1, 1}}});
    leak["payload"]["extra"] = to_json(ds.select_site("s0").features());
    transcript.push_back(leak);
    nlohmann::json odd = leak;
    odd["payload"]["type"] = "RawRows";
    transcript.push_back(odd);
    const auto v = scan_transcript(transcript, ds.site_sizes(), 3);
    CHECK(v.size() >= 3);
}

TEST_CASE("onboarding a new site reads the frozen model only") {
    const SynthData sd = generate(table1_config(1, 8));
    const auto parts = split_by_sites(sd.dataset, 4, 8);
    InProcessTransport t;
    DistributedOptions opts;
    opts.kmeans.restarts = 10;
    const auto res = run_distributed(parts.train, 4, DistributedMode::Clustered, t, 8, opts);
    const std::string before = to_json(res.global).dump() + to_json(res.effects).dump();
    for (const auto& site : parts.test.sites()) {
        const Dataset one = parts.test.select_site(site);
        CHECK(onboard_unseen_site(one, res.global, res.effects).rows() == one.n_samples());
    }
    CHECK_THROWS_AS(onboard_unseen_site(parts.test, res.global, res.effects), Error);
    CHECK(to_json(res.global).dump() + to_json(res.effects).dump() == before);

    const std::size_t c = onboard_cluster(site_local_fit(parts.train.select_site(parts.train.sites()[0])), res.global);
    CHECK(c == res.global.cluster_of(parts.train.sites()[0]));
}

TEST_CASE("site ids are file-name safe") {
    CHECK(encode_site_id("site_01.a-b") == "site_01.a-b");
    CHECK(encode_site_id("a/b c") != "a/b c");
    CHECK(encode_site_id("a/b c").find('/') == std::string::npos);
}
