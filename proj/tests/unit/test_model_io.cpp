#include "doctest.h"

#include "test_support.hpp"

using namespace ccombat;

TEST_CASE("ComBat documents round-trip exactly") {
    const Dataset ds = testing::random_dataset(4, 6, 3, 2, 1);
    const CombatFit fit = combat_fit(ds);
    const auto doc = combat_document(fit, {"combat", ds.feature_names(), ds.covariate_names()});
    const CombatFit back = combat_from_document(nlohmann::json::parse(doc.dump()));
    CHECK(back.model.alpha == fit.model.alpha);
    CHECK(back.model.beta == fit.model.beta);
    CHECK(back.effects.gamma_star == fit.effects.gamma_star);
    CHECK(back.effects.delta_sq_star == fit.effects.delta_sq_star);
    CHECK(combat_apply(ds, back) == combat_apply(ds, fit));
    CHECK(read_header(doc).feature_names == ds.feature_names());
}

TEST_CASE("Cluster ComBat documents round-trip exactly") {
    const SynthData sd = generate(table1_config(1, 2));
    const auto art = cluster_combat_fit(sd.dataset, 4, 2);
    const auto doc = cluster_combat_document(art, {"cluster-combat", {}, {}});
    const auto back = cluster_combat_from_document(nlohmann::json::parse(doc.dump()));
    CHECK(harmonize_unseen_centralized(back, sd.dataset) == harmonize_unseen_centralized(art, sd.dataset));
    CHECK(cluster_combat_document(back, {"cluster-combat", {}, {}}) == doc);
}

TEST_CASE("model documents are checked on load") {
    const Dataset ds = testing::random_dataset(3, 5, 3, 0, 1);
    auto doc = combat_document(combat_fit(ds), {"combat", {}, {}});
    CHECK_THROWS_AS(cluster_combat_from_document(doc), SchemaError);
    auto v = doc;
    v["format_version"] = kModelFormatVersion + 1;
    CHECK_THROWS_AS(combat_from_document(v), SchemaError);
    auto broken = doc;
    broken.erase("format_version");
    CHECK_THROWS_AS(combat_from_document(broken), SchemaError);
}
