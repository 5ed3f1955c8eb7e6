#include "doctest.h"

#include <cmath>

#include "test_support.hpp"

using namespace ccombat;

TEST_CASE("held-out site counts stay within bounds") {
    CHECK(held_out_sites(20, 0.3) == 6);
    CHECK(held_out_sites(2, 0.3) == 1);
    CHECK(held_out_sites(3, 0.99) == 2);
}

TEST_CASE("algorithm names round-trip") {
    for (Algorithm a : kAllAlgorithms) CHECK(algorithm_from_string(to_string(a)) == a);
    CHECK_THROWS_AS(algorithm_from_string("nope"), ConfigError);
}

TEST_CASE("one seed of the reconstruction protocol") {
    ExperimentOptions opts;
    opts.with_accuracy = false;
    SynthConfig cfg = table1_config(1);
    const auto r = run_table2_seed(cfg, 3, opts);
    for (double v : r.rmse) CHECK(std::isfinite(v));
    for (double v : r.accuracy) CHECK(std::isnan(v));
    // Every harmonizer improves on raw features.
    for (std::size_t k = 1; k < 5; ++k) CHECK(r.rmse[k] < r.rmse[0]);
    // Threaded and sequential seed loops agree.
    const auto a = run_table2_seeds(cfg, 10, 3, opts, 1);
    const auto b = run_table2_seeds(cfg, 10, 3, opts, 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].rmse == b[i].rmse);
}

TEST_CASE("map_seeds keeps seed order and surfaces errors") {
    const auto v = map_seeds(5, 8, 4, [](std::uint64_t s) { return static_cast<double>(s * s); });
    for (std::size_t i = 0; i < 8; ++i) CHECK(v[i] == static_cast<double>((5 + i) * (5 + i)));
    CHECK_THROWS_AS(map_seeds(0, 4, 2,
                              [](std::uint64_t s) -> double {
                                  if (s == 2) throw RangeError("boom");
                                  return 0.0;
                              }),
                    RangeError);
}

TEST_CASE("table summary layout") {
    std::vector<Table2SeedResult> seeds;
    for (std::uint64_t s = 0; s < 3; ++s) {
        Table2SeedResult r;
        r.seed = s;
        r.rmse = {10, 5, 4, 5, 4};
        r.accuracy = {0.9, 0.95, 0.96, 0.95, 0.96};
        r.truth_accuracy = 0.97;
        seeds.push_back(r);
    }
    const auto rep = summarize_table2({"Data-1"}, {seeds});
    const CsvTable t = table2_csv(rep);
    CHECK(t.header.size() == 3);
    CHECK(t.rows.size() == 6);
    CHECK(t.rows[0][1] == "10.00±0.00");
}
