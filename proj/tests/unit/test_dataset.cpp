#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "test_support.hpp"

using namespace ccombat;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    const fs::path dir = fs::temp_directory_path() / "ccombat_unit";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
}

CsvSchema basic_schema() { return {"site", {"f1", "f2"}, {"age"}, {}}; }

}  // namespace

TEST_CASE("load_csv maps columns by role") {
    const auto p = temp_file("basic.csv", "site,f1,f2,age\nA,1,2,30\nB,3,4,40\nA,5,6,50\n");
    const Dataset ds = load_csv(p, basic_schema());
    CHECK(ds.n_samples() == 3);
    CHECK(ds.n_features() == 2);
    CHECK(ds.n_covariates() == 1);
    CHECK(ds.sites() == std::vector<std::string>{"A", "B"});
    CHECK(ds.site_rows()[0] == std::vector<std::size_t>{0, 2});
    CHECK(ds.features()(2, 1) == 6.0);
    CHECK(ds.covariates()(1, 0) == 40.0);
}

TEST_CASE("load_csv reports the row and column of a bad cell") {
    const auto p = temp_file("bad.csv", "site,f1,f2,age\nA,1,2,30\nB,abc,4,40\n");
    try {
        load_csv(p, basic_schema());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(e.column() == "f1");
    }
}

TEST_CASE("load_csv names a missing column") {
    const auto p = temp_file("missing.csv", "site,f1,age\nA,1,30\n");
    try {
        load_csv(p, basic_schema());
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("'f2'") != std::string::npos);
    }
}

TEST_CASE("load_csv rejects non-finite and missing values") {
    CHECK_THROWS_AS(load_csv(temp_file("nan.csv", "site,f1,f2,age\nA,nan,2,30\n"), basic_schema()), NonFiniteError);
    CHECK_THROWS_AS(load_csv(temp_file("inf.csv", "site,f1,f2,age\nA,1,inf,30\n"), basic_schema()), NonFiniteError);
    CHECK_THROWS_AS(load_csv(temp_file("big.csv", "site,f1,f2,age\nA,1,1e999,30\n"), basic_schema()), NonFiniteError);
    CHECK_THROWS_AS(load_csv(temp_file("empty.csv", "site,f1,f2,age\nA,1,,30\n"), basic_schema()), ParseError);
    CHECK_THROWS_AS(load_csv(temp_file("short.csv", "site,f1,f2,age\nA,1,2\n"), basic_schema()), ParseError);
}

TEST_CASE("CSV parsing follows RFC 4180 quoting") {
    const CsvTable t = parse_csv_table("site,f1\r\n\"a,\"\"b\"\"\",1.5\r\n\"multi\nline\",2\n");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "a,\"b\"");
    CHECK(t.rows[1][0] == "multi\nline");
    CHECK_THROWS_AS(parse_csv_table("a,b\n\"open,1\n"), ParseError);
}

TEST_CASE("save_csv then load_csv reproduces values exactly") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const Dataset ds = testing::random_dataset(3 + seed % 3, 4, 5, seed % 3, seed);
        // Include extreme magnitudes.
        Matrix f = ds.features();
        f(0, 0) = 1e-300 * rng.uniform(1, 2);
        f(1, 1) = -1.234567890123456789e200;
        const Dataset ds2 = ds.with_features(f);
        const fs::path p = fs::temp_directory_path() / "ccombat_unit" / ("rt" + std::to_string(seed) + ".csv");
        save_csv(p, ds2);
        const Dataset back = load_csv(p, schema_of(ds2));
        CHECK(back.features() == ds2.features());
        CHECK(back.covariates() == ds2.covariates());
        CHECK(back.site_of() == ds2.site_of());
    }
}

TEST_CASE("malformed CSV input raises only typed errors") {
    Rng rng(42);
    const std::string alphabet = "ab,\"\n\r 0123456789.-eE+nfi";
    const CsvSchema schema{"site", {"f1"}, {"x"}, {}};
    for (int trial = 0; trial < 2000; ++trial) {
        std::string text = "site,f1,x\n";
        const std::size_t len = rng.index(40);
        for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng.index(alphabet.size())]);
        try {
            const Dataset ds = dataset_from_table(parse_csv_table(text), schema);
            CHECK(ds.n_samples() >= 1);
            for (double v : ds.features().data()) CHECK(std::isfinite(v));
        } catch (const Error&) {
        }
    }
}

TEST_CASE("schema sidecar parsing") {
    const auto s = CsvSchema::from_json(nlohmann::json::parse(R"({"site":"s","features":["a","b"],"covariates":["c"]})"));
    CHECK(s.features.size() == 2);
    CHECK(s.targets.empty());
    CHECK_THROWS_AS(CsvSchema::from_json(nlohmann::json::parse(R"({"features":["a"]})")), SchemaError);
    CHECK_THROWS_AS(CsvSchema::from_json(nlohmann::json::parse(R"({"site":"s","features":[]})")), SchemaError);
}

TEST_CASE("split_by_sites is deterministic and partitions rows") {
    const Dataset ds = testing::random_dataset(10, 3, 2, 1, 5);
    const auto a = split_by_sites(ds, 3, 7);
    const auto b = split_by_sites(ds, 3, 7);
    CHECK(a.split.test_sites == b.split.test_sites);
    CHECK(a.test_rows == b.test_rows);
    CHECK_THROWS_AS(split_by_sites(ds, 0, 7), RangeError);
    CHECK_THROWS_AS(split_by_sites(ds, 10, 7), RangeError);

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const std::size_t m = 2 + rng.index(8);
        const Dataset d = testing::random_dataset(m, 1 + rng.index(4), 2, 1, seed);
        const auto s = split_by_sites(d, 1 + rng.index(m - 1), seed);
        CHECK(s.train.n_samples() + s.test.n_samples() == d.n_samples());
        std::set<std::string> train(s.split.train_sites.begin(), s.split.train_sites.end());
        for (const auto& t : s.split.test_sites) CHECK(train.count(t) == 0);
        CHECK(train.size() + s.split.test_sites.size() == m);
        std::set<std::size_t> rows(s.train_rows.begin(), s.train_rows.end());
        rows.insert(s.test_rows.begin(), s.test_rows.end());
        CHECK(rows.size() == d.n_samples());
        CHECK(std::is_sorted(s.train_rows.begin(), s.train_rows.end()));
        for (std::size_t r = 0; r < s.test_rows.size(); ++r)
            CHECK(s.test.features().row(r)[0] == d.features().row(s.test_rows[r])[0]);
    }
}

TEST_CASE("Dataset::create validates invariants") {
    CHECK_THROWS_AS(Dataset::create(Matrix(0, 1), Matrix(), {}), DimensionError);
    CHECK_THROWS_AS(Dataset::create(Matrix(2, 1), Matrix(), {"a"}), DimensionError);
    CHECK_THROWS_AS(Dataset::create(Matrix(1, 1), Matrix(), {""}), SchemaError);
    Matrix bad(1, 1);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Dataset::create(bad, Matrix(), {"a"}), NonFiniteError);
}
