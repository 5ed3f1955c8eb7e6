#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccombat/matrix.hpp"

namespace ccombat {

// Column roles for CSV ingestion. Roles are always explicit; nothing is
// inferred from column names.
struct CsvSchema {
    std::string site;
    std::vector<std::string> features;
    std::vector<std::string> covariates;
    std::vector<std::string> targets;

    static CsvSchema from_json(const nlohmann::json& j);
    static CsvSchema load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

// Multi-site tabular data: N samples, G features, P covariates, one site id
// per row. Immutable once constructed; create() validates every invariant.
class Dataset {
public:
    static Dataset create(Matrix features, Matrix covariates, std::vector<std::string> site_of,
                          std::vector<std::string> feature_names = {},
                          std::vector<std::string> covariate_names = {}, Matrix targets = {},
                          std::vector<std::string> target_names = {});

    std::size_t n_samples() const noexcept { return features_.rows(); }
    std::size_t n_features() const noexcept { return features_.cols(); }
    std::size_t n_covariates() const noexcept { return covariates_.cols(); }
    std::size_t n_sites() const noexcept { return sites_.size(); }

    const Matrix& features() const noexcept { return features_; }
    const Matrix& covariates() const noexcept { return covariates_; }
    const Matrix& targets() const noexcept { return targets_; }

    // Site id of each row.
    const std::vector<std::string>& site_of() const noexcept { return site_of_; }
    // Distinct site ids in first-appearance order; position = dense site index.
    const std::vector<std::string>& sites() const noexcept { return sites_; }
    // Dense site index of each row.
    const std::vector<std::size_t>& site_index_of() const noexcept { return site_index_of_; }
    // Rows belonging to each dense site index, in file order.
    const std::vector<std::vector<std::size_t>>& site_rows() const noexcept { return site_rows_; }
    std::vector<std::size_t> site_sizes() const;
    // Dense index of a site id, or n_sites() if absent.
    std::size_t find_site(const std::string& id) const;

    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
    const std::vector<std::string>& target_names() const noexcept { return target_names_; }

    // Rows in the given order; site indices are reassigned by first appearance.
    Dataset select_rows(std::span<const std::size_t> rows) const;
    Dataset select_site(const std::string& id) const;
    // Same rows and metadata with the feature block replaced.
    Dataset with_features(Matrix features) const;

private:
    Dataset() = default;

    Matrix features_;
    Matrix covariates_;
    Matrix targets_;
    std::vector<std::string> site_of_;
    std::vector<std::string> sites_;
    std::vector<std::size_t> site_index_of_;
    std::vector<std::vector<std::size_t>> site_rows_;
    std::vector<std::string> feature_names_;
    std::vector<std::string> covariate_names_;
    std::vector<std::string> target_names_;
};

struct SiteSplit {
    std::vector<std::string> train_sites;
    std::vector<std::string> test_sites;
};

struct SplitResult {
    Dataset train;
    Dataset test;
    SiteSplit split;
    std::vector<std::size_t> train_rows;  // source row of each train row
    std::vector<std::size_t> test_rows;
};

// Holds out n_test_sites whole sites, chosen by a seeded shuffle.
SplitResult split_by_sites(const Dataset& ds, std::size_t n_test_sites, std::uint64_t seed);

// Minimal RFC-4180 reader/writer. Numbers are parsed and printed with
// std::from_chars / std::to_chars, so the format is locale independent and
// doubles round-trip exactly.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv_table(const std::filesystem::path& path);
CsvTable parse_csv_table(const std::string& text);
void write_csv_table(const std::filesystem::path& path, const CsvTable& table);
std::string format_double(double v);

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
Dataset dataset_from_table(const CsvTable& table, const CsvSchema& schema);
void save_csv(const std::filesystem::path& path, const Dataset& ds);
CsvSchema schema_of(const Dataset& ds, const std::string& site_column = "site");

}  // namespace ccombat
