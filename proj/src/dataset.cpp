#include "ccombat/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "ccombat/error.hpp"
#include "ccombat/rng.hpp"

namespace ccombat {

CsvSchema CsvSchema::from_json(const nlohmann::json& j) {
    CsvSchema s;
    try {
        s.site = j.at("site").get<std::string>();
        s.features = j.at("features").get<std::vector<std::string>>();
        if (j.contains("covariates")) s.covariates = j.at("covariates").get<std::vector<std::string>>();
        if (j.contains("targets")) s.targets = j.at("targets").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed schema document: ") + e.what());
    }
    if (s.site.empty()) throw SchemaError("schema names no site column");
    if (s.features.empty()) throw SchemaError("schema names no feature columns");
    return s;
}

CsvSchema CsvSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("schema file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::json CsvSchema::to_json() const {
    return {{"site", site}, {"features", features}, {"covariates", covariates}, {"targets", targets}};
}

Dataset Dataset::create(Matrix features, Matrix covariates, std::vector<std::string> site_of,
                        std::vector<std::string> feature_names,
                        std::vector<std::string> covariate_names, Matrix targets,
                        std::vector<std::string> target_names) {
    const std::size_t n = features.rows();
    if (n == 0) throw DimensionError("dataset needs at least one sample");
    if (features.cols() == 0) throw DimensionError("dataset needs at least one feature");
    if (covariates.rows() != n) {
        if (covariates.rows() == 0 && covariates.cols() == 0)
            covariates = Matrix(n, 0);
        else
            throw DimensionError("covariate rows do not match feature rows");
    }
    if (site_of.size() != n) throw DimensionError("site labels do not match feature rows");
    if (!targets.empty() && targets.rows() != n)
        throw DimensionError("target rows do not match feature rows");
    if (targets.empty()) targets = Matrix(n, 0);

    for (double v : features.data())
        if (!std::isfinite(v)) throw NonFiniteError("non-finite feature value");
    for (double v : covariates.data())
        if (!std::isfinite(v)) throw NonFiniteError("non-finite covariate value");

    if (feature_names.empty())
        for (std::size_t g = 0; g < features.cols(); ++g) feature_names.push_back("f" + std::to_string(g + 1));
    if (covariate_names.empty())
        for (std::size_t p = 0; p < covariates.cols(); ++p)
            covariate_names.push_back("x" + std::to_string(p + 1));
    if (target_names.empty())
        for (std::size_t t = 0; t < targets.cols(); ++t) target_names.push_back("t" + std::to_string(t + 1));
    if (feature_names.size() != features.cols() || covariate_names.size() != covariates.cols() ||
        target_names.size() != targets.cols())
        throw DimensionError("column names do not match column counts");

    Dataset ds;
    std::unordered_map<std::string, std::size_t> index;
    ds.site_index_of_.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (site_of[r].empty()) throw SchemaError("row " + std::to_string(r + 1) + " has an empty site id");
        auto [it, inserted] = index.emplace(site_of[r], ds.sites_.size());
        if (inserted) {
            ds.sites_.push_back(site_of[r]);
            ds.site_rows_.emplace_back();
        }
        ds.site_index_of_[r] = it->second;
        ds.site_rows_[it->second].push_back(r);
    }
    ds.features_ = std::move(features);
    ds.covariates_ = std::move(covariates);
    ds.targets_ = std::move(targets);
    ds.site_of_ = std::move(site_of);
    ds.feature_names_ = std::move(feature_names);
    ds.covariate_names_ = std::move(covariate_names);
    ds.target_names_ = std::move(target_names);
    return ds;
}

std::vector<std::size_t> Dataset::site_sizes() const {
    std::vector<std::size_t> out;
    out.reserve(site_rows_.size());
    for (const auto& rows : site_rows_) out.push_back(rows.size());
    return out;
}

std::size_t Dataset::find_site(const std::string& id) const {
    auto it = std::find(sites_.begin(), sites_.end(), id);
    return static_cast<std::size_t>(it - sites_.begin());
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::string> sites;
    sites.reserve(rows.size());
    for (std::size_t r : rows) sites.push_back(site_of_[r]);
    return create(features_.select_rows(rows), covariates_.select_rows(rows), std::move(sites),
                  feature_names_, covariate_names_, targets_.select_rows(rows), target_names_);
}

Dataset Dataset::select_site(const std::string& id) const {
    std::size_t k = find_site(id);
    if (k == sites_.size()) throw RangeError("unknown site '" + id + "'");
    return select_rows(site_rows_[k]);
}

Dataset Dataset::with_features(Matrix features) const {
    if (features.rows() != n_samples()) throw DimensionError("replacement features have wrong row count");
    std::vector<std::string> names = feature_names_;
    if (features.cols() != n_features()) names.clear();
    return create(std::move(features), covariates_, site_of_, std::move(names), covariate_names_,
                  targets_, target_names_);
}

SplitResult split_by_sites(const Dataset& ds, std::size_t n_test_sites, std::uint64_t seed) {
    const std::size_t m = ds.n_sites();
    if (n_test_sites < 1 || n_test_sites >= m)
        throw RangeError("n_test_sites must be in [1, " + std::to_string(m) + "), got " +
                         std::to_string(n_test_sites));
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<bool> is_test(m, false);
    for (std::size_t i = 0; i < n_test_sites; ++i) is_test[order[i]] = true;

    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t r = 0; r < ds.n_samples(); ++r)
        (is_test[ds.site_index_of()[r]] ? test_rows : train_rows).push_back(r);

    SiteSplit split;
    for (std::size_t k = 0; k < m; ++k)
        (is_test[k] ? split.test_sites : split.train_sites).push_back(ds.sites()[k]);
    Dataset train = ds.select_rows(train_rows);
    Dataset test = ds.select_rows(test_rows);
    return {std::move(train), std::move(test), std::move(split), std::move(train_rows), std::move(test_rows)};
}

// ---------------------------------------------------------------------------
// CSV

CsvTable parse_csv_table(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            // CRLF line endings
        } else if (c == '\n') {
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
        }
        ++i;
    }
    if (in_quotes) throw ParseError(records.size() + 1, "", "unterminated quoted field");
    if (!field.empty() || !record.empty()) end_record();

    if (records.empty()) throw SchemaError("CSV input has no header row");
    CsvTable table;
    table.header = std::move(records.front());
    // Strip a UTF-8 byte-order mark from the first header cell.
    if (!table.header.empty() && table.header[0].rfind("\xEF\xBB\xBF", 0) == 0)
        table.header[0].erase(0, 3);
    table.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        if (table.rows[r].size() != table.header.size())
            throw ParseError(r + 1, "", "expected " + std::to_string(table.header.size()) + " fields, found " +
                                            std::to_string(table.rows[r].size()));
    return table;
}

CsvTable read_csv_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv_table(ss.str());
}

namespace {

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    if (first == last) throw ParseError(row, column, "missing value");
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc::result_out_of_range) throw NonFiniteError("value out of range at row " + std::to_string(row) + ", column '" + column + "'");
    if (ec != std::errc() || ptr != last) throw ParseError(row, column, "not a number: '" + cell + "'");
    if (!std::isfinite(v))
        throw NonFiniteError("non-finite value at row " + std::to_string(row) + ", column '" + column + "'");
    return v;
}

}  // namespace

void write_csv_table(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    auto write_record = [&](const std::vector<std::string>& rec) {
        for (std::size_t i = 0; i < rec.size(); ++i) {
            if (i) out << ',';
            out << quote_if_needed(rec[i]);
        }
        out << '\n';
    };
    write_record(table.header);
    for (const auto& r : table.rows) write_record(r);
    if (!out) throw IoError("write failed for " + path.string());
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Dataset dataset_from_table(const CsvTable& table, const CsvSchema& schema) {
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < table.header.size(); ++i) col.emplace(table.header[i], i);
    auto lookup = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw SchemaError("missing column '" + name + "'");
        return it->second;
    };
    if (schema.features.empty()) throw SchemaError("schema names no feature columns");
    const std::size_t site_col = lookup(schema.site);
    std::vector<std::size_t> fcols, ccols, tcols;
    for (const auto& n : schema.features) fcols.push_back(lookup(n));
    for (const auto& n : schema.covariates) ccols.push_back(lookup(n));
    for (const auto& n : schema.targets) tcols.push_back(lookup(n));

    const std::size_t n = table.rows.size();
    if (n == 0) throw SchemaError("CSV has a header but no data rows");
    Matrix feats(n, fcols.size()), covs(n, ccols.size()), targets(n, tcols.size());
    std::vector<std::string> sites(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& rec = table.rows[r];
        sites[r] = rec[site_col];
        if (sites[r].empty()) throw ParseError(r + 1, schema.site, "missing site id");
        for (std::size_t k = 0; k < fcols.size(); ++k) feats(r, k) = parse_cell(rec[fcols[k]], r + 1, schema.features[k]);
        for (std::size_t k = 0; k < ccols.size(); ++k) covs(r, k) = parse_cell(rec[ccols[k]], r + 1, schema.covariates[k]);
        for (std::size_t k = 0; k < tcols.size(); ++k) targets(r, k) = parse_cell(rec[tcols[k]], r + 1, schema.targets[k]);
    }
    return Dataset::create(std::move(feats), std::move(covs), std::move(sites), schema.features,
                           schema.covariates, std::move(targets), schema.targets);
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    return dataset_from_table(read_csv_table(path), schema);
}

CsvSchema schema_of(const Dataset& ds, const std::string& site_column) {
    return {site_column, ds.feature_names(), ds.covariate_names(), ds.target_names()};
}

void save_csv(const std::filesystem::path& path, const Dataset& ds) {
    CsvTable t;
    CsvSchema s = schema_of(ds);
    t.header.push_back(s.site);
    t.header.insert(t.header.end(), s.features.begin(), s.features.end());
    t.header.insert(t.header.end(), s.covariates.begin(), s.covariates.end());
    t.header.insert(t.header.end(), s.targets.begin(), s.targets.end());
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
        std::vector<std::string> rec;
        rec.reserve(t.header.size());
        rec.push_back(ds.site_of()[r]);
        for (double v : ds.features().row(r)) rec.push_back(format_double(v));
        for (double v : ds.covariates().row(r)) rec.push_back(format_double(v));
        for (double v : ds.targets().row(r)) rec.push_back(format_double(v));
        t.rows.push_back(std::move(rec));
    }
    write_csv_table(path, t);
}

}  // namespace ccombat
