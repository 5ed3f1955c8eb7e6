#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccombat {

// Root of every error the library throws. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t row, std::string column, const std::string& what)
        : Error("parse error at row " + std::to_string(row) + ", column '" + column + "': " + what),
          row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// A documented precondition on a count or index was violated.
class RangeError : public Error {
public:
    using Error::Error;
};

class RankDeficientError : public Error {
public:
    using Error::Error;
};

class UnderdeterminedError : public Error {
public:
    using Error::Error;
};

class DegenerateFeatureError : public Error {
public:
    DegenerateFeatureError(std::size_t feature, const std::string& what)
        : Error(what), feature_(feature) {}
    std::size_t feature() const noexcept { return feature_; }

private:
    std::size_t feature_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(double residual, const std::string& what) : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public ProtocolError {
public:
    TimeoutError(std::string site, const std::string& what)
        : ProtocolError(what), site_(std::move(site)) {}
    const std::string& site() const noexcept { return site_; }

private:
    std::string site_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ccombat
