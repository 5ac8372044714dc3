#pragma once

#include <stdexcept>
#include <string>

namespace pgat {

// All recoverable failures are thrown as a CategorizedError subclass so the
// CLI can report "<category>: <message>" and exit nonzero.
class CategorizedError : public std::runtime_error {
public:
    CategorizedError(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct DimensionError : CategorizedError {
    explicit DimensionError(const std::string& msg) : CategorizedError("dimension error", msg) {}
};

struct DegenerateInputError : CategorizedError {
    explicit DegenerateInputError(const std::string& msg)
        : CategorizedError("degenerate input", msg) {}
};

struct NumericError : CategorizedError {
    explicit NumericError(const std::string& msg) : CategorizedError("numeric error", msg) {}
};

struct InputError : CategorizedError {
    explicit InputError(const std::string& msg) : CategorizedError("input error", msg) {}
};

struct LookupError : CategorizedError {
    explicit LookupError(const std::string& msg) : CategorizedError("lookup error", msg) {}
};

struct DatasetError : CategorizedError {
    explicit DatasetError(const std::string& msg) : CategorizedError("dataset error", msg) {}
};

struct SamplingError : CategorizedError {
    explicit SamplingError(const std::string& msg) : CategorizedError("sampling error", msg) {}
};

struct TrainingError : CategorizedError {
    explicit TrainingError(const std::string& msg) : CategorizedError("training error", msg) {}
};

struct IoError : CategorizedError {
    explicit IoError(const std::string& msg) : CategorizedError("i/o error", msg) {}
};

struct ParseError : CategorizedError {
    explicit ParseError(const std::string& msg) : CategorizedError("parse error", msg) {}
};

struct ConfigError : CategorizedError {
    explicit ConfigError(const std::string& msg) : CategorizedError("config error", msg) {}
};

} // namespace pgat
