#pragma once

#include <stdexcept>
#include <string>

namespace pvdb {

// Every error raised by the library names the module it came from so the CLI
// can report provenance.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

class IngestError : public Error {
public:
    IngestError(std::size_t line, const std::string& what)
        : Error("data-core", "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double gradient_norm)
        : Error("demand-model", what), gradient_norm_(gradient_norm) {}

    double gradient_norm() const noexcept { return gradient_norm_; }

private:
    double gradient_norm_;
};

// No grid price exceeds unit cost.
class NoPositiveMarginError : public Error {
public:
    explicit NoPositiveMarginError(const std::string& what) : Error("price-optimizer", what) {}
};

}  // namespace pvdb
