#pragma once

#include <stdexcept>
#include <string>

namespace qrsim {

// All library failures derive from Error so callers can isolate a failing
// scenario without catching unrelated exceptions.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& w) : Error("parameter", w) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& w) : Error("parse", w) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error("validation", w) {}
};

struct UnreachableError : Error {
    explicit UnreachableError(const std::string& w) : Error("unreachable", w) {}
};

struct UnsupportedChamberError : Error {
    explicit UnsupportedChamberError(const std::string& w) : Error("unsupported_chamber", w) {}
};

struct NoQrsError : Error {
    explicit NoQrsError(const std::string& w) : Error("no_qrs", w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error("io", w) {}
};

} // namespace qrsim
