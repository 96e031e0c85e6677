#ifndef HOPSIM_ERRORS_HPP
#define HOPSIM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hopsim {

/// Base class of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The off-diagonal coupling vanished: beta^2 + gamma^2 == 0 at the queried point.
struct DegenerateGap : Error {
    using Error::Error;
};

struct UnknownModel : Error {
    explicit UnknownModel(const std::string& name)
        : Error("unknown model '" + name + "'"), model(name) {}
    std::string model;
};

/// Transversality violated at a gap minimum (|p| or the Landau-Zener determinant vanishes).
struct ZeroMomentumAtCrossing : Error {
    using Error::Error;
};

struct BranchOverflow : Error {
    using Error::Error;
};

struct StepTooLarge : Error {
    using Error::Error;
};

struct DomainTooSmall : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(std::size_t line_no, const std::string& what)
        : Error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
    std::size_t line;
};

struct ValidationError : Error {
    ValidationError(const std::string& field_name, const std::string& what)
        : Error("invalid " + field_name + ": " + what), field(field_name) {}
    std::string field;
};

}  // namespace hopsim

#endif
