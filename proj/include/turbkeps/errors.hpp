#pragma once

#include <stdexcept>
#include <string>

namespace turbkeps {

/// Classification of failures raised by the library. The CLI maps these
/// onto exit statuses.
enum class ErrorKind {
    Domain,      ///< argument outside the mathematical domain of an operation
    Usage,       ///< caller contract violated (mismatched sizes, wrong kind)
    Capacity,    ///< requested more modes than the grid resolves
    Setup,       ///< basis construction failed
    Data,        ///< non-finite or malformed numerical data
    Config,      ///< configuration text rejected
    Io,          ///< filesystem failure
    SolverAbort  ///< time integration aborted
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace turbkeps
