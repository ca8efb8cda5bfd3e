#pragma once

#include <stdexcept>
#include <string>

namespace gmil {

// Exit-code categories used by the CLI.
enum class ErrorKind {
    Usage = 1,     // bad flags, bad config keys
    Data = 2,      // malformed files, dimension mismatches in inputs
    Internal = 3,  // invariant violations
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg)
        : std::runtime_error(std::move(msg)), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(std::string msg) : Error(ErrorKind::Usage, std::move(msg)) {}
};
struct DataError : Error {
    explicit DataError(std::string msg) : Error(ErrorKind::Data, std::move(msg)) {}
};
struct InternalError : Error {
    explicit InternalError(std::string msg) : Error(ErrorKind::Internal, std::move(msg)) {}
};

}  // namespace gmil
