#pragma once

#include <stdexcept>
#include <string>

namespace qpe {

// Values double as CLI exit codes.
enum class ErrorCode : int {
    precondition = 1,
    config = 2,
    diophantine = 3,
    melnikov = 4,
    nonconvergence = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorCode::precondition, what);
}

}  // namespace qpe
