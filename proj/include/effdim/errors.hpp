#ifndef EFFDIM_ERRORS_HPP
#define EFFDIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace effdim {

enum class ErrorCode {
    invalid_argument = 1,
    dimension_mismatch = 2,
    unsupported_model = 3,
    integration_failure = 4,
    numeric_failure = 5,
    not_converged = 6,
    io_error = 7,
    config_error = 8,
};

/// Exception carrying a stable error code so the C API can map failures to
/// integer statuses without parsing messages.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

} // namespace effdim

#endif
