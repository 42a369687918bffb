#pragma once

#include <stdexcept>
#include <string>

namespace qfm {

enum class ErrorKind {
  domain,      // parameter outside its legal range
  degenerate,  // input makes the requested quantity undefined
  numerical,   // linear algebra or non-finite arithmetic failure
  config,      // invalid run configuration
  data,        // malformed or mismatched data
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require_quantile(double tau, const char* where) {
  if (!(tau > 0.0 && tau < 1.0)) {
    fail(ErrorKind::domain,
         std::string(where) + ": quantile must lie in (0,1), got " +
             std::to_string(tau));
  }
}

}  // namespace qfm
