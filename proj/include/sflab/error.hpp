#pragma once

#include <stdexcept>
#include <string>

namespace sflab {

enum class ErrorKind {
  domain,      // argument outside the mathematical domain
  capacity,    // enumeration or integer range exceeds a configured cap
  conjugate,   // coincident or conjugate endpoints
  cutoff,      // evaluation beyond a series cutoff
  regime,      // evaluator used outside its convergent regime
  resolution,  // quadrature rule too coarse for the requested band
  non_finite,  // a sampled value was NaN or infinite
  config,      // malformed run configuration
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace sflab
