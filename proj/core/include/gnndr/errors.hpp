#pragma once

#include <stdexcept>
#include <string>

namespace gnndr {

// Failure categories surfaced to callers; the CLI records code_name() per grid
// point so a degenerate point never aborts a whole run.
enum class Errc {
  invalid_argument,
  invalid_state,
  capacity_exceeded,
  degenerate_posterior,
  unstable_weights,
  numerical_singularity,
  invalid_function,
  not_implemented,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const { return code_; }

  const char* code_name() const {
    switch (code_) {
      case Errc::invalid_argument: return "invalid-argument";
      case Errc::invalid_state: return "invalid-state";
      case Errc::capacity_exceeded: return "capacity-exceeded";
      case Errc::degenerate_posterior: return "degenerate-posterior";
      case Errc::unstable_weights: return "unstable-weights";
      case Errc::numerical_singularity: return "numerical-singularity";
      case Errc::invalid_function: return "invalid-function";
      case Errc::not_implemented: return "not-implemented";
    }
    return "unknown";
  }

 private:
  Errc code_;
};

}  // namespace gnndr
