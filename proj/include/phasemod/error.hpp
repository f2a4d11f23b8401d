#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phasemod {

enum class Errc {
  integration_diverged,
  no_crossing,
  not_oscillating,
  no_convergence,
  adjoint_not_converged,
  normalization_failed,
  out_of_range,
  dimension_mismatch,
  configuration,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::integration_diverged: return "integration-diverged";
    case Errc::no_crossing: return "no-crossing";
    case Errc::not_oscillating: return "not-oscillating";
    case Errc::no_convergence: return "no-convergence";
    case Errc::adjoint_not_converged: return "adjoint-not-converged";
    case Errc::normalization_failed: return "normalization-failed";
    case Errc::out_of_range: return "out-of-range";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::configuration: return "configuration";
  }
  return "unknown";
}

/// Error raised by every module. Carries a machine-readable code and the
/// name of the module that raised it so the CLI can report the failing stage.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string module, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + " [" + module + "]: " + what),
        code_(code),
        module_(std::move(module)) {}

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  Errc code_;
  std::string module_;
};

}  // namespace phasemod
