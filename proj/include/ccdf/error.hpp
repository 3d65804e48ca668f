#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccdf {

// Machine-readable error categories. The CLI maps each one to a stable exit
// code and prints the name in its single-line error report.
enum class ErrorCode {
  format,            // malformed input text
  index,             // orbital or label index out of range
  conflict,          // inconsistent duplicate data
  empty_space,       // determinant sector with no members
  non_nilpotent,     // exponential series did not terminate
  shape,             // matrix structure precondition violated
  convergence,       // iterative solver did not converge
  quasi_degenerate,  // vanishing amplitude denominator
  linear_solve,      // singular or ill-conditioned linear system
  contamination,     // internal amplitude found where only external allowed
  not_ses,           // algebra is not a sub-system embedding sub-algebra
  usage,             // bad configuration or argument combination
  io,                // file system failure
};

std::string_view to_string(ErrorCode code);
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ccdf
