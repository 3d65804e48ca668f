#include "ccdf/error.hpp"

namespace ccdf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::format: return "FORMAT";
    case ErrorCode::index: return "INDEX";
    case ErrorCode::conflict: return "CONFLICT";
    case ErrorCode::empty_space: return "EMPTY_SPACE";
    case ErrorCode::non_nilpotent: return "NON_NILPOTENT";
    case ErrorCode::shape: return "SHAPE";
    case ErrorCode::convergence: return "CONVERGENCE";
    case ErrorCode::quasi_degenerate: return "QUASI_DEGENERATE";
    case ErrorCode::linear_solve: return "LINEAR_SOLVE";
    case ErrorCode::contamination: return "CONTAMINATION";
    case ErrorCode::not_ses: return "NOT_SES";
    case ErrorCode::usage: return "USAGE";
    case ErrorCode::io: return "IO";
  }
  return "UNKNOWN";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::usage: return 2;
    case ErrorCode::format: return 3;
    case ErrorCode::index: return 4;
    case ErrorCode::conflict: return 5;
    case ErrorCode::io: return 6;
    case ErrorCode::convergence: return 7;
    case ErrorCode::quasi_degenerate: return 8;
    case ErrorCode::linear_solve: return 9;
    case ErrorCode::non_nilpotent: return 10;
    case ErrorCode::shape: return 11;
    case ErrorCode::empty_space: return 12;
    case ErrorCode::contamination: return 13;
    case ErrorCode::not_ses: return 14;
  }
  return 1;
}

}  // namespace ccdf
