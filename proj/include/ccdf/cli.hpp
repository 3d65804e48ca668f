#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccdf/greens_function.hpp"
#include "ccdf/hamiltonian_io.hpp"

namespace ccdf::cli {

enum class Workflow { ccsd, verify_ses, downfold, flow, gf };

Workflow parse_workflow(const std::string& name);
std::string to_string(Workflow w);

struct RunConfig {
  std::string input;  // FCIDUMP path
  std::string model;  // "pairing:n,spacing,g[,nelec]"
  Workflow workflow = Workflow::ccsd;
  std::vector<int> active_occ;   // spatial indices; empty selects every occupied orbital
  std::vector<int> active_virt;  // spatial indices
  std::vector<std::string> variants{"A1", "A3", "A4", "A6", "A7"};
  FrequencyGrid grid{-2.0, 2.0, 400, 0.01};
  double tol = 1e-10;
  std::filesystem::path out = ".";
  std::vector<std::string> warnings;  // produced while merging flags and config file
};

/// Parses flags and an optional `--config` key=value file. Values from the
/// file win over flags; each override is recorded in `warnings`. Returns
/// nullopt after printing help.
std::optional<RunConfig> parse_arguments(int argc, const char* const* argv, std::ostream& out);

/// Checks that the parameter set is complete for the chosen workflow.
void validate(const RunConfig& config);

/// Loaded Hamiltonian with its reference partition.
struct System {
  SpinIntegralSet integrals{0};
  int n_spatial = 0;
  int n_electrons = 0;
  int ms2 = 0;
  ReferencePartition partition;
  std::string source;
};

/// "pairing:n,spacing,g[,nelec]"; nelec defaults to n (half filling).
System load_model(const std::string& spec);
System load_fcidump(const std::filesystem::path& path);
System load_system(const RunConfig& config);

/// Runs one workflow and writes summary.json plus the workflow's artifacts
/// into config.out. Errors print one "ERROR <CODE>: message" line to `err`,
/// remove partially written artifacts and return the code's exit status.
int run(const RunConfig& config, std::ostream& log, std::ostream& err);

/// Full command-line entry point.
int main(int argc, const char* const* argv);

}  // namespace ccdf::cli
