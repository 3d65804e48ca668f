#include "ccdf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "ccdf/cc_solver.hpp"
#include "ccdf/ducc_downfolding.hpp"
#include "ccdf/error.hpp"
#include "ccdf/excitation.hpp"
#include "ccdf/flow_driver.hpp"
#include "ccdf/fock_space.hpp"
#include "ccdf/ses_downfolding.hpp"

namespace ccdf::cli {

using json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::usage, "invalid integer '" + s + "' for " + what);
  }
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::usage, "invalid number '" + s + "' for " + what);
  }
}

std::vector<int> to_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& item : split(s, ',')) out.push_back(to_int(item, what));
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + v[k];
  return s;
}

// Energies are reported with 10 decimal places.
double energy(double x) { return std::round(x * 1e10) / 1e10; }

std::string fixed10(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(10) << x;
  return os.str();
}

std::string sci(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << x;
  return os.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Key-value settings recognized both as flags and in the config file.
constexpr const char* kKeys[] = {"input",     "model",     "workflow",     "active-occ", "active-virt", "variant",
                                 "omega-min", "omega-max", "omega-points", "omega-eta",  "tol",         "out"};

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "input") {
    c.input = value;
  } else if (key == "model") {
    c.model = value;
  } else if (key == "workflow") {
    c.workflow = parse_workflow(value);
  } else if (key == "active-occ") {
    c.active_occ = to_int_list(value, key);
  } else if (key == "active-virt") {
    c.active_virt = to_int_list(value, key);
  } else if (key == "variant") {
    c.variants = split(value, ',');
    for (const auto& v : c.variants) parse_variant(v);
  } else if (key == "omega-min") {
    c.grid.omega_min = to_double(value, key);
  } else if (key == "omega-max") {
    c.grid.omega_max = to_double(value, key);
  } else if (key == "omega-points") {
    c.grid.n_points = to_int(value, key);
  } else if (key == "omega-eta") {
    c.grid.eta = to_double(value, key);
  } else if (key == "tol") {
    c.tol = to_double(value, key);
  } else if (key == "out") {
    c.out = value;
  } else {
    throw Error(ErrorCode::usage, "unknown configuration key '" + key + "'");
  }
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::usage, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

// ------------------------------------------------------------- system

SpacePtr sector_space(const System& sys) {
  return enumerate_space(sys.integrals.n_spin(), sys.n_electrons, sys.ms2);
}

SesAlgebra active_algebra(const RunConfig& c, const System& sys) {
  const Determinant& ref = sys.partition.reference;
  std::vector<int> occ = c.active_occ;
  if (occ.empty())
    for (int i = 0; i < sys.n_spatial; ++i)
      if (ref.occupied(spin_orbital(i, 0)) || ref.occupied(spin_orbital(i, 1))) occ.push_back(i);
  for (int i : occ)
    if (i < 0 || i >= sys.n_spatial) throw Error(ErrorCode::index, "active occupied orbital " + std::to_string(i) + " out of range");
  for (int a : c.active_virt)
    if (a < 0 || a >= sys.n_spatial) throw Error(ErrorCode::index, "active virtual orbital " + std::to_string(a) + " out of range");
  return make_spatial_algebra(ref, occ, c.active_virt);
}

std::vector<int> neighbour_sectors(const System& sys) {
  std::vector<int> out;
  for (int n = sys.n_electrons - 1; n <= sys.n_electrons + 1; ++n)
    if (n >= 0 && n <= sys.integrals.n_spin()) out.push_back(n);
  return out;
}

CcResult run_ccsd(const OperatorMatrix& h, const System& sys, double tol) {
  CcOptions opt;
  opt.tol = tol;
  return solve_cc(h, sys.partition, manifold(sys.partition.reference, sys.integrals.n_spin(), 2), opt);
}

json system_json(const System& sys) {
  json j;
  j["source"] = sys.source;
  j["n_spatial"] = sys.n_spatial;
  j["n_electrons"] = sys.n_electrons;
  j["ms2"] = sys.ms2;
  j["e_core"] = energy(sys.integrals.e_core);
  j["reference"] = sys.partition.reference.to_string(sys.integrals.n_spin());
  j["e_reference"] = energy(sys.partition.e_ref);
  return j;
}

json algebra_json(const SesAlgebra& h) {
  json j;
  j["descriptor"] = h.to_string();
  j["active_spin_orbitals"] = h.active_orbitals();
  return j;
}

struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

// ---------------------------------------------------------- workflows

json workflow_ccsd(const RunConfig& c, const System& sys, std::ostream& log, Artifacts&) {
  const OperatorMatrix h = build_hamiltonian_matrix(sys.integrals, sector_space(sys));
  const CcResult cc = run_ccsd(h, sys, c.tol);
  const Eigenpair fci = ground_state(h);
  log << "E(reference) = " << fixed10(sys.partition.e_ref) << '\n';
  log << "E(CCSD)      = " << fixed10(cc.energy) << "  (" << cc.iterations << " iterations)\n";
  log << "E(FCI)       = " << fixed10(fci.energy) << '\n';
  json r;
  r["e_ccsd"] = energy(cc.energy);
  r["e_correlation"] = energy(cc.energy - sys.partition.e_ref);
  r["e_fci"] = energy(fci.energy);
  r["ccsd_minus_fci"] = energy(cc.energy - fci.energy);
  r["iterations"] = cc.iterations;
  r["residual_norm"] = cc.residual_norm;
  r["n_amplitudes"] = cc.t.size();
  r["sector_dimension"] = h.rows();
  return r;
}

json workflow_verify_ses(const RunConfig& c, const System& sys, std::ostream& log, Artifacts& art) {
  const OperatorMatrix h = build_hamiltonian_matrix(sys.integrals, sector_space(sys));
  const CcResult cc = run_ccsd(h, sys, c.tol);
  std::vector<SesAlgebra> algebras;
  if (!c.active_virt.empty() || !c.active_occ.empty()) {
    if (c.active_virt.empty()) throw Error(ErrorCode::usage, "--active-virt required with --active-occ");
    algebras.push_back(active_algebra(c, sys));
  } else {
    algebras = enumerate_ses_ccsd(sys.partition.reference, sys.n_spatial);
  }
  const auto labels = manifold(sys.partition.reference, sys.integrals.n_spin(), 2);
  std::ostringstream csv;
  csv << "algebra,active_dimension,residual,eigenvalue,delta_e\n";
  json rows = json::array();
  double worst = 0.0;
  for (const auto& alg : algebras) {
    if (!is_ses(alg, labels, sys.partition.reference, sys.integrals.n_spin()))
      throw Error(ErrorCode::not_ses, alg.to_string() + " is not an SES of the CCSD manifold");
    const SesReport rep = verify_algebra(h, cc.t, cc.energy, alg);
    worst = std::max(worst, rep.residual);
    csv << '"' << alg.to_string() << "\"," << rep.active_dimension << ',' << sci(rep.residual) << ','
        << fixed10(rep.eigenvalue) << ',' << sci(rep.delta_e) << '\n';
    log << std::left << std::setw(28) << alg.to_string() << " dim " << std::setw(4) << rep.active_dimension
        << " residual " << sci(rep.residual) << "  E " << fixed10(rep.eigenvalue) << '\n';
    json row;
    row["algebra"] = alg.to_string();
    row["active_dimension"] = rep.active_dimension;
    row["residual"] = rep.residual;
    row["eigenvalue"] = energy(rep.eigenvalue);
    row["delta_e"] = rep.delta_e;
    rows.push_back(row);
  }
  art.add("ses_table.csv", csv.str());
  json r;
  r["e_ccsd"] = energy(cc.energy);
  r["n_algebras"] = algebras.size();
  r["expected_count"] = algebras.size() > 1 || c.active_virt.empty()
                            ? json(ses_ccsd_count(sys.n_electrons / 2, sys.n_spatial - sys.n_electrons / 2))
                            : json(nullptr);
  r["max_residual"] = worst;
  r["all_below_1e-8"] = worst < 1e-8;
  r["rows"] = rows;
  return r;
}

json workflow_downfold(const RunConfig& c, const System& sys, std::ostream& log, Artifacts& art) {
  const SesAlgebra alg = active_algebra(c, sys);
  const OperatorMatrix h = build_hamiltonian_matrix(sys.integrals, sector_space(sys));
  const CcResult cc = run_ccsd(h, sys, c.tol);
  const double e_fci = ground_state(h).energy;
  const ClusterOperator t_ext = partition_cluster(cc.t, alg).second;
  const auto sectors = neighbour_sectors(sys);

  const EffectiveHamiltonian exact = ducc_family(sys.integrals, sys.partition, t_ext, alg, std::nullopt, sectors);
  const double e_exact = diagonalize_active(exact).ground_energy();
  log << "active space " << alg.to_string() << ", dimension " << exact.matrix.rows() << '\n';
  log << "E(FCI)        = " << fixed10(e_fci) << '\n';
  log << "E(CCSD)       = " << fixed10(cc.energy) << '\n';
  log << "E(exact DUCC) = " << fixed10(e_exact) << '\n';

  std::ostringstream csv;
  csv << "variant,energy,error_vs_exact,error_vs_fci,recomposition_error,asymmetry\n";
  csv << "exact," << fixed10(e_exact) << ',' << sci(0.0) << ',' << sci(e_exact - e_fci) << ",,"
      << sci(exact.asymmetry_before_hermitization) << '\n';
  json variants = json::array();
  std::string primary = c.variants.back();
  for (const auto& v : c.variants)
    if (canonical(parse_variant(v)) == DuccVariant::a7) primary = v;
  std::string coef_text;
  for (const auto& name : c.variants) {
    const DuccVariant v = parse_variant(name);
    const EffectiveHamiltonian heff = ducc_family(sys.integrals, sys.partition, t_ext, alg, v, sectors);
    const double e = diagonalize_active(heff).ground_energy();
    const DowncoefExport coef = extract_many_body(heff);
    log << std::left << std::setw(4) << to_string(v) << " E = " << fixed10(e) << "  |E - exact| = " << sci(std::abs(e - e_exact))
        << "  recomposition error " << sci(coef.recomposition_error) << '\n';
    csv << to_string(v) << ',' << fixed10(e) << ',' << sci(e - e_exact) << ',' << sci(e - e_fci) << ','
        << sci(coef.recomposition_error) << ',' << sci(heff.asymmetry_before_hermitization) << '\n';
    json row;
    row["variant"] = to_string(v);
    if (!heff.note.empty()) row["note"] = heff.note;
    row["energy"] = energy(e);
    row["error_vs_exact"] = energy(e - e_exact);
    row["error_vs_fci"] = energy(e - e_fci);
    row["recomposition_error"] = coef.recomposition_error;
    row["rank_deficient"] = coef.rank_deficient;
    row["asymmetry_before_hermitization"] = heff.asymmetry_before_hermitization;
    variants.push_back(row);
    if (name == primary) {
      std::ostringstream os;
      write_downcoef(os, coef);
      coef_text = os.str();
    }
  }
  art.add("downfold.csv", csv.str());
  art.add("downfolded.coef", coef_text);
  json r;
  r["active_space"] = algebra_json(alg);
  r["active_dimension"] = exact.matrix.rows();
  r["e_fci"] = energy(e_fci);
  r["e_ccsd"] = energy(cc.energy);
  r["e_exact_ducc"] = energy(e_exact);
  r["variants"] = variants;
  r["exported_variant"] = to_string(parse_variant(primary));
  return r;
}

json workflow_flow(const RunConfig& c, const System& sys, std::ostream& log, Artifacts& art) {
  const OperatorMatrix h = build_hamiltonian_matrix(sys.integrals, sector_space(sys));
  const auto algebras = pair_algebras(sys.partition.reference, sys.n_spatial);
  if (algebras.empty()) throw Error(ErrorCode::empty_space, "flow needs at least two occupied spatial orbitals");
  FlowOptions fopt;
  const FlowPlan plan = make_plan(algebras, sys.partition, fopt);
  const FlowResult flow = run_flow(h, plan);
  CcOptions direct;
  direct.tol = std::min(c.tol, 1e-10);
  const EquivalenceCheck eq = check_equivalence(h, plan, flow, direct);

  std::ostringstream csv;
  csv << "sweep,algebra,descriptor,local_energy,max_change\n";
  for (const auto& row : flow.trace)
    csv << row.sweep << ',' << row.algebra << ",\"" << plan.algebras[row.algebra].to_string() << "\","
        << fixed10(row.local_energy) << ',' << sci(row.max_change) << '\n';
  art.add("flow_trace.csv", csv.str());
  log << "flow over " << plan.algebras.size() << " algebras converged in " << flow.sweeps << " sweeps\n";
  log << "E(flow)   = " << fixed10(eq.flow_energy) << '\n';
  log << "E(direct) = " << fixed10(eq.direct_energy) << "  (" << union_manifold(plan).size() << " labels)\n";
  log << "max union residual " << sci(eq.max_union_residual) << '\n';

  json r;
  json algs = json::array();
  for (const auto& a : plan.algebras) algs.push_back(a.to_string());
  r["algebras"] = algs;
  r["sweeps"] = flow.sweeps;
  r["n_union_labels"] = union_manifold(plan).size();
  r["e_flow"] = energy(eq.flow_energy);
  r["e_direct"] = energy(eq.direct_energy);
  r["abs_difference"] = std::abs(eq.flow_energy - eq.direct_energy);
  r["max_union_residual"] = eq.max_union_residual;
  r["sweep_tol"] = plan.sweep_tol;
  return r;
}

json peaks_json(const std::vector<Peak>& peaks) {
  json a = json::array();
  for (const auto& p : peaks) a.push_back({{"omega", energy(p.omega)}, {"height", p.height}});
  return a;
}

json workflow_gf(const RunConfig& c, const System& sys, std::ostream& log, Artifacts& art) {
  const int n_spin = sys.integrals.n_spin();
  const OperatorMatrix h = build_hamiltonian_matrix(sys.integrals, sector_space(sys));
  const CcResult cc = run_ccsd(h, sys, c.tol);
  const auto labels = manifold(sys.partition.reference, n_spin, 2);
  const ClusterOperator lambda = solve_lambda(h, cc.t, labels, cc.energy);

  const bool with_ducc = !c.active_virt.empty();
  std::optional<SesAlgebra> alg;
  std::vector<int> orbitals;
  if (with_ducc) {
    alg = active_algebra(c, sys);
    orbitals = alg->active_orbitals();
  } else {
    for (int p = 0; p < n_spin; ++p) orbitals.push_back(p);
  }
  const auto pairs = diagonal_pairs(orbitals);
  const GreensResult full = gfcc(sys.integrals, cc.t, lambda, cc.energy, pairs, c.grid);
  const auto peaks = find_peaks(full);
  std::ostringstream csv, pk;
  write_spectrum_csv(csv, full);
  art.add("spectrum.csv", csv.str());
  pk << "method,omega,height\n";
  for (const auto& p : peaks) pk << "gfcc," << fixed10(p.omega) << ',' << sci(p.height) << '\n';
  log << "GFCC: " << peaks.size() << " peaks in [" << fixed10(c.grid.omega_min) << ", " << fixed10(c.grid.omega_max)
      << "]\n";

  json r;
  r["e_ccsd"] = energy(cc.energy);
  r["orbitals"] = orbitals;
  r["grid"] = {{"omega_min", c.grid.omega_min},
               {"omega_max", c.grid.omega_max},
               {"n_points", c.grid.n_points},
               {"eta", c.grid.eta}};
  r["gfcc_peaks"] = peaks_json(peaks);
  std::optional<Peak> ip_full;
  try {
    ip_full = first_ionization_peak(full);
    r["gfcc_first_ionization_peak"] = energy(ip_full->omega);
    log << "GFCC first ionization peak at " << fixed10(ip_full->omega) << '\n';
  } catch (const Error&) {
    r["gfcc_first_ionization_peak"] = nullptr;
  }

  if (with_ducc) {
    DuccVariant v = DuccVariant::a7;
    if (c.variants.size() == 1) v = parse_variant(c.variants.front());
    const ClusterOperator t_ext = partition_cluster(cc.t, *alg).second;
    const EffectiveHamiltonian gamma =
        ducc_family(sys.integrals, sys.partition, t_ext, *alg, v, neighbour_sectors(sys));
    DuccGfOptions dopt;
    dopt.cc.tol = c.tol;
    const GreensResult ducc = ducc_gfcc(gamma, sys.partition.orbital_energies(), pairs, c.grid, dopt);
    const auto dpeaks = find_peaks(ducc);
    std::ostringstream dcsv;
    write_spectrum_csv(dcsv, ducc);
    art.add("spectrum_ducc.csv", dcsv.str());
    for (const auto& p : dpeaks) pk << "ducc_gfcc," << fixed10(p.omega) << ',' << sci(p.height) << '\n';
    r["ducc_variant"] = to_string(v);
    r["active_space"] = algebra_json(*alg);
    r["ducc_peaks"] = peaks_json(dpeaks);
    try {
      const Peak ip = first_ionization_peak(ducc);
      r["ducc_first_ionization_peak"] = energy(ip.omega);
      if (ip_full) r["first_ionization_peak_error"] = energy(std::abs(ip.omega - ip_full->omega));
      log << "DUCC-GFCC (" << to_string(v) << ") first ionization peak at " << fixed10(ip.omega) << '\n';
    } catch (const Error&) {
      r["ducc_first_ionization_peak"] = nullptr;
    }
  }
  art.add("peaks.csv", pk.str());
  return r;
}

json config_json(const RunConfig& c) {
  json j;
  j["input"] = c.input;
  j["model"] = c.model;
  j["workflow"] = to_string(c.workflow);
  j["active_occ"] = c.active_occ;
  j["active_virt"] = c.active_virt;
  j["variant"] = c.variants;
  j["omega_min"] = c.grid.omega_min;
  j["omega_max"] = c.grid.omega_max;
  j["omega_points"] = c.grid.n_points;
  j["omega_eta"] = c.grid.eta;
  j["tol"] = c.tol;
  j["warnings"] = c.warnings;
  return j;
}

}  // namespace

Workflow parse_workflow(const std::string& name) {
  if (name == "ccsd") return Workflow::ccsd;
  if (name == "verify-ses") return Workflow::verify_ses;
  if (name == "downfold") return Workflow::downfold;
  if (name == "flow") return Workflow::flow;
  if (name == "gf") return Workflow::gf;
  throw Error(ErrorCode::usage, "unknown workflow '" + name + "' (ccsd, verify-ses, downfold, flow, gf)");
}

std::string to_string(Workflow w) {
  switch (w) {
    case Workflow::ccsd:
      return "ccsd";
    case Workflow::verify_ses:
      return "verify-ses";
    case Workflow::downfold:
      return "downfold";
    case Workflow::flow:
      return "flow";
    case Workflow::gf:
      return "gf";
  }
  return "?";
}

std::optional<RunConfig> parse_arguments(int argc, const char* const* argv, std::ostream& out) {
  CLI::App app{"Coupled-cluster downfolding toolkit", "ccdf"};
  std::map<std::string, std::string> raw;
  for (const char* key : kKeys) app.add_option(std::string("--") + key, raw[key]);
  app.get_option("--input")->description("FCIDUMP file");
  app.get_option("--model")->description("model Hamiltonian, pairing:n,spacing,g[,nelec]");
  app.get_option("--workflow")->description("ccsd | verify-ses | downfold | flow | gf");
  app.get_option("--active-occ")->description("active occupied spatial orbitals, comma separated");
  app.get_option("--active-virt")->description("active virtual spatial orbitals, comma separated");
  app.get_option("--variant")->description("DUCC variants, e.g. A1,A3,A4,A6,A7");
  app.get_option("--omega-min")->description("frequency window start (Hartree)");
  app.get_option("--omega-max")->description("frequency window end (Hartree)");
  app.get_option("--omega-points")->description("number of frequency points");
  app.get_option("--omega-eta")->description("broadening (Hartree)");
  app.get_option("--tol")->description("CC residual tolerance");
  app.get_option("--out")->description("output directory");
  std::string config_path;
  app.add_option("--config", config_path, "key = value file; its values override flags");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::CallForVersion&) {
    out << CCDF_VERSION << '\n';
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorCode::usage, e.what());
  }

  RunConfig config;
  for (const char* key : kKeys)
    if (app.count(std::string("--") + key) > 0) apply_setting(config, key, raw[key]);
  if (!config_path.empty()) {
    for (const auto& [key, value] : read_config_file(config_path)) {
      const std::string flag = "--" + key;
      if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) == std::end(kKeys))
        throw Error(ErrorCode::usage, "unknown configuration key '" + key + "' in " + config_path);
      if (app.count(flag) > 0 && raw[key] != value)
        config.warnings.push_back("config file overrides " + flag + "=" + raw[key] + " with " + value);
      apply_setting(config, key, value);
    }
  }
  return config;
}

void validate(const RunConfig& c) {
  if (c.input.empty() == c.model.empty()) throw Error(ErrorCode::usage, "exactly one of --input and --model is required");
  if (c.tol <= 0.0) throw Error(ErrorCode::usage, "--tol must be positive");
  if (c.variants.empty()) throw Error(ErrorCode::usage, "--variant list is empty");
  for (const auto& v : c.variants) parse_variant(v);
  if (c.workflow == Workflow::downfold && c.active_virt.empty())
    throw Error(ErrorCode::usage, "downfold needs --active-virt");
  if (c.workflow == Workflow::gf) c.grid.validate();
}

System load_model(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos || spec.substr(0, colon) != "pairing")
    throw Error(ErrorCode::usage, "model must look like pairing:n,spacing,g[,nelec]");
  const auto parts = split(spec.substr(colon + 1), ',');
  if (parts.size() < 3 || parts.size() > 4) throw Error(ErrorCode::usage, "pairing model takes n,spacing,g[,nelec]");
  const int n = to_int(parts[0], "pairing levels");
  if (n < 1 || n > 32) throw Error(ErrorCode::usage, "pairing levels must be in 1..32");
  System sys;
  sys.integrals = model_pairing(n, to_double(parts[1], "pairing spacing"), to_double(parts[2], "pairing g"));
  sys.n_spatial = n;
  sys.n_electrons = parts.size() == 4 ? to_int(parts[3], "pairing electrons") : n;
  sys.ms2 = sys.n_electrons % 2;
  sys.partition = build_reference_partition(sys.integrals, sys.n_electrons, sys.ms2);
  sys.source = spec;
  return sys;
}

System load_fcidump(const std::filesystem::path& path) {
  const IntegralSet ints = read_fcidump(path);
  System sys;
  sys.integrals = to_spin_orbitals(ints);
  sys.n_spatial = ints.n_spatial();
  sys.n_electrons = ints.n_electrons();
  sys.ms2 = ints.ms2();
  sys.partition = build_reference_partition(sys.integrals, sys.n_electrons, sys.ms2);
  sys.source = path.filename().string();
  return sys;
}

System load_system(const RunConfig& config) {
  return config.input.empty() ? load_model(config.model) : load_fcidump(config.input);
}

int run(const RunConfig& config, std::ostream& log, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::filesystem::path> written;
  try {
    validate(config);
    for (const auto& w : config.warnings) err << "WARNING: " << w << '\n';
    const System sys = load_system(config);
    Artifacts art;
    json results;
    switch (config.workflow) {
      case Workflow::ccsd:
        results = workflow_ccsd(config, sys, log, art);
        break;
      case Workflow::verify_ses:
        results = workflow_verify_ses(config, sys, log, art);
        break;
      case Workflow::downfold:
        results = workflow_downfold(config, sys, log, art);
        break;
      case Workflow::flow:
        results = workflow_flow(config, sys, log, art);
        break;
      case Workflow::gf:
        results = workflow_gf(config, sys, log, art);
        break;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json summary;
    summary["program"] = "ccdf";
    summary["version"] = CCDF_VERSION;
    summary["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                               std::to_string(EIGEN_MINOR_VERSION);
    summary["workflow"] = to_string(config.workflow);
    summary["inputs"] = config_json(config);
    summary["system"] = system_json(sys);
    summary["results"] = results;
    summary["artifacts"] = json::array();
    for (const auto& [name, content] : art.files) summary["artifacts"].push_back(name);
    summary["wall_time_seconds"] = wall;
    summary["timestamp"] = utc_timestamp();
    art.add("summary.json", summary.dump(2) + "\n");

    std::error_code ec;
    std::filesystem::create_directories(config.out, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create output directory " + config.out.string() + ": " + ec.message());
    for (const auto& [name, content] : art.files) {
      const auto path = config.out / name;
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      if (!f) throw Error(ErrorCode::io, "cannot write " + path.string());
      written.push_back(path);
      f << content;
      if (!f.flush()) throw Error(ErrorCode::io, "failed writing " + path.string());
    }
    log << "wrote " << art.files.size() << " files to " << config.out.string() << '\n';
    return 0;
  } catch (const Error& e) {
    for (const auto& p : written) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    err << "ERROR " << ccdf::to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    for (const auto& p : written) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    err << "ERROR INTERNAL: " << e.what() << '\n';
    return 1;
  }
}

int main(int argc, const char* const* argv) {
  std::optional<RunConfig> config;
  try {
    config = parse_arguments(argc, argv, std::cout);
  } catch (const Error& e) {
    std::cerr << "ERROR " << ccdf::to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  }
  if (!config) return 0;
  return run(*config, std::cout, std::cerr);
}

}  // namespace ccdf::cli
