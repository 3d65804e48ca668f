#include "ccdf/hamiltonian_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "ccdf/error.hpp"

namespace ccdf {

namespace {

std::size_t pair_index(int p, int q) {
  const auto a = static_cast<std::size_t>(std::max(p, q));
  const auto b = static_cast<std::size_t>(std::min(p, q));
  return a * (a + 1) / 2 + b;
}

constexpr double kDuplicateTol = 1e-12;

}  // namespace

// ---------------------------------------------------------------- IntegralSet

IntegralSet::IntegralSet(int n_spatial, int n_electrons, int ms2)
    : n_spatial_(n_spatial), n_electrons_(n_electrons), ms2_(ms2) {
  if (n_spatial < 1) throw Error(ErrorCode::format, "NORB must be >= 1");
  if (n_electrons < 1) throw Error(ErrorCode::format, "NELEC must be >= 1");
  if (std::abs(ms2) > n_electrons) throw Error(ErrorCode::format, "|MS2| exceeds NELEC");
  if (2 * n_spatial > kMaxSpinOrbitals)
    throw Error(ErrorCode::index, "at most 32 spatial orbitals are supported");
  const std::size_t npair = pair_index(n_spatial - 1, n_spatial - 1) + 1;
  h_.assign(npair, 0.0);
  eri_.assign(npair * (npair + 1) / 2, 0.0);
  orbsym.assign(static_cast<std::size_t>(n_spatial), 1);
}

void IntegralSet::check(int p) const {
  if (p < 0 || p >= n_spatial_)
    throw Error(ErrorCode::index, "spatial orbital index " + std::to_string(p) + " out of range");
}

double IntegralSet::h(int p, int q) const {
  check(p);
  check(q);
  return h_[pair_index(p, q)];
}

void IntegralSet::set_h(int p, int q, double value) {
  check(p);
  check(q);
  h_[pair_index(p, q)] = value;
}

std::size_t IntegralSet::eri_slot(int p, int q, int r, int s) const {
  check(p);
  check(q);
  check(r);
  check(s);
  const std::size_t pq = pair_index(p, q);
  const std::size_t rs = pair_index(r, s);
  const std::size_t a = std::max(pq, rs);
  const std::size_t b = std::min(pq, rs);
  return a * (a + 1) / 2 + b;
}

double IntegralSet::eri(int p, int q, int r, int s) const { return eri_[eri_slot(p, q, r, s)]; }

void IntegralSet::set_eri(int p, int q, int r, int s, double value) { eri_[eri_slot(p, q, r, s)] = value; }

// ------------------------------------------------------------ SpinIntegralSet

SpinIntegralSet::SpinIntegralSet(int n_spin)
    : h(Eigen::MatrixXd::Zero(n_spin, n_spin)), n_spin_(n_spin) {
  const auto n = static_cast<std::size_t>(n_spin);
  v_anti_.assign(n * n * n * n, 0.0);
}

void SpinIntegralSet::set_v_antisymmetric(int p, int q, int r, int s, double value) noexcept {
  for (int herm = 0; herm < 2; ++herm) {
    const int a = herm ? r : p;
    const int b = herm ? s : q;
    const int c = herm ? p : r;
    const int d = herm ? q : s;
    set_v(a, b, c, d, value);
    set_v(b, a, c, d, -value);
    set_v(a, b, d, c, -value);
    set_v(b, a, d, c, value);
  }
}

std::vector<double> ReferencePartition::orbital_energies() const {
  std::vector<double> e(static_cast<std::size_t>(fock.rows()));
  for (Eigen::Index p = 0; p < fock.rows(); ++p) e[static_cast<std::size_t>(p)] = fock(p, p);
  return e;
}

// ------------------------------------------------------------------- FCIDUMP

namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

double parse_number(std::string token) {
  std::replace(token.begin(), token.end(), 'D', 'E');
  std::replace(token.begin(), token.end(), 'd', 'e');
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::format, "not a number: '" + token + "'");
  }
  if (used != token.size()) throw Error(ErrorCode::format, "not a number: '" + token + "'");
  return value;
}

int parse_int(const std::string& token) {
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(token, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::format, "not an integer: '" + token + "'");
  }
  if (used != token.size()) throw Error(ErrorCode::format, "not an integer: '" + token + "'");
  return value;
}

// Splits a Fortran namelist body into KEY -> value tokens. Values may span
// several comma-separated items (ORBSYM=1,1,2,).
std::map<std::string, std::vector<std::string>> parse_namelist(const std::string& body) {
  std::map<std::string, std::vector<std::string>> out;
  std::string normalized = body;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream tokens(normalized);
  std::string token;
  std::string key;
  while (tokens >> token) {
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      key = upper(token.substr(0, eq));
      auto& values = out[key];
      if (eq + 1 < token.size()) values.push_back(token.substr(eq + 1));
    } else if (!key.empty()) {
      out[key].push_back(token);
    } else {
      throw Error(ErrorCode::format, "unexpected token in FCIDUMP header: '" + token + "'");
    }
  }
  return out;
}

}  // namespace

IntegralSet parse_fcidump(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string text_upper = upper(text);

  const auto start = text_upper.find_first_not_of(" \t\r\n");
  if (start == std::string::npos || text_upper.compare(start, 4, "&FCI") != 0)
    throw Error(ErrorCode::format, "FCIDUMP must begin with an &FCI namelist");

  std::size_t header_end = text_upper.find("&END", start + 4);
  std::size_t body_start = header_end == std::string::npos ? std::string::npos : header_end + 4;
  const std::size_t slash = text_upper.find('/', start + 4);
  if (slash != std::string::npos && (header_end == std::string::npos || slash < header_end)) {
    header_end = slash;
    body_start = slash + 1;
  }
  if (header_end == std::string::npos)
    throw Error(ErrorCode::format, "FCIDUMP header is not terminated by &END or /");

  const auto keys = parse_namelist(text.substr(start + 4, header_end - start - 4));
  auto scalar = [&](const char* name) -> std::optional<int> {
    const auto it = keys.find(name);
    if (it == keys.end() || it->second.empty()) return std::nullopt;
    return parse_int(it->second.front());
  };
  const auto norb = scalar("NORB");
  const auto nelec = scalar("NELEC");
  if (!norb) throw Error(ErrorCode::format, "FCIDUMP header is missing NORB");
  if (!nelec) throw Error(ErrorCode::format, "FCIDUMP header is missing NELEC");

  IntegralSet ints(*norb, *nelec, scalar("MS2").value_or(0));
  if (const auto it = keys.find("ORBSYM"); it != keys.end()) {
    for (std::size_t i = 0; i < it->second.size() && i < ints.orbsym.size(); ++i)
      ints.orbsym[i] = parse_int(it->second[i]);
  }
  ints.isym = scalar("ISYM").value_or(1);

  std::vector<bool> seen_eri(ints.eri_slot_count(), false);
  std::map<std::pair<int, int>, double> seen_h;
  std::optional<double> seen_core;

  auto duplicate_check = [](double old_value, double value, const std::string& what) {
    if (std::abs(old_value - value) > kDuplicateTol)
      throw Error(ErrorCode::conflict, "inconsistent duplicate entries for " + what);
  };

  std::istringstream body(text.substr(body_start));
  std::string line;
  int line_no = 0;
  while (std::getline(body, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 5)
      throw Error(ErrorCode::format,
                  "integral line " + std::to_string(line_no) + " must have 5 fields: '" + line + "'");
    const double value = parse_number(tok[0]);
    int idx[4];
    for (int k = 0; k < 4; ++k) {
      idx[k] = parse_int(tok[static_cast<std::size_t>(k) + 1]);
      if (idx[k] < 0 || idx[k] > *norb)
        throw Error(ErrorCode::index, "integral index " + std::to_string(idx[k]) + " outside [0, NORB] on line " +
                                          std::to_string(line_no));
    }
    const auto [i, j, k, l] = idx;
    const std::string where = "(" + std::to_string(i) + " " + std::to_string(j) + " " + std::to_string(k) +
                              " " + std::to_string(l) + ")";
    if (i && j && k && l) {
      const std::size_t slot = ints.eri_slot(i - 1, j - 1, k - 1, l - 1);
      if (seen_eri[slot]) duplicate_check(ints.eri(i - 1, j - 1, k - 1, l - 1), value, where);
      seen_eri[slot] = true;
      ints.set_eri(i - 1, j - 1, k - 1, l - 1, value);
    } else if (i && j && !k && !l) {
      const auto key = std::minmax(i, j);
      if (auto it = seen_h.find(key); it != seen_h.end()) duplicate_check(it->second, value, where);
      seen_h[key] = value;
      ints.set_h(i - 1, j - 1, value);
    } else if (!i && !j && !k && !l) {
      if (seen_core) duplicate_check(*seen_core, value, where);
      seen_core = value;
      ints.set_e_core(value);
    } else if (i && !j && !k && !l) {
      // orbital energy record; not used
    } else {
      throw Error(ErrorCode::format, "unrecognized index pattern " + where);
    }
  }
  return ints;
}

IntegralSet read_fcidump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return parse_fcidump(in);
}

// ------------------------------------------------------------ spin orbitals

SpinIntegralSet to_spin_orbitals(const IntegralSet& s) {
  const int n = 2 * s.n_spatial();
  SpinIntegralSet out(n);
  out.e_core = s.e_core();
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      if (spin_of(p) == spin_of(q)) out.h(p, q) = s.h(spatial_of(p), spatial_of(q));

  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int t = 0; t < n; ++t) {
          double value = 0.0;
          if (spin_of(p) == spin_of(r) && spin_of(q) == spin_of(t))
            value += s.eri(spatial_of(p), spatial_of(r), spatial_of(q), spatial_of(t));
          if (spin_of(p) == spin_of(t) && spin_of(q) == spin_of(r))
            value -= s.eri(spatial_of(p), spatial_of(t), spatial_of(q), spatial_of(r));
          out.set_v(p, q, r, t, value);
        }
  return out;
}

// --------------------------------------------------------- reference / Fock

Eigen::MatrixXd fock_matrix(const SpinIntegralSet& s, const Determinant& occupation) {
  const int n = s.n_spin();
  Eigen::MatrixXd f = s.h;
  const auto occ = occupation.occupied_list();
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int i : occ) f(p, q) += s.v(p, i, q, i);
  return f;
}

namespace {

Determinant aufbau(const Eigen::VectorXd& diagonal, int n_alpha, int n_beta) {
  const int n = static_cast<int>(diagonal.size());
  Determinant d;
  for (int spin = 0; spin < 2; ++spin) {
    std::vector<int> orbitals;
    for (int p = spin; p < n; p += 2) orbitals.push_back(p);
    // Values are quantized so near-degenerate levels fall back to index order.
    auto key = [&](int p) { return std::llround(diagonal(p) * 1e10); };
    std::stable_sort(orbitals.begin(), orbitals.end(), [&](int a, int b) {
      const auto ka = key(a), kb = key(b);
      return ka != kb ? ka < kb : a < b;
    });
    const int take = spin == 0 ? n_alpha : n_beta;
    for (int k = 0; k < take; ++k) d.bits |= bit(orbitals[static_cast<std::size_t>(k)]);
  }
  return d;
}

}  // namespace

ReferencePartition build_reference_partition(const SpinIntegralSet& s, int n_electrons, int ms2) {
  const int n = s.n_spin();
  if ((n_electrons + ms2) % 2 != 0 || std::abs(ms2) > n_electrons)
    throw Error(ErrorCode::empty_space, "MS2 is incompatible with the electron count");
  const int n_alpha = (n_electrons + ms2) / 2;
  const int n_beta = (n_electrons - ms2) / 2;
  if (n_alpha > (n + 1) / 2 || n_beta > n / 2)
    throw Error(ErrorCode::empty_space, "not enough spin orbitals for the requested occupation");

  ReferencePartition part;
  part.integrals = s;
  Determinant ref = aufbau(s.h.diagonal(), n_alpha, n_beta);
  Eigen::MatrixXd f = fock_matrix(s, ref);
  ref = aufbau(f.diagonal(), n_alpha, n_beta);
  f = fock_matrix(s, ref);

  const auto occ = ref.occupied_list();
  double e = s.e_core;
  for (int i : occ) e += s.h(i, i);
  for (int i : occ)
    for (int j : occ) e += 0.5 * s.v(i, j, i, j);

  part.reference = ref;
  part.e_ref = e;
  part.fock = std::move(f);
  return part;
}

// ------------------------------------------------------------- model systems

SpinIntegralSet model_pairing(int n_levels, double spacing, double g) {
  if (n_levels < 1) throw Error(ErrorCode::usage, "pairing model needs at least one level");
  SpinIntegralSet out(2 * n_levels);
  for (int k = 0; k < n_levels; ++k) {
    out.h(spin_orbital(k, 0), spin_orbital(k, 0)) = k * spacing;
    out.h(spin_orbital(k, 1), spin_orbital(k, 1)) = k * spacing;
  }
  // -g a+_{k a} a+_{k b} a_{l b} a_{l a}  <=>  <k_a k_b || l_a l_b> = -g
  for (int k = 0; k < n_levels; ++k)
    for (int l = 0; l < n_levels; ++l)
      out.set_v_antisymmetric(spin_orbital(k, 0), spin_orbital(k, 1), spin_orbital(l, 0), spin_orbital(l, 1), -g);
  return out;
}

}  // namespace ccdf
