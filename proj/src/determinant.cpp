#include "ccdf/determinant.hpp"

#include "ccdf/error.hpp"

namespace ccdf {

std::vector<int> Determinant::occupied_list() const {
  std::vector<int> out;
  out.reserve(count());
  for (auto b = bits; b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
  return out;
}

std::string Determinant::to_string(int n_spin) const {
  std::string s(static_cast<std::size_t>(n_spin), '0');
  for (int p = 0; p < n_spin; ++p)
    if (occupied(p)) s[static_cast<std::size_t>(p)] = '1';
  return s;
}

Determinant make_determinant(const std::vector<int>& occupied) {
  Determinant d;
  for (int p : occupied) {
    if (p < 0 || p >= kMaxSpinOrbitals)
      throw Error(ErrorCode::index, "spin orbital " + std::to_string(p) + " out of range");
    d.bits |= bit(p);
  }
  return d;
}

}  // namespace ccdf
