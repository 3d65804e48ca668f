#include "ccdf/excitation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ccdf/error.hpp"

namespace ccdf {

std::vector<LadderOp> ExcitationLabel::excitation_string() const {
  std::vector<LadderOp> ops;
  ops.reserve(2 * occupied.size());
  for (int a : virtuals) ops.push_back(cre(a));
  for (auto it = occupied.rbegin(); it != occupied.rend(); ++it) ops.push_back(ann(*it));
  return ops;
}

// Adjoint of the excitation string: a+_{i1} ... a+_{ik} a_{ak} ... a_{a1}.
std::vector<LadderOp> ExcitationLabel::deexcitation_string() const {
  std::vector<LadderOp> ops;
  ops.reserve(2 * occupied.size());
  for (int i : occupied) ops.push_back(cre(i));
  for (auto it = virtuals.rbegin(); it != virtuals.rend(); ++it) ops.push_back(ann(*it));
  return ops;
}

std::uint64_t ExcitationLabel::occupied_mask() const noexcept {
  std::uint64_t m = 0;
  for (int i : occupied) m |= bit(i);
  return m;
}

std::uint64_t ExcitationLabel::virtual_mask() const noexcept {
  std::uint64_t m = 0;
  for (int a : virtuals) m |= bit(a);
  return m;
}

bool ExcitationLabel::conserves_sz() const noexcept {
  return Determinant{occupied_mask()}.ms2() == Determinant{virtual_mask()}.ms2();
}

std::string ExcitationLabel::to_string() const {
  std::string s;
  for (std::size_t k = 0; k < occupied.size(); ++k) s += (k ? "," : "") + std::to_string(occupied[k]);
  s += "->";
  for (std::size_t k = 0; k < virtuals.size(); ++k) s += (k ? "," : "") + std::to_string(virtuals[k]);
  return s;
}

std::strong_ordering operator<=>(const ExcitationLabel& a, const ExcitationLabel& b) {
  if (auto c = a.rank() <=> b.rank(); c != 0) return c;
  if (auto c = a.occupied <=> b.occupied; c != 0) return c;
  return a.virtuals <=> b.virtuals;
}

ExcitationLabel make_label(std::vector<int> occupied, std::vector<int> virtuals) {
  std::sort(occupied.begin(), occupied.end());
  std::sort(virtuals.begin(), virtuals.end());
  if (occupied.empty() || occupied.size() != virtuals.size())
    throw Error(ErrorCode::usage, "excitation label needs equal, nonzero numbers of occupied and virtual indices");
  for (int p : occupied)
    if (p < 0 || p >= kMaxSpinOrbitals) throw Error(ErrorCode::index, "label index out of range");
  for (int p : virtuals)
    if (p < 0 || p >= kMaxSpinOrbitals) throw Error(ErrorCode::index, "label index out of range");
  if (std::adjacent_find(occupied.begin(), occupied.end()) != occupied.end() ||
      std::adjacent_find(virtuals.begin(), virtuals.end()) != virtuals.end())
    throw Error(ErrorCode::usage, "repeated index in excitation label");
  ExcitationLabel label{std::move(occupied), std::move(virtuals)};
  if (label.occupied_mask() & label.virtual_mask())
    throw Error(ErrorCode::usage, "occupied and virtual indices overlap in label " + label.to_string());
  return label;
}

std::optional<StringAction> excite(const ExcitationLabel& label, Determinant d) noexcept {
  const auto ops = label.excitation_string();
  return apply_string(ops, d);
}

// ------------------------------------------------------------ ClusterOperator

void ClusterOperator::set(const ExcitationLabel& label, double value) {
  if ((label.occupied_mask() & ~reference_.bits) != 0 || (label.virtual_mask() & reference_.bits) != 0)
    throw Error(ErrorCode::usage, "label " + label.to_string() + " does not excite out of the reference");
  amplitudes_[label] = value;
}

double ClusterOperator::get(const ExcitationLabel& label) const {
  const auto it = amplitudes_.find(label);
  return it == amplitudes_.end() ? 0.0 : it->second;
}

std::vector<ExcitationLabel> ClusterOperator::labels() const {
  std::vector<ExcitationLabel> out;
  out.reserve(amplitudes_.size());
  for (const auto& [label, value] : amplitudes_) out.push_back(label);
  return out;
}

double ClusterOperator::max_abs() const {
  double m = 0.0;
  for (const auto& [label, value] : amplitudes_) m = std::max(m, std::abs(value));
  return m;
}

// ------------------------------------------------------------------ manifold

namespace {

void combinations(const std::vector<int>& pool, int k, const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (static_cast<int>(pick.size()) == k) {
      visit(pick);
      return;
    }
    for (std::size_t i = start; i < pool.size(); ++i) {
      pick.push_back(pool[i]);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
}

}  // namespace

std::vector<ExcitationLabel> manifold(const Determinant& reference, int n_spin, int max_rank) {
  if (max_rank < 1) throw Error(ErrorCode::usage, "max_rank must be >= 1");
  std::vector<int> occ, vir;
  for (int p = 0; p < n_spin; ++p) (reference.occupied(p) ? occ : vir).push_back(p);
  std::vector<ExcitationLabel> out;
  for (int k = 1; k <= max_rank; ++k) {
    combinations(occ, k, [&](const std::vector<int>& o) {
      combinations(vir, k, [&](const std::vector<int>& v) {
        ExcitationLabel label{o, v};
        if (label.conserves_sz()) out.push_back(std::move(label));
      });
    });
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ccdf
