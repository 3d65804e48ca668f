#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccdf/determinant.hpp"

namespace ccdf {

/// Excitation i1..ik -> a1..ak relative to a reference determinant. The
/// operator string is a+_{a1} ... a+_{ak} a_{ik} ... a_{i1} with both index
/// sets ascending; amplitudes refer to that exact string.
struct ExcitationLabel {
  std::vector<int> occupied;
  std::vector<int> virtuals;

  [[nodiscard]] int rank() const noexcept { return static_cast<int>(occupied.size()); }
  [[nodiscard]] std::vector<LadderOp> excitation_string() const;
  [[nodiscard]] std::vector<LadderOp> deexcitation_string() const;
  [[nodiscard]] std::uint64_t occupied_mask() const noexcept;
  [[nodiscard]] std::uint64_t virtual_mask() const noexcept;
  [[nodiscard]] bool conserves_sz() const noexcept;
  [[nodiscard]] std::string to_string() const;

  // Ordered by rank, then occupied set, then virtual set.
  friend std::strong_ordering operator<=>(const ExcitationLabel& a, const ExcitationLabel& b);
  friend bool operator==(const ExcitationLabel&, const ExcitationLabel&) = default;
};

/// Builds a validated label; index sets are sorted, must be disjoint and of
/// equal nonzero size.
ExcitationLabel make_label(std::vector<int> occupied, std::vector<int> virtuals);

/// Applies the excitation string of `label` to `d`.
[[nodiscard]] std::optional<StringAction> excite(const ExcitationLabel& label, Determinant d) noexcept;

/// Amplitudes over excitation labels relative to a reference. Also used for
/// de-excitation amplitudes (Lambda), which share the label structure.
class ClusterOperator {
 public:
  ClusterOperator() = default;
  explicit ClusterOperator(Determinant reference) : reference_(reference) {}

  [[nodiscard]] const Determinant& reference() const noexcept { return reference_; }
  [[nodiscard]] const std::map<ExcitationLabel, double>& amplitudes() const noexcept { return amplitudes_; }
  [[nodiscard]] std::size_t size() const noexcept { return amplitudes_.size(); }
  [[nodiscard]] bool empty() const noexcept { return amplitudes_.empty(); }

  /// Throws when the label does not excite out of the reference.
  void set(const ExcitationLabel& label, double value);
  [[nodiscard]] double get(const ExcitationLabel& label) const;
  [[nodiscard]] bool contains(const ExcitationLabel& label) const { return amplitudes_.count(label) != 0; }
  [[nodiscard]] std::vector<ExcitationLabel> labels() const;
  [[nodiscard]] double max_abs() const;

 private:
  Determinant reference_;
  std::map<ExcitationLabel, double> amplitudes_;
};

/// All S_z-conserving labels of rank 1..max_rank out of `reference` within
/// n_spin spin orbitals, sorted.
std::vector<ExcitationLabel> manifold(const Determinant& reference, int n_spin, int max_rank);

}  // namespace ccdf
