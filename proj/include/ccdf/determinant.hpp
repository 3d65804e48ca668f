#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ccdf {

// Spin orbitals are interleaved: p = 2 * spatial + spin, spin 0 = alpha, 1 = beta.
constexpr int kMaxSpinOrbitals = 64;

[[nodiscard]] constexpr int spin_orbital(int spatial, int spin) noexcept { return 2 * spatial + spin; }
[[nodiscard]] constexpr int spatial_of(int p) noexcept { return p >> 1; }
[[nodiscard]] constexpr int spin_of(int p) noexcept { return p & 1; }

constexpr std::uint64_t kAlphaMask = 0x5555555555555555ULL;
constexpr std::uint64_t kBetaMask = 0xAAAAAAAAAAAAAAAAULL;

[[nodiscard]] constexpr std::uint64_t bit(int p) noexcept { return std::uint64_t{1} << p; }

/// Occupation bitstring over spin orbitals; bit p set means spin orbital p is occupied.
struct Determinant {
  std::uint64_t bits = 0;

  [[nodiscard]] constexpr bool occupied(int p) const noexcept { return (bits >> p) & 1U; }
  [[nodiscard]] constexpr int count() const noexcept { return std::popcount(bits); }
  [[nodiscard]] constexpr int count_below(int p) const noexcept {
    return std::popcount(bits & (bit(p) - 1));
  }
  /// Twice the spin projection: n_alpha - n_beta.
  [[nodiscard]] constexpr int ms2() const noexcept {
    return std::popcount(bits & kAlphaMask) - std::popcount(bits & kBetaMask);
  }
  [[nodiscard]] std::vector<int> occupied_list() const;
  [[nodiscard]] std::string to_string(int n_spin) const;

  friend constexpr auto operator<=>(const Determinant&, const Determinant&) = default;
};

[[nodiscard]] Determinant make_determinant(const std::vector<int>& occupied);

enum class LadderKind { create, annihilate };

struct LadderOp {
  LadderKind kind;
  int orbital;
};

[[nodiscard]] constexpr LadderOp cre(int p) noexcept { return {LadderKind::create, p}; }
[[nodiscard]] constexpr LadderOp ann(int p) noexcept { return {LadderKind::annihilate, p}; }

struct StringAction {
  int phase;
  Determinant det;
};

/// Applies a product of ladder operators, rightmost first. Each elementary
/// operator on orbital p contributes (-1)^(occupied orbitals below p).
/// Returns nullopt when the result vanishes.
[[nodiscard]] constexpr std::optional<StringAction> apply_string(std::span<const LadderOp> ops,
                                                                 Determinant d) noexcept {
  int phase = 1;
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    const bool occ = d.occupied(it->orbital);
    if ((it->kind == LadderKind::create) == occ) return std::nullopt;
    if (d.count_below(it->orbital) & 1) phase = -phase;
    d.bits ^= bit(it->orbital);
  }
  return StringAction{phase, d};
}

}  // namespace ccdf
