#pragma once

// Advantage-preserving MDP transformations.
//
// The value shift moves every policy's value at one state by a constant.
// The discount change moves the zero level of one coordinate, which changes
// gamma while leaving every advantage and every value-vector span intact.

#include <span>
#include <variant>
#include <vector>

#include "mdpgeo/core.hpp"

namespace mdpgeo {

/// Affine map taking value vectors of an MDP to those of a transformed one.
class ValueMap {
 public:
  /// V -> V + delta * e_s (value shift).
  static ValueMap shift(StateId s, double delta) { return ValueMap(s, 1.0, delta); }
  /// V(s) -> scale * V(s); every other entry moves by the same amount, so
  /// pairwise differences are kept (discount change).
  static ValueMap rescale(StateId s, double scale) { return ValueMap(s, scale, 0.0); }
  static ValueMap identity() { return ValueMap(0, 1.0, 0.0); }

  ValueVector apply(const ValueVector& v) const;
  ValueVector inverse(const ValueVector& v) const;

  StateId state() const noexcept { return state_; }
  double scale() const noexcept { return scale_; }
  double offset() const noexcept { return offset_; }

 private:
  ValueMap(StateId s, double scale, double offset) : state_(s), scale_(scale), offset_(offset) {}

  StateId state_;
  double scale_;
  double offset_;
};

struct ShiftStep {
  StateId state = 0;
  double delta = 0.0;
};

struct DiscountStep {
  StateId state = 0;
  double gamma_before = 0.0;
  double gamma_after = 0.0;
  bool forced = false;
};

using TransformStep = std::variant<ShiftStep, DiscountStep>;

struct TransformLog {
  double original_gamma = 0.0;
  std::vector<TransformStep> steps;
};

/// Rewards r^a <- r^a - c^a_s * delta; probabilities and gamma unchanged.
Mdp apply_L(const Mdp& mdp, StateId s, double delta);

enum class JSafety { checked, forced };

struct DiscountChange {
  Mdp mdp;
  ValueMap values;
};

/// Shifts coordinate s of every action vector by -(gamma - gamma_new) and
/// re-expresses the rows as probabilities under gamma_new. Throws
/// Error(unsafe_transform) when a cross-state coefficient at s would become
/// negative, unless `safety` is forced.
DiscountChange apply_J(const Mdp& mdp, StateId s, double gamma_new, JSafety safety = JSafety::checked);

/// Largest downward discount step allowed at s: min over foreign actions of
/// c^a_s. Empty when s has no foreign actions.
std::optional<double> safe_discount_margin(const Mdp& mdp, StateId s);

inline constexpr double kMinGamma = 1e-6;

struct EffectiveGamma {
  double gamma = 0.0;
  double gamma_eff = 0.0;
  bool clamped = false;
  Mdp transformed;
  TransformLog log;
};

/// Greedy per-state discount reduction. `order` defaults to ascending states.
EffectiveGamma effective_gamma(const Mdp& mdp, std::span<const StateId> order = {});

struct Normalization {
  Mdp mdp;
  Policy optimal;
  TransformLog log;
  /// False when some non-optimal action ties the optimum within tolerance.
  bool unique = true;
};

/// Shifts every state by -V*(s) so the optimal policy has value 0 everywhere.
Normalization normalize(const Mdp& mdp);

Mdp replay(const Mdp& original, const TransformLog& log);
/// Undoes `log` on a transformed MDP (steps reversed).
Mdp invert(const Mdp& transformed, const TransformLog& log);

/// Maps value vectors of the original MDP through every step of `log`.
ValueVector map_values(const TransformLog& log, const ValueVector& v);

}  // namespace mdpgeo
