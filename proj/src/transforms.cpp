#include "mdpgeo/transforms.hpp"

#include <algorithm>
#include <numeric>

#include "mdpgeo/solvers.hpp"

namespace mdpgeo {

ValueVector ValueMap::apply(const ValueVector& v) const {
  const auto s = static_cast<Eigen::Index>(state_);
  if (s >= v.size()) throw Error(ErrorKind::dimension, "value map state out of range");
  ValueVector out = v;
  if (scale_ != 1.0) {
    const double moved = v[s] * scale_;
    out.array() += moved - v[s];
    out[s] = moved;
  }
  out[s] += offset_;
  return out;
}

ValueVector ValueMap::inverse(const ValueVector& v) const {
  const auto s = static_cast<Eigen::Index>(state_);
  if (s >= v.size()) throw Error(ErrorKind::dimension, "value map state out of range");
  ValueVector out = v;
  out[s] -= offset_;
  if (scale_ != 1.0) {
    const double original = out[s] / scale_;
    out.array() += original - out[s];
    out[s] = original;
  }
  return out;
}

namespace {

void check_state(const Mdp& mdp, StateId s) {
  if (s >= mdp.n_states()) throw Error(ErrorKind::dimension, "state " + std::to_string(s) + " out of range");
}

}  // namespace

Mdp apply_L(const Mdp& mdp, StateId s, double delta) {
  check_state(mdp, s);
  if (delta == 0.0) return mdp;
  std::vector<Action> actions = mdp.actions();
  const auto si = static_cast<Eigen::Index>(s);
  for (Action& a : actions) {
    double c = mdp.gamma() * a.probs[si];
    if (a.state == s) c -= 1.0;
    a.reward -= c * delta;
  }
  return Mdp(mdp.n_states(), mdp.gamma(), std::move(actions));
}

std::optional<double> safe_discount_margin(const Mdp& mdp, StateId s) {
  check_state(mdp, s);
  std::optional<double> margin;
  for (const Action& a : mdp.actions()) {
    if (a.state == s) continue;
    const double c = mdp.gamma() * a.probs[static_cast<Eigen::Index>(s)];
    margin = margin ? std::min(*margin, c) : c;
  }
  return margin;
}

DiscountChange apply_J(const Mdp& mdp, StateId s, double gamma_new, JSafety safety) {
  check_state(mdp, s);
  if (!(gamma_new > 0.0 && gamma_new < 1.0)) {
    throw Error(ErrorKind::domain, "new discount factor must lie in (0,1), got " + std::to_string(gamma_new));
  }
  const double gamma = mdp.gamma();
  if (gamma_new == gamma) return {mdp, ValueMap::identity()};

  const double drop = gamma - gamma_new;
  const auto si = static_cast<Eigen::Index>(s);
  std::vector<Action> actions = mdp.actions();
  for (Action& a : actions) {
    const auto own = static_cast<Eigen::Index>(a.state);
    Eigen::VectorXd c = gamma * a.probs;
    c[own] -= 1.0;
    c[si] -= drop;
    if (safety == JSafety::checked && a.state != s && c[si] < -kProbabilityTolerance) {
      throw Error(ErrorKind::unsafe_transform,
                  "discount change at state " + std::to_string(s) + " to " + std::to_string(gamma_new) +
                      " makes action '" + a.id + "' negative at a foreign state");
    }
    c[own] += 1.0;
    a.probs = c / gamma_new;
  }
  return {Mdp(mdp.n_states(), gamma_new, std::move(actions)),
          ValueMap::rescale(s, (1.0 - gamma) / (1.0 - gamma_new))};
}

EffectiveGamma effective_gamma(const Mdp& mdp, std::span<const StateId> order) {
  std::vector<StateId> states(order.begin(), order.end());
  if (states.empty()) {
    states.resize(mdp.n_states());
    std::iota(states.begin(), states.end(), StateId{0});
  }

  EffectiveGamma out{mdp.gamma(), mdp.gamma(), false, mdp, TransformLog{mdp.gamma(), {}}};
  for (StateId s : states) {
    // A step at s only touches coordinate s, so margins elsewhere are stable.
    const auto margin = safe_discount_margin(out.transformed, s);
    if (!margin || *margin <= 0.0) continue;
    const double before = out.transformed.gamma();
    double target = before - *margin;
    if (target < kMinGamma) {
      target = kMinGamma;
      out.clamped = true;
    }
    if (target >= before) continue;
    out.transformed = apply_J(out.transformed, s, target).mdp;
    out.log.steps.emplace_back(DiscountStep{s, before, target, false});
  }
  out.gamma_eff = out.transformed.gamma();
  return out;
}

Normalization normalize(const Mdp& mdp) {
  const ExactSolution opt = solve_exact(mdp);
  Normalization out{mdp, opt.policy, TransformLog{mdp.gamma(), {}}, opt.unique};
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    const double delta = -opt.values[static_cast<Eigen::Index>(s)];
    out.mdp = apply_L(out.mdp, s, delta);
    out.log.steps.emplace_back(ShiftStep{s, delta});
  }
  return out;
}

Mdp replay(const Mdp& original, const TransformLog& log) {
  Mdp current = original;
  for (const TransformStep& step : log.steps) {
    if (const auto* l = std::get_if<ShiftStep>(&step)) {
      current = apply_L(current, l->state, l->delta);
    } else {
      const auto& j = std::get<DiscountStep>(step);
      current = apply_J(current, j.state, j.gamma_after, j.forced ? JSafety::forced : JSafety::checked).mdp;
    }
  }
  return current;
}

Mdp invert(const Mdp& transformed, const TransformLog& log) {
  Mdp current = transformed;
  for (auto it = log.steps.rbegin(); it != log.steps.rend(); ++it) {
    if (const auto* l = std::get_if<ShiftStep>(&*it)) {
      current = apply_L(current, l->state, -l->delta);
    } else {
      const auto& j = std::get<DiscountStep>(*it);
      current = apply_J(current, j.state, j.gamma_before, JSafety::forced).mdp;
    }
  }
  return current;
}

ValueVector map_values(const TransformLog& log, const ValueVector& v) {
  ValueVector out = v;
  for (const TransformStep& step : log.steps) {
    if (const auto* l = std::get_if<ShiftStep>(&step)) {
      out = ValueMap::shift(l->state, l->delta).apply(out);
    } else {
      const auto& j = std::get<DiscountStep>(step);
      out = ValueMap::rescale(j.state, (1.0 - j.gamma_before) / (1.0 - j.gamma_after)).apply(out);
    }
  }
  return out;
}

}  // namespace mdpgeo
