#include "mdpgeo/gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mdpgeo/solvers.hpp"

namespace mdpgeo {

std::string_view to_string(Structure s) noexcept {
  switch (s) {
    case Structure::dense: return "dense";
    case Structure::sparse: return "sparse";
    case Structure::planted_optimal: return "planted_optimal";
    case Structure::periodic_optimal: return "periodic_optimal";
    case Structure::wielandt: return "wielandt";
  }
  return "dense";
}

Structure parse_structure(std::string_view name) {
  for (Structure s : {Structure::dense, Structure::sparse, Structure::planted_optimal, Structure::periodic_optimal,
                      Structure::wielandt}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorKind::parse, "unknown structure '" + std::string(name) + "'");
}

void check_spec(const GenSpec& spec) {
  if (spec.n_states == 0) throw Error(ErrorKind::domain, "n_states must be positive");
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0)) throw Error(ErrorKind::domain, "gamma must lie in (0,1)");
  if (spec.min_actions == 0 || spec.min_actions > spec.max_actions) {
    throw Error(ErrorKind::domain, "actions per state must be a range [min, max] with min >= 1");
  }
  if (spec.structure == Structure::sparse && (spec.sparse_k == 0 || spec.sparse_k > spec.n_states)) {
    throw Error(ErrorKind::domain, "sparse structure needs 1 <= k <= n_states");
  }
  if (spec.sparse_k > spec.n_states) throw Error(ErrorKind::domain, "sparse_k exceeds n_states");
  const bool planted = spec.structure == Structure::planted_optimal || spec.structure == Structure::periodic_optimal ||
                       spec.structure == Structure::wielandt;
  if (planted && !(spec.beta > 0.0 && spec.beta <= 0.25)) {
    throw Error(ErrorKind::domain, "beta must lie in (0, 0.25]");
  }
  if (spec.structure == Structure::wielandt && spec.n_states < 2) {
    throw Error(ErrorKind::domain, "wielandt structure needs at least 2 states");
  }
}

namespace {

double round_reward(double r) { return std::round(r * 1e6) / 1e6; }

Eigen::VectorXd dense_row(Rng& rng, std::size_t n) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  // 1 - U lies in (0, 1], so every entry is positive.
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 1.0 - rng.uniform();
  return p / p.sum();
}

Eigen::VectorXd sparse_row(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> states(n);
  std::iota(states.begin(), states.end(), std::size_t{0});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(states[i], states[i + static_cast<std::size_t>(rng.below(n - i))]);
    const double w = 1.0 - rng.uniform();
    p[static_cast<Eigen::Index>(states[i])] = w;
    total += w;
  }
  return p / total;
}

Eigen::VectorXd random_row(Rng& rng, std::size_t n, std::size_t k) {
  return k == 0 || k >= n ? dense_row(rng, n) : sparse_row(rng, n, k);
}

std::string action_id(std::size_t s, std::size_t k) { return "s" + std::to_string(s) + "a" + std::to_string(k); }

Mdp generate_random(const GenSpec& spec, Rng& rng) {
  const std::size_t k = spec.structure == Structure::sparse ? spec.sparse_k : 0;
  std::vector<Action> actions;
  for (std::size_t s = 0; s < spec.n_states; ++s) {
    const std::size_t count = rng.between(spec.min_actions, spec.max_actions);
    for (std::size_t j = 0; j < count; ++j) {
      Eigen::VectorXd p = random_row(rng, spec.n_states, k);
      actions.push_back({action_id(s, j), s, std::move(p), round_reward(rng.uniform())});
    }
  }
  return Mdp(spec.n_states, spec.gamma, std::move(actions));
}

Eigen::VectorXd planted_row(const GenSpec& spec, Rng& rng, std::size_t s) {
  const std::size_t n = spec.n_states;
  const auto at = [](std::size_t i) { return static_cast<Eigen::Index>(i); };
  Eigen::VectorXd p = Eigen::VectorXd::Zero(at(n));
  switch (spec.structure) {
    case Structure::periodic_optimal:
      p[at((s + 1) % n)] = 1.0;
      return p;
    case Structure::wielandt:
      if (s + 1 < n) {
        p[at(s + 1)] = 1.0;
      } else {
        const double q = rng.uniform(0.2, 0.8);
        p[0] = q;
        p[1] += 1.0 - q;
      }
      return p;
    default:
      if (spec.sparse_k == 0 || n == 1) return dense_row(rng, n);
      {
        const double q = rng.uniform(0.2, 0.8);
        p[at(s)] = q;
        p[at((s + 1) % n)] += 1.0 - q;
      }
      return p;
  }
}

// Values are planted first: V*(s) = 0.5 / (1 - gamma) + w(s), w in [0, 0.25).
// Planted rewards make V* a fixed point; every other action loses a gap of at
// least beta, so every reward stays in [0, 1].
Mdp generate_planted(const GenSpec& spec, Rng& rng, double beta) {
  const std::size_t n = spec.n_states;
  const double g = spec.gamma;
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = 0.25 * rng.uniform();
  const Eigen::VectorXd vstar = Eigen::VectorXd::Constant(w.size(), 0.5 / (1.0 - g)) + w;

  std::vector<Action> actions;
  for (std::size_t s = 0; s < n; ++s) {
    const double vs = vstar[static_cast<Eigen::Index>(s)];
    Eigen::VectorXd p = planted_row(spec, rng, s);
    const double r = vs - g * p.dot(vstar);
    actions.push_back({action_id(s, 0), s, std::move(p), round_reward(r)});

    const std::size_t count = rng.between(spec.min_actions, spec.max_actions);
    for (std::size_t j = 1; j < count; ++j) {
      Eigen::VectorXd q = random_row(rng, n, spec.sparse_k);
      const double gap = beta + rng.uniform() * (0.25 - beta) * 0.2;
      const double rq = vs - g * q.dot(vstar) - gap;
      actions.push_back({action_id(s, j), s, std::move(q), round_reward(std::clamp(rq, 0.0, 1.0))});
    }
  }
  return Mdp(n, g, std::move(actions));
}

}  // namespace

Policy planted_policy(const Mdp& mdp) { return first_action_policy(mdp); }

Mdp generate(const GenSpec& spec) {
  check_spec(spec);
  Rng rng(spec.seed);
  if (spec.structure == Structure::dense || spec.structure == Structure::sparse) {
    Mdp mdp = generate_random(spec, rng);
    validate(mdp);
    return mdp;
  }

  double beta = spec.beta;
  for (int attempt = 0; attempt < 10; ++attempt) {
    Mdp mdp = generate_planted(spec, rng, beta);
    validate(mdp);
    const ExactSolution opt = solve_exact(mdp);
    if (opt.policy.same_actions(planted_policy(mdp)) && opt.delta >= spec.beta / 2) return mdp;
    beta = std::min(0.25, 2.0 * beta);
  }
  throw Error(ErrorKind::consistency, "could not plant an optimal policy after 10 attempts");
}

Mdp random_two_state(Rng& rng, std::size_t max_actions) {
  if (max_actions < 3) throw Error(ErrorKind::domain, "two-state instances need room for 3 actions");
  const std::size_t total = rng.between(3, max_actions);
  const std::size_t first = rng.between(1, total - 1);
  const double gamma = rng.uniform(0.5, 0.99);
  std::vector<Action> actions;
  for (std::size_t j = 0; j < total; ++j) {
    const std::size_t s = j < first ? 0 : 1;
    const std::size_t k = j < first ? j : j - first;
    actions.push_back({action_id(s, k), s, dense_row(rng, 2), round_reward(rng.uniform())});
  }
  return Mdp(2, gamma, std::move(actions));
}

}  // namespace mdpgeo
