#include "doctest.h"

#include <algorithm>
#include <random>

#include "mdpgeo/gen.hpp"
#include "mdpgeo/solvers.hpp"
#include "mdpgeo/transforms.hpp"
#include "oracle.hpp"

using namespace mdpgeo;

namespace {

ValueVector random_values(std::mt19937_64& rng, std::size_t n, double scale = 10.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ValueVector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return v;
}

Mdp uniform_pair(double gamma) {
  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  return Mdp(2, gamma, {Action{"a", 0, half, 0.3}, Action{"b", 1, half, 0.7}});
}

}  // namespace

TEST_CASE("value shift keeps advantages and moves values at one state") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Mdp m = generate(GenSpec{4, 1, 3, 0.9, seed, Structure::dense, 0, 0.05});
    const StateId s = seed % 4;
    const double delta = shift(rng);
    const Mdp shifted = apply_L(m, s, delta);
    for (int k = 0; k < 5; ++k) {
      const ValueVector v = random_values(rng, 4);
      const ValueVector w = ValueMap::shift(s, delta).apply(v);
      for (ActionId a = 0; a < m.n_actions(); ++a) {
        CHECK(std::abs(advantage(m, a, v) - advantage(shifted, a, w)) <= 1e-9);
      }
    }
    const Policy pi = first_action_policy(m);
    const ValueVector before = evaluate_policy(m, pi);
    const ValueVector after = evaluate_policy(shifted, pi);
    CHECK((after - ValueMap::shift(s, delta).apply(before)).cwiseAbs().maxCoeff() <= 1e-9);
  }
  const Mdp m = oracle::m2();
  CHECK(apply_L(m, 0, 0.0) == m);
  const Mdp loops(1, 0.9, {Action{"x", 0, Eigen::VectorXd::Ones(1), 0.0}});
  CHECK(apply_L(loops, 0, 1.0).action(0).reward == doctest::Approx(1.0 - 0.9));
}

TEST_CASE("normalization of the mixing fixture") {
  const Mdp m = oracle::m2_mix();
  const Normalization norm = normalize(m);
  CHECK(norm.unique);
  CHECK(norm.mdp.action(m.id_of("a1")).reward == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(norm.mdp.action(m.id_of("b1")).reward == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(norm.mdp.action(m.id_of("a2")).reward == doctest::Approx(-0.01));
  CHECK(norm.mdp.action(m.id_of("b2")).reward == doctest::Approx(-0.89));

  const Normalization again = normalize(norm.mdp);
  for (ActionId a = 0; a < m.n_actions(); ++a) {
    CHECK(std::abs(again.mdp.action(a).reward - norm.mdp.action(a).reward) <= 1e-9);
  }
}

TEST_CASE("normal form on random instances") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Mdp m = generate(GenSpec{5, 1, 3, 0.95, seed, Structure::dense, 0, 0.05});
    const Normalization norm = normalize(m);
    const oracle::Optimum opt = oracle::brute_force(m);
    REQUIRE(norm.optimal.choice == opt.policy);
    for (ActionId a = 0; a < m.n_actions(); ++a) {
      const bool optimal = norm.optimal.choice[m.action(a).state] == a;
      if (optimal) {
        CHECK(std::abs(norm.mdp.action(a).reward) < 1e-8);
      } else if (opt.delta > 1e-9) {
        CHECK(norm.mdp.action(a).reward < 0.0);
      }
    }
    CHECK(replay(m, norm.log) == norm.mdp);
  }
}

TEST_CASE("discount change preserves advantages and spans") {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Mdp m = generate(GenSpec{4, 1, 3, 0.9, seed, Structure::dense, 0, 0.05});
    const StateId s = seed % 4;
    const auto margin = safe_discount_margin(m, s);
    REQUIRE(margin);
    std::uniform_real_distribution<double> frac(0.0, 1.0);
    const double gamma_new = m.gamma() - frac(rng) * *margin;
    const DiscountChange j = apply_J(m, s, gamma_new);
    CHECK(j.mdp.gamma() == gamma_new);
    CHECK_NOTHROW(validate_geometry(j.mdp));
    for (int k = 0; k < 5; ++k) {
      const ValueVector v = random_values(rng, 4);
      const ValueVector w = j.values.apply(v);
      CHECK(std::abs(span(w) - span(v)) <= 1e-9);
      for (ActionId a = 0; a < m.n_actions(); ++a) {
        CHECK(std::abs(advantage(m, a, v) - advantage(j.mdp, a, w)) <= 1e-9);
      }
    }
    const Policy pi = first_action_policy(m);
    const ValueVector mapped = j.values.apply(evaluate_policy(m, pi));
    CHECK((evaluate_policy(j.mdp, pi) - mapped).cwiseAbs().maxCoeff() <= 1e-8);

    const Mdp back = apply_J(j.mdp, s, m.gamma(), JSafety::forced).mdp;
    for (ActionId a = 0; a < m.n_actions(); ++a) {
      CHECK((back.action(a).probs - m.action(a).probs).cwiseAbs().maxCoeff() <= 1e-9);
    }
    ++checked;
  }
  CHECK(checked == 60);
}

TEST_CASE("discount change identity, domain and safety") {
  const Mdp m = oracle::m2_mix();
  CHECK(apply_J(m, 0, 0.9).mdp == m);
  CHECK_THROWS_AS(apply_J(m, 0, 1.0), Error);
  CHECK_THROWS_AS(apply_J(m, 0, 0.0), Error);
  // Foreign coefficients at state 0 are 0.45 (b1) and 0 (b2): any drop is unsafe.
  try {
    (void)apply_J(m, 0, 0.8);
    FAIL("expected unsafe transform");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsafe_transform);
  }
  CHECK_NOTHROW(apply_J(m, 0, 0.8, JSafety::forced));
}

TEST_CASE("effective discount factor") {
  const EffectiveGamma m2 = effective_gamma(oracle::m2());
  CHECK(m2.gamma_eff == doctest::Approx(0.9));
  CHECK_FALSE(m2.clamped);
  CHECK(m2.log.steps.empty());

  const EffectiveGamma uni = effective_gamma(uniform_pair(0.9));
  CHECK(uni.gamma_eff == kMinGamma);
  CHECK(uni.clamped);
}

TEST_CASE("effective discount factor matches the per-state minimum sum and ignores order") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Mdp m = generate(GenSpec{4, 1, 3, 0.97, seed, Structure::dense, 0, 0.05});
    double expected = m.gamma();
    for (StateId i = 0; i < 4; ++i) {
      double lo = std::numeric_limits<double>::infinity();
      for (const Action& a : m.actions()) {
        if (a.state != i) lo = std::min(lo, m.gamma() * a.probs[static_cast<Eigen::Index>(i)]);
      }
      expected -= std::max(0.0, lo);
    }
    const EffectiveGamma eff = effective_gamma(m);
    CHECK(eff.gamma_eff == doctest::Approx(std::max(kMinGamma, expected)).epsilon(1e-12));
    CHECK(eff.gamma_eff <= m.gamma());

    std::vector<StateId> order{3, 1, 0, 2};
    const EffectiveGamma shuffled = effective_gamma(m, order);
    CHECK(shuffled.gamma_eff == doctest::Approx(eff.gamma_eff).epsilon(1e-12));

    CHECK(replay(m, eff.log) == eff.transformed);
    const Mdp back = invert(eff.transformed, eff.log);
    for (ActionId a = 0; a < m.n_actions(); ++a) {
      CHECK((back.action(a).probs - m.action(a).probs).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(std::abs(back.action(a).reward - m.action(a).reward) <= 1e-9);
    }
  }
  // A deterministic action into every state leaves gamma alone.
  const Mdp det = generate(GenSpec{3, 1, 1, 0.8, 1, Structure::periodic_optimal, 0, 0.1});
  CHECK(effective_gamma(det).gamma_eff == 0.8);
}

TEST_CASE("transform logs replay and invert") {
  const Mdp m = generate(GenSpec{3, 2, 2, 0.9, 4, Structure::dense, 0, 0.05});
  TransformLog log{m.gamma(), {}};
  Mdp cur = apply_L(m, 1, 2.5);
  log.steps.emplace_back(ShiftStep{1, 2.5});
  const double g2 = cur.gamma() - 0.5 * *safe_discount_margin(cur, 2);
  cur = apply_J(cur, 2, g2).mdp;
  log.steps.emplace_back(DiscountStep{2, m.gamma(), g2, false});
  cur = apply_L(cur, 0, -1.0);
  log.steps.emplace_back(ShiftStep{0, -1.0});

  CHECK(replay(m, log) == cur);
  const Mdp back = invert(cur, log);
  for (ActionId a = 0; a < m.n_actions(); ++a) {
    CHECK((back.action(a).probs - m.action(a).probs).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(back.action(a).reward - m.action(a).reward) <= 1e-9);
  }
  const Policy pi = first_action_policy(m);
  const ValueVector mapped = map_values(log, evaluate_policy(m, pi));
  CHECK((evaluate_policy(cur, pi) - mapped).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("policy iteration and value iteration follow the same path on transformed MDPs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mdp m = generate(GenSpec{4, 2, 3, 0.9, seed, Structure::dense, 0, 0.05});
    const Normalization norm = normalize(m);
    const EffectiveGamma eff = effective_gamma(m);
    const Policy start = first_action_policy(m);
    const auto a = policy_iteration(m, start);
    const auto b = policy_iteration(norm.mdp, start);
    const auto c = policy_iteration(eff.transformed, start);
    REQUIRE(a.steps.size() == b.steps.size());
    REQUIRE(a.steps.size() == c.steps.size());
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
      CHECK(a.steps[k].choice == b.steps[k].choice);
      CHECK(a.steps[k].choice == c.steps[k].choice);
    }

    ViConfig cfg = ViConfig::standard(StopRule::time(40));
    const RunTrace ta = value_iteration(m, cfg);
    cfg.init = InitKind::given;
    cfg.v0 = map_values(norm.log, ValueVector::Zero(4));
    const RunTrace tb = value_iteration(norm.mdp, cfg);
    for (std::size_t t = 0; t < ta.records.size(); ++t) {
      CHECK(ta.records[t].greedy.choice == tb.records[t].greedy.choice);
    }
  }
}
