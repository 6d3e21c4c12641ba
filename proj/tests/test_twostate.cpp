#include "doctest.h"

#include "mdpgeo/gen.hpp"
#include "mdpgeo/solvers.hpp"
#include "mdpgeo/twostate.hpp"
#include "oracle.hpp"

using namespace mdpgeo;

TEST_CASE("formed policies of the deterministic fixture") {
  const Mdp m = oracle::m2();
  const std::vector<Policy> formed = formed_policies(m, ActionSet::all(m));
  REQUIRE(formed.size() == 4);
  for (const Policy& pi : formed) {
    REQUIRE(pi.values);
    const oracle::Vec ref = oracle::evaluate(m, pi.choice);
    CHECK((*pi.values)[0] == doctest::Approx(ref[0]));
    CHECK((*pi.values)[1] == doctest::Approx(ref[1]));
  }
  // (a2, b1): 0.68 / 0.19 at state 1.
  CHECK((*formed[2].values)[0] == doctest::Approx(0.68 / 0.19));

  ActionSet one(m.n_actions());
  one.insert(0);
  one.insert(3);
  CHECK(formed_policies(m, one).size() == 1);

  ActionSet half(m.n_actions());
  half.insert(0);
  half.insert(1);
  CHECK_THROWS_AS(formed_policies(m, half), Error);
  CHECK_THROWS_AS(formed_policies(generate(GenSpec{3, 1, 2, 0.9, 1, Structure::dense, 0, 0.05}),
                                  ActionSet(5, true)),
                  Error);
}

TEST_CASE("cross product size") {
  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  std::vector<Action> acts;
  for (int k = 0; k < 3; ++k) acts.push_back(Action{"x" + std::to_string(k), 0, half, 0.1 * k});
  for (int k = 0; k < 2; ++k) acts.push_back(Action{"y" + std::to_string(k), 1, half, 0.2 * k});
  const Mdp m(2, 0.8, acts);
  CHECK(formed_policies(m, ActionSet::all(m)).size() == 6);
}

TEST_CASE("produced actions") {
  for (const Mdp& m : {oracle::m2(), oracle::m2_mix()}) {
    const ActionSet all = ActionSet::all(m);
    const ExactSolution opt = solve_exact(m);
    const std::vector<Policy> only{Policy{opt.policy.choice, opt.values}};
    const ActionSet from_opt = produced_actions(m, only, all);
    CHECK(from_opt.size() == 2);
    for (ActionId a : opt.policy.choice) CHECK(from_opt.contains(a));

    const ActionSet produced = produced_actions(m, formed_policies(m, all), all);
    CHECK(produced.size() <= 3);

    ActionSet current = all;
    while (current.size() > 2) {
      ActionSet next = produced_actions(m, formed_policies(m, current), current);
      REQUIRE(next.size() < current.size());
      current = next;
    }
    for (ActionId a : opt.policy.choice) CHECK(current.contains(a));
  }
}

TEST_CASE("inefficiency certificate on the deterministic fixture") {
  const Mdp m = oracle::m2();
  const InefficiencyCertificate cert = inefficiency_certificate(m, ActionSet::all(m));
  CHECK_FALSE(cert.degenerate);
  CHECK(cert.holds);
  CHECK(cert.min_margin > 0.0);
  CHECK(cert.chain.size() == 4);
  for (const ChainLink& link : cert.chain) {
    CHECK(link.adv_inefficient <= link.adv_weak + 1e-9);
    CHECK(link.adv_weak < link.adv_strong);
    CHECK(link.adv_strong <= link.adv_dominating + 1e-9);
  }
  CHECK(m.action(cert.inefficient).state == cert.state);
  CHECK(m.action(cert.dominating).state == cert.state);
  const ActionSet produced = produced_actions(m, formed_policies(m, ActionSet::all(m)), ActionSet::all(m));
  CHECK_FALSE(produced.contains(cert.inefficient));

  ActionSet two(m.n_actions());
  two.insert(0);
  two.insert(2);
  CHECK_THROWS_AS(inefficiency_certificate(m, two), Error);
}

TEST_CASE("parallel policies are degenerate") {
  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  // Every policy has slope r0 - r1 scaled identically: all rows uniform.
  const Mdp m(2, 0.9, {Action{"a", 0, half, 0.3}, Action{"b", 0, half, 0.3}, Action{"c", 1, half, 0.1}});
  const InefficiencyCertificate cert = inefficiency_certificate(m, ActionSet::all(m));
  CHECK(cert.degenerate);
}

TEST_CASE("certificates on random instances name unproduced actions") {
  Rng rng(99);
  int nondegenerate = 0;
  for (int k = 0; k < 500; ++k) {
    const Mdp m = random_two_state(rng, 12);
    const ActionSet all = ActionSet::all(m);
    const InefficiencyCertificate cert = inefficiency_certificate(m, all);
    if (cert.degenerate) continue;
    ++nondegenerate;
    CHECK(cert.holds);
    CHECK_FALSE(produced_actions(m, formed_policies(m, all), all).contains(cert.inefficient));
  }
  CHECK(nondegenerate > 450);
}

TEST_CASE("policy iteration bound") {
  const PiBoundReport m2 = verify_pi_bound(oracle::m2());
  CHECK(m2.holds);
  CHECK(m2.starts == 4);
  CHECK(m2.max_iterations <= 4);

  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  const Mdp single(2, 0.9, {Action{"a", 0, half, 0.3}, Action{"b", 1, half, 0.1}});
  const PiBoundReport s = verify_pi_bound(single);
  CHECK(s.max_iterations == 1);
  CHECK(s.holds);

  const TwoStateSuite suite = run_two_state_suite(300, 12, 5);
  CHECK(suite.instances == 300);
  CHECK(suite.violations == 0);
  CHECK(suite.worst_ratio <= 1.0);
}
