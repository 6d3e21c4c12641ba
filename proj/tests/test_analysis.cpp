#include "doctest.h"

#include <random>

#include "mdpgeo/analysis.hpp"
#include "mdpgeo/gen.hpp"
#include "mdpgeo/solvers.hpp"
#include "mdpgeo/transforms.hpp"
#include "oracle.hpp"

using namespace mdpgeo;

namespace {

Eigen::MatrixXd cycle(std::size_t n) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>((i + 1) % n)) = 1.0;
  return p;
}

Mdp swap_mdp(double gamma, bool with_alternatives) {
  Eigen::VectorXd to0(2), to1(2);
  to0 << 1.0, 0.0;
  to1 << 0.0, 1.0;
  std::vector<Action> acts{Action{"a", 0, to1, 1.0}, Action{"b", 1, to0, 0.0}};
  if (with_alternatives) acts.push_back(Action{"c", 0, to0, 0.2});
  return Mdp(2, gamma, acts);
}

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::io;
}

oracle::Mat to_mat(const Eigen::MatrixXd& p) {
  oracle::Mat out(static_cast<std::size_t>(p.rows()), oracle::Vec(static_cast<std::size_t>(p.cols())));
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = p(i, j);
  return out;
}

}  // namespace

TEST_CASE("primitivity exponent and omega") {
  CHECK(wielandt_bound(5) == 17);
  CHECK_FALSE(primitivity(cycle(2)).has_value());

  Eigen::MatrixXd mix = Eigen::MatrixXd::Constant(2, 2, 0.5);
  const auto p = primitivity(mix);
  REQUIRE(p);
  CHECK(p->exponent == 1);
  CHECK(p->omega == doctest::Approx(0.5));

  // Cycle with a shortcut from the last state back to state 1.
  for (std::size_t n : {3u, 4u, 5u, 6u}) {
    Eigen::MatrixXd w = cycle(n);
    const auto last = static_cast<Eigen::Index>(n - 1);
    w(last, 0) = 0.5;
    w(last, 1) = 0.5;
    const auto pw = primitivity(w);
    REQUIRE(pw);
    CHECK(pw->exponent == n * n - 2 * n + 2);
    CHECK(oracle::primitivity_exponent(to_mat(w), 100) == pw->exponent);
    CHECK(pw->omega > 0.0);
  }

  // A self-loop on a cycle only needs 2n - 2 steps.
  Eigen::MatrixXd loop = cycle(5);
  loop(0, 0) = 0.5;
  loop(0, 1) = 0.5;
  REQUIRE(primitivity(loop));
  CHECK(primitivity(loop)->exponent == 8);

  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  CHECK(kind_of([&] { (void)primitivity(bad); }) == ErrorKind::precondition);
  CHECK(kind_of([&] { (void)primitivity(Eigen::MatrixXd::Constant(2, 3, 1.0 / 3)); }) == ErrorKind::precondition);
}

TEST_CASE("primitivity agrees with the boolean oracle on random sparse chains") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto i_ = static_cast<Eigen::Index>(i);
      p(i_, static_cast<Eigen::Index>(rng() % n)) += 0.5;
      p(i_, static_cast<Eigen::Index>(rng() % n)) += 0.5;
    }
    const auto got = primitivity(p);
    const std::size_t ref = oracle::primitivity_exponent(to_mat(p), wielandt_bound(n));
    if (ref == 0) {
      CHECK_FALSE(got.has_value());
    } else {
      REQUIRE(got);
      CHECK(got->exponent == ref);
      Eigen::MatrixXd power = p;
      for (std::size_t k = 1; k < ref; ++k) power = power * p;
      CHECK(got->omega == doctest::Approx(power.minCoeff()));
    }
  }
}

TEST_CASE("lazy exponent") {
  CHECK(lazy_exponent(cycle(2)) == std::optional<std::size_t>{1});
  CHECK(lazy_exponent(cycle(4)) == std::optional<std::size_t>{3});
  CHECK_FALSE(lazy_exponent(Eigen::MatrixXd::Identity(3, 3)).has_value());
}

TEST_CASE("certificate on the mixing fixture") {
  const Mdp m = oracle::m2_mix();
  const RunTrace trace = value_iteration(m, ViConfig::standard(StopRule::time(10)));
  const ConvergenceCertificate cert = certify(m, trace);
  CHECK(cert.exponent == 1);
  CHECK(cert.omega == doctest::Approx(0.5));
  CHECK(cert.delta == doctest::Approx(0.01));
  CHECK(cert.holds);
  CHECK(cert.margin >= 0.0);
  CHECK(cert.tau > 0.0);
  CHECK(cert.tau < 1.0);
  CHECK(cert.gamma_eff == doctest::Approx(0.9));
  CHECK(cert.predicted_pi_iters == doctest::Approx(4.0 / 0.1));
  CHECK(cert.trace_digest.size() == 64);
  CHECK(cert.predicted_vi_iters ==
        doctest::Approx(predicted_vi_iterations(0.9, 1e-6, cert.tau, 1)));
}

TEST_CASE("certificate refuses periodic or tied optima and short traces") {
  const Mdp swap = swap_mdp(0.9, true);
  const RunTrace trace = value_iteration(swap, ViConfig::standard(StopRule::time(10)));
  CHECK(kind_of([&] { (void)certify(swap, trace); }) == ErrorKind::assumption_violated);

  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  const Mdp tied(2, 0.9, {Action{"a", 0, half, 1.0}, Action{"b", 0, half, 1.0}, Action{"c", 1, half, 0.0}});
  const RunTrace t2 = value_iteration(tied, ViConfig::standard(StopRule::time(5)));
  CHECK(kind_of([&] { (void)certify(tied, t2); }) == ErrorKind::assumption_violated);

  const Mdp w = generate(GenSpec{4, 1, 2, 0.9, 3, Structure::wielandt, 0, 0.1});
  const RunTrace short_trace = value_iteration(w, ViConfig::standard(StopRule::time(3)));
  CHECK(kind_of([&] { (void)certify(w, short_trace); }) == ErrorKind::precondition);

  ViConfig cfg = ViConfig::standard(StopRule::time(20));
  cfg.alpha = 0.5;
  const RunTrace damped = value_iteration(oracle::m2_mix(), cfg);
  CHECK(kind_of([&] { (void)certify(oracle::m2_mix(), damped); }) == ErrorKind::precondition);
}

TEST_CASE("block contraction holds on planted instances") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Mdp m = generate(GenSpec{5, 2, 3, 0.9, seed, Structure::planted_optimal, 0, 0.05});
    const RunTrace trace = value_iteration(m, ViConfig::standard(StopRule::time(30)));
    const ConvergenceCertificate cert = certify(m, trace);
    CHECK(cert.exponent == 1);
    CHECK(cert.holds);
    CHECK(cert.tau < 1.0);
    CHECK(std::pow(m.gamma(), static_cast<double>(cert.exponent)) * cert.tau < 1.0);

    const Mdp ring = generate(GenSpec{5, 2, 3, 0.9, seed, Structure::planted_optimal, 2, 0.05});
    const RunTrace rt = value_iteration(ring, ViConfig::standard(StopRule::time(30)));
    const ConvergenceCertificate rc = certify(ring, rt);
    CHECK(rc.exponent > 1);
    CHECK(rc.holds);
  }
}

TEST_CASE("iteration prediction formula") {
  const double g = 0.9, eps = 1e-6, tau = 0.5;
  const double expected = (std::log(1e6) + std::log(10.0)) / (std::log(1 / g) + std::log(2.0) / 3.0);
  CHECK(predicted_vi_iterations(g, eps, tau, 3) == doctest::Approx(expected));
}

TEST_CASE("empirical rate") {
  const Mdp mix = oracle::m2_mix();
  ViConfig cfg = ViConfig::standard(StopRule::time(40), InitKind::given);
  cfg.v0 = Eigen::Vector2d(100.0, 0.0);
  const RunTrace t = value_iteration(mix, cfg);
  const ExactSolution opt = solve_exact(mix);
  CHECK(empirical_rate(t, 0, opt.values) < 0.9);

  const Mdp swap = swap_mdp(0.9, false);
  cfg.v0 = Eigen::Vector2d(3.0, -1.0);
  const RunTrace st = value_iteration(swap, cfg);
  const ExactSolution sopt = solve_exact(swap);
  CHECK(empirical_rate(st, 5, sopt.values) == doctest::Approx(0.9).epsilon(1e-9));
  const RunTrace nt = value_iteration(normalize(swap).mdp, cfg);
  CHECK(empirical_rate(nt, 5) == doctest::Approx(0.9).epsilon(1e-9));

  const Mdp flat(1, 0.9, {Action{"x", 0, Eigen::VectorXd::Ones(1), 1.0}});
  const RunTrace ft = value_iteration(flat, ViConfig::standard(StopRule::time(20)));
  CHECK(kind_of([&] { (void)empirical_rate(ft, 0); }) == ErrorKind::precondition);
}

TEST_CASE("learning-rate certificate") {
  const Mdp m = oracle::m2_mix();
  ViConfig cfg = ViConfig::standard(StopRule::time(20));
  cfg.alpha = 0.5;
  const RunTrace trace = value_iteration(m, cfg);
  const ConvergenceCertificate cert = certify_alpha(m, trace, 0.5);
  REQUIRE(cert.alpha);
  CHECK(cert.alpha->exponent <= 1);
  CHECK(cert.alpha->holds);
  CHECK(cert.alpha->margin > 0.0);
  CHECK(cert.alpha->contraction < 1.0);
  CHECK(cert.holds == cert.alpha->holds);
  CHECK(kind_of([&] { (void)certify_alpha(m, trace, 1.0); }) == ErrorKind::domain);
  CHECK(kind_of([&] { (void)certify_alpha(m, trace, 0.3); }) == ErrorKind::precondition);

  const Mdp ring = generate(GenSpec{5, 2, 3, 0.9, 4, Structure::planted_optimal, 2, 0.05});
  cfg.alpha = 0.7;
  cfg.stop = StopRule::time(40);
  const ConvergenceCertificate rc = certify_alpha(ring, value_iteration(ring, cfg), 0.7);
  CHECK(rc.alpha->exponent <= 4);
  CHECK(rc.alpha->holds);
}

TEST_CASE("advantage-difference bound") {
  const Mdp m = oracle::m2_mix();
  const LemmaReport flat = check_lemma_adv_span(m, 0, 2, ValueVector::Constant(2, 4.0));
  CHECK(flat.lhs == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(flat.holds);
  const LemmaReport same = check_lemma_adv_span(m, 1, 1, Eigen::Vector2d(1.0, -3.0));
  CHECK(same.lhs == 0.0);
  CHECK(same.same_state);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int k = 0; k < 10000; ++k) {
    const Mdp g = generate(GenSpec{3, 1, 3, 0.9, static_cast<std::uint64_t>(k % 50), Structure::sparse, 2, 0.05});
    ValueVector v(3);
    for (int i = 0; i < 3; ++i) v[i] = u(rng);
    const ActionId a1 = rng() % g.n_actions();
    const ActionId a2 = rng() % g.n_actions();
    const LemmaReport r = check_lemma_adv_span(g, a1, a2, v);
    CHECK(r.holds);
  }

  // Tight case: all mass of one action on the argmax, the other on the argmin.
  const Mdp tight(3, 0.9,
                  {Action{"a", 0, Eigen::Vector3d(0.0, 1.0, 0.0), 0.0}, Action{"b", 0, Eigen::Vector3d(0.0, 0.0, 1.0), 0.0},
                   Action{"c", 1, Eigen::Vector3d(0.0, 1.0, 0.0), 0.0}, Action{"d", 2, Eigen::Vector3d(0.0, 0.0, 1.0), 0.0}});
  const LemmaReport t = check_lemma_adv_span(tight, 0, 1, Eigen::Vector3d(0.0, 1.0, -1.0));
  CHECK(t.lhs == doctest::Approx(t.bound));
  CHECK(t.holds);
}

TEST_CASE("mixing weight lower bound") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Mdp m = generate(GenSpec{4, 2, 3, 0.9, seed, Structure::planted_optimal, 0, 0.05});
    const ExactSolution opt = solve_exact(m);
    const RunTrace trace = value_iteration(m, ViConfig::standard(StopRule::time(40)));
    const MixingReport rep = check_mixing_bound(m, trace, opt);
    CHECK(rep.violations == 0);
  }
}
