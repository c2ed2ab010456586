#include <doctest.h>

#include <random>

#include "nvsim/dynamics.hpp"
#include "oracles.hpp"

using namespace nvsim;
using doctest::Approx;

namespace {

LevelPopulations pure(int level) {
  LevelPopulations p = LevelPopulations::Zero();
  p(level) = 1;
  return p;
}

EsrContext bulk_context(double bz) {
  return make_esr_context({2870.0, 0.0, 2.0028}, {1423.0, 0.0, 2.01}, FieldVector<double>(0, 0, bz));
}

void check_generator(const Generator& g) {
  for (int j = 0; j < kNumLevels; ++j) {
    CHECK(std::abs(g.col(j).sum()) < 1e-15);
    for (int i = 0; i < kNumLevels; ++i)
      if (i != j) CHECK(g(i, j) >= 0);
  }
}

}  // namespace

TEST_CASE("default rates reproduce the two lifetimes") {
  const RateParams rp;
  CHECK(rp.gamma_rad == Approx(1.0 / 23.0).epsilon(1e-15));
  CHECK(rp.k_isc_1 == Approx(0.035262).epsilon(1e-5));
  const Generator g = rate_matrix(rp, false);
  CHECK(-g(kE0, kE0) == Approx(rp.gamma_rad + rp.k_isc_0).epsilon(1e-15));
  CHECK(-g(kEMinus, kEMinus) == Approx(1.0 / 12.7).epsilon(1e-14));
  CHECK(-g(kEPlus, kEPlus) == Approx(1.0 / 12.7).epsilon(1e-14));
}

TEST_CASE("generators conserve probability") {
  const RateParams rp;
  check_generator(rate_matrix(rp, true));
  check_generator(rate_matrix(rp, false));
  const std::array<MicrowaveDrive, 2> drives{
      MicrowaveDrive{2870.0, 5.0, 10.0, Manifold::Ground, Transition::Minus},
      MicrowaveDrive{1423.0, 20.0, 100.0, Manifold::Excited, Transition::Plus}};
  check_generator(rate_matrix(rp, true, drives, bulk_context(0)));
}

TEST_CASE("cw drive rate") {
  MicrowaveDrive d{2875.0, 4.0, 10.0, Manifold::Ground, Transition::Minus};
  CHECK(drive_rate(d, 2870.0) ==
        Approx(1e-3 * 16.0 / 20.0 * oracle::lorentzian(5.0, 10.0)).epsilon(1e-14));
  const Generator g = rate_matrix(RateParams{}, true, std::span<const MicrowaveDrive>(&d, 1),
                                  bulk_context(0));
  CHECK(g(kG0, kGMinus) == Approx(drive_rate(d, 2870.0)));
  CHECK(g(kGMinus, kG0) == Approx(drive_rate(d, 2870.0)));
  CHECK(g(kGPlus, kG0) == 0.0);

  // Far tail: more than 16 FWHM away the rate drops below 1e-3 of the peak.
  MicrowaveDrive far = d;
  far.frequency = 2870.0 + 16.01 * d.linewidth_fwhm;
  MicrowaveDrive on = d;
  on.frequency = 2870.0;
  CHECK(drive_rate(far, 2870.0) < 1e-3 * drive_rate(on, 2870.0));
}

TEST_CASE("drive without transition frequencies is rejected") {
  MicrowaveDrive d{2870.0, 4.0, 10.0, Manifold::Ground, Transition::Minus};
  CHECK_THROWS_AS(rate_matrix(RateParams{}, true, std::span<const MicrowaveDrive>(&d, 1), std::nullopt),
                  InvalidInput);
  d.linewidth_fwhm = 0;
  CHECK_THROWS_AS(d.validate(), InvalidInput);
}

TEST_CASE("rate parameter validation") {
  RateParams rp;
  rp.branch_0 = 1.5;
  CHECK_THROWS_AS(rp.validate(), InvalidInput);
  rp = RateParams{};
  rp.k_isc_0 = 0.1;
  CHECK_THROWS_AS(rp.validate(), InvalidInput);
  rp = RateParams{};
  rp.gamma_s = -1;
  CHECK_THROWS_AS(rp.validate(), InvalidInput);
}

TEST_CASE("evolve") {
  const RateParams rp;
  const Generator dark = rate_matrix(rp, false);
  SUBCASE("zero duration is the identity") {
    const LevelPopulations p = thermal_ground();
    CHECK(evolve(p, dark, 0.0) == p);
  }
  SUBCASE("pure e0 decays with 23 ns") {
    for (double t : {1.0, 10.0, 23.0, 50.0}) {
      const auto p = evolve(pure(kE0), dark, t);
      CHECK(std::abs(p(kE0) - std::exp(-t / 23.0)) < 1e-6);
    }
    CHECK(std::abs(evolve(pure(kE0), dark, 10.0)(kE0) - 0.647405) < 1e-6);
  }
  SUBCASE("agrees with the matrix exponential") {
    const Generator laser = rate_matrix(rp, true);
    for (double t : {0.3, 7.0, 150.0, 2000.0}) {
      const LevelPopulations ref = oracle::propagate(laser, thermal_ground(), t);
      CHECK((evolve(thermal_ground(), laser, t) - ref).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SUBCASE("long evolution conserves probability") {
    const auto p = evolve(pure(kEMinus), rate_matrix(rp, true), 10000.0);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
    CHECK(p.minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(evolve(pure(kE0), dark, -1.0), InvalidInput);
  Generator bad = dark;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(evolve(pure(kE0), bad, 1.0), InvalidInput);
}

TEST_CASE("steady state") {
  const RateParams rp;
  const Generator laser = rate_matrix(rp, true);
  const auto p = steady_state(laser);
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  CHECK(p(kGPlus) + p(kGMinus) + p(kEPlus) + p(kEMinus) < 1e-6);
  CHECK(polarization(p) > 0.99);
  const LevelPopulations late = oracle::propagate(laser, thermal_ground(), 1e5);
  CHECK((p - late).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((laser * p).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(steady_state(rate_matrix(rp, false)), DegenerateSteadyState);
}

TEST_CASE("resonant cw drive lowers the photoluminescence") {
  const RateParams rp;
  const auto ctx = bulk_context(0);
  const double bright = pl_rate(steady_state(rate_matrix(rp, true)), rp);
  for (Manifold m : {Manifold::Ground, Manifold::Excited}) {
    const MicrowaveDrive d{transition_frequency(ctx, m, Transition::Minus), 5.0, 10.0, m,
                           Transition::Minus};
    const double dim = pl_rate(steady_state(rate_matrix(rp, true, std::span(&d, 1), ctx)), rp);
    CHECK(dim < bright);
  }
}

TEST_CASE("photoluminescence rate") {
  const RateParams rp;
  CHECK(pl_rate(pure(kE0), rp) == Approx(1.0 / 23.0).epsilon(1e-15));
  CHECK(pl_rate(thermal_ground(), rp) == 0.0);
  const LevelPopulations a = pure(kEMinus), b = pure(kSinglet);
  CHECK(pl_rate(0.5 * (a + b), rp) == Approx(0.5 * (pl_rate(a, rp) + pl_rate(b, rp))));
}

TEST_CASE("polarization") {
  CHECK(polarization(thermal_ground()) == Approx(-1.0 / 3.0));
  CHECK(polarization(pure(kG0)) == 1.0);
  CHECK(polarization(pure(kGMinus)) == -1.0);
  CHECK_THROWS_AS(polarization(pure(kE0)), UndefinedPolarization);
}

TEST_CASE("Rabi transfer") {
  CHECK(std::abs(rabi_transfer(200.0, 0.0, 2.5) - 1.0) < 1e-12);
  CHECK(std::abs(rabi_transfer(200.0, 0.0, 5.0)) < 1e-12);
  // Delta = Omega: generalized pi time 1 / (2 sqrt 2 Omega).
  const double t = 1e3 / (2.0 * std::sqrt(2.0) * 50.0);
  CHECK(rabi_transfer(50.0, 50.0, t) == Approx(0.5).epsilon(1e-12));

  MicrowaveDrive d{2880.0, 30.0, 10.0, Manifold::Ground, Transition::Minus};
  std::vector<double> grid;
  for (int k = 0; k <= 200; ++k) grid.push_back(0.1 * k);
  const auto curve = rabi_curve(d, 2870.0, grid);
  for (std::size_t k = 0; k < grid.size(); ++k)
    CHECK(std::abs(curve[k] - oracle::rabi(30.0, 10.0, grid[k])) < 1e-12);
}

TEST_CASE("eigenbasis generator with pure spin states equals the spin-basis generator") {
  RateParams rp;
  rp.branch_0 = 0.8;
  rp.k_isc_0 = 0.004;
  Matrix3c<double> identity_order = Matrix3c<double>::Zero();
  identity_order(kMsZeroIndex, 0) = identity_order(kMsPlusIndex, 1) = identity_order(kMsMinusIndex, 2) = 1.0;
  for (bool laser : {true, false}) {
    const Generator a = rate_matrix_eigenbasis(rp, laser, identity_order, identity_order);
    CHECK((a - rate_matrix(rp, laser)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("eigenbasis generator stays a generator for mixed states") {
  const SpinParams<double> gs{2870.0, 3.0, 2.0028}, es{1423.0, 20.0, 2.01};
  const FieldVector<double> b(30.0, -10.0, 480.0);
  const auto g = diagonalize(build_hamiltonian(gs, b)).states;
  const auto e = diagonalize(build_hamiltonian(es, b)).states;
  check_generator(rate_matrix_eigenbasis(RateParams{}, true, g, e));
}
