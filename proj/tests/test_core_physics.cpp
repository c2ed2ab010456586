#include <doctest.h>

#include "nvsim/spin.hpp"
#include "oracles.hpp"

using namespace nvsim;
using doctest::Approx;

namespace {

SpinParams<double> excited() { return {1423.0, 0.0, 2.01}; }
SpinParams<double> ground() { return {2870.0, 0.0, 2.0028}; }

}  // namespace

TEST_CASE("spin-1 operators satisfy the angular momentum algebra") {
  const auto s = spin_operators<double>();
  const std::complex<double> i(0, 1);
  CHECK((s.sx * s.sy - s.sy * s.sx - i * s.sz).norm() < 1e-15);
  CHECK((s.sy * s.sz - s.sz * s.sy - i * s.sx).norm() < 1e-15);
  const Matrix3c<double> casimir = s.sx * s.sx + s.sy * s.sy + s.sz * s.sz;
  CHECK((casimir - 2.0 * Matrix3c<double>::Identity()).norm() < 1e-15);
}

TEST_CASE("hamiltonian matches the element-wise reference") {
  const SpinParams<double> p{2870.0, 7.5, 2.0028};
  const Eigen::Vector3d b(12.0, -30.0, 55.0);
  const auto h = build_hamiltonian(p, b);
  CHECK((h - oracle::nv_hamiltonian(p.d_zfs, p.e_strain, p.g_factor, b)).norm() < 1e-10);
  CHECK(std::abs(h.trace()) < 1e-12);
  CHECK((h - h.adjoint()).norm() == 0.0);
}

TEST_CASE("zero field levels") {
  const auto eig = diagonalize(build_hamiltonian(ground(), FieldVector<double>(0, 0, 0)));
  CHECK(eig.energies(0) == Approx(-2.0 * 2870.0 / 3.0).epsilon(1e-12));
  CHECK(eig.energies(1) == Approx(2870.0 / 3.0).epsilon(1e-12));
  CHECK(eig.energies(2) == Approx(2870.0 / 3.0).epsilon(1e-12));
  CHECK(eig.ms0_index == 0);
  const auto f = transition_frequencies(eig);
  CHECK(f.omega_minus == Approx(2870.0).epsilon(1e-12));
  CHECK(f.omega_plus == Approx(2870.0).epsilon(1e-12));
}

TEST_CASE("strain splits the zero field doublet by 2E") {
  const SpinParams<double> p{2870.0, 5.0, 2.0028};
  const auto f = esr_frequencies(p, FieldVector<double>(0, 0, 0));
  CHECK(f.omega_minus == Approx(2865.0).epsilon(1e-12));
  CHECK(f.omega_plus == Approx(2875.0).epsilon(1e-12));
}

TEST_CASE("eigenvectors diagonalize the hamiltonian") {
  const SpinParams<double> p{1423.0, 12.0, 2.01};
  const auto h = build_hamiltonian(p, FieldVector<double>(40.0, 25.0, 300.0));
  const auto eig = diagonalize(h);
  const Matrix3c<double> residual =
      h * eig.states - eig.states * eig.energies.cast<std::complex<double>>().asDiagonal();
  CHECK(residual.norm() < 1e-9);
  CHECK((eig.states.adjoint() * eig.states - Matrix3c<double>::Identity()).norm() < 1e-12);
}

TEST_CASE("high field approximation, hand-computed") {
  // g mu B = 2.01 * 1.3996245 * 92 = 258.8185 MHz
  const auto f = high_field_approx(excited(), 92.0);
  CHECK(f.omega_minus == Approx(1164.18).epsilon(5e-5));
  CHECK(f.omega_plus == Approx(1681.82).epsilon(5e-5));
  const auto zero = high_field_approx(ground(), 0.0);
  CHECK(zero.omega_minus == 2870.0);
  CHECK(zero.omega_plus == 2870.0);
}

TEST_CASE("full diagonalization equals D -/+ g mu B for axial fields below the crossing") {
  for (double b : {0.0, 1.0, 50.0, 92.0, 250.0, 480.0}) {
    const auto exact = esr_frequencies(excited(), FieldVector<double>(0, 0, b));
    const auto approx = high_field_approx(excited(), b);
    CHECK(std::abs(exact.omega_minus - approx.omega_minus) < 1e-6);
    CHECK(std::abs(exact.omega_plus - approx.omega_plus) < 1e-6);
  }
}

TEST_CASE("anti-crossing fields") {
  CHECK(lac_field(excited()) == Approx(1423.0 / (2.01 * oracle::kMu)).epsilon(1e-14));
  CHECK(lac_field(excited()) == Approx(505.8).epsilon(1e-4));
  CHECK(lac_field(ground()) == Approx(1023.8).epsilon(1e-4));
  // omega_minus vanishes at the crossing.
  const auto at = esr_frequencies(excited(), FieldVector<double>(0, 0, lac_field(excited())));
  CHECK(at.omega_minus < 1e-6);
}

TEST_CASE("past the crossing the ms=0 level is still tracked") {
  const double b = 700.0;
  const auto f = esr_frequencies(excited(), FieldVector<double>(0, 0, b));
  const double z = 2.01 * oracle::kMu * b;
  CHECK(f.omega_minus == Approx(z - 1423.0).epsilon(1e-10));
  CHECK(f.omega_plus == Approx(z + 1423.0).epsilon(1e-10));
}

TEST_CASE("parameter validation names the offending field") {
  auto message = [](SpinParams<double> p) {
    try {
      p.validate();
    } catch (const InvalidInput& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({0.0, 0.0, 2.0}).find("d_zfs") != std::string::npos);
  CHECK(message({2870.0, -1.0, 2.0}).find("e_strain") != std::string::npos);
  CHECK(message({2870.0, 2870.0, 2.0}).find("e_strain") != std::string::npos);
  CHECK(message({2870.0, 0.0, 0.0}).find("g_factor") != std::string::npos);
  CHECK(message({2870.0, 0.0, 2.0}).empty());
  CHECK_THROWS_AS(lac_field(SpinParams<double>{0.0, 0.0, 2.0}), InvalidInput);
}

TEST_CASE("field guards") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(build_hamiltonian(ground(), FieldVector<double>(nan, 0, 0)), InvalidInput);
  CHECK_THROWS_AS(build_hamiltonian(ground(), FieldVector<double>(0, 0, 1e5)), InvalidInput);
  CHECK_NOTHROW(build_hamiltonian(ground(), FieldVector<double>(0, 0, 9.9e4)));
}

TEST_CASE("diagonalize rejects non-Hermitian input") {
  Matrix3c<double> h = Matrix3c<double>::Zero();
  h(0, 1) = 1.0;
  CHECK_THROWS_AS(diagonalize(h), InvalidInput);
}

TEST_CASE("single precision instantiation") {
  const SpinParams<float> p{1423.0f, 0.0f, 2.01f};
  const auto f = esr_frequencies(p, FieldVector<float>(0.0f, 0.0f, 100.0f));
  const double z = 2.01 * oracle::kMu * 100.0;
  CHECK(f.omega_minus == Approx(1423.0 - z).epsilon(1e-5));
  CHECK(f.omega_plus == Approx(1423.0 + z).epsilon(1e-5));
}
