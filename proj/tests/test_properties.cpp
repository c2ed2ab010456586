#include <doctest.h>

#include <random>

#include "nvsim/dynamics.hpp"
#include "nvsim/fitting.hpp"
#include "nvsim/geometry.hpp"
#include "oracles.hpp"

using namespace nvsim;
using doctest::Approx;

namespace {

struct Draw {
  SpinParams<double> params;
  FieldVector<double> b;
};

Draw random_draw(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(100.0, 5000.0), unit(0.0, 1.0), g(1.5, 2.5);
  std::normal_distribution<double> n;
  Draw out;
  out.params.d_zfs = d(rng);
  out.params.e_strain = unit(rng) < 0.3 ? 0.0 : 0.5 * unit(rng) * out.params.d_zfs;
  out.params.g_factor = g(rng);
  const Eigen::Vector3d dir(n(rng), n(rng), n(rng));
  out.b = dir.normalized() * 3000.0 * unit(rng);
  return out;
}

}  // namespace

TEST_CASE("random Hamiltonians: Hermitian, traceless, eigensystems match the cubic oracle") {
  std::mt19937_64 rng(2024);
  int worst_index = -1;
  double worst = 0;
  for (int k = 0; k < 10000; ++k) {
    const Draw draw = random_draw(rng);
    const auto h = build_hamiltonian(draw.params, draw.b);
    const double scale = std::max(1.0, h.norm());
    REQUIRE((h - h.adjoint()).norm() == 0.0);
    REQUIRE(std::abs(h.trace()) < 1e-12 * scale);
    REQUIRE((h - oracle::nv_hamiltonian(draw.params.d_zfs, draw.params.e_strain,
                                        draw.params.g_factor, draw.b))
                .norm() < 1e-12 * scale);

    const auto eig = diagonalize(h);
    const auto ref = oracle::hermitian_eigenvalues(h);
    for (int i = 0; i < 3; ++i) {
      const double diff = std::abs(eig.energies(i) - ref[static_cast<std::size_t>(i)]) / scale;
      if (diff > worst) {
        worst = diff;
        worst_index = k;
      }
    }
    REQUIRE((eig.states.adjoint() * eig.states - Matrix3c<double>::Identity()).norm() < 1e-12);
    for (int i = 0; i < 3; ++i)
      REQUIRE((h * eig.states.col(i) - eig.energies(i) * eig.states.col(i)).norm() < 1e-10 * scale);
  }
  INFO("worst relative eigenvalue deviation at draw " << worst_index);
  CHECK(worst < 1e-8);
}

TEST_CASE("lines are unchanged by a half turn of a field perpendicular to the rotation axis") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> angle(0.0, 180.0);
  const auto o = NVOrientation<double>::from_axis(Eigen::Vector3d(1, 1, 1));
  for (int k = 0; k < 500; ++k) {
    const Draw draw = random_draw(rng);
    const Eigen::Vector3d axis = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    Eigen::Vector3d initial = Eigen::Vector3d(n(rng), n(rng), n(rng));
    initial -= initial.dot(axis) * axis;
    const double a = angle(rng);
    RotationScan<double> scan{axis, 500.0, {a, a + 180.0}};
    const auto pts = rotation_scan_frequencies(scan, initial, draw.params, o);
    CHECK(pts[1].omega_minus == Approx(pts[0].omega_minus).epsilon(1e-9));
    CHECK(pts[1].omega_plus == Approx(pts[0].omega_plus).epsilon(1e-9));
  }
}

TEST_CASE("lab to NV conversion preserves the field magnitude") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  for (int k = 0; k < 1000; ++k) {
    const auto o = NVOrientation<double>::from_axis(Eigen::Vector3d(n(rng), n(rng), n(rng)));
    const Eigen::Vector3d b(n(rng), n(rng), n(rng));
    CHECK(lab_to_nv(b, o).norm() == Approx(b.norm()).epsilon(1e-13));
  }
}

TEST_CASE("evolution conserves probability and positivity for random rates and drives") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    RateParams rp;
    rp.pump_rate = 0.2 * u(rng);
    rp.gamma_rad = 0.01 + 0.1 * u(rng);
    rp.k_isc_0 = 0.01 * u(rng);
    rp.k_isc_1 = rp.k_isc_0 + 0.1 * u(rng);
    rp.gamma_s = 0.001 + 0.01 * u(rng);
    rp.branch_0 = u(rng);
    rp.validate();
    const auto ctx = make_esr_context({2870.0, 5.0 * u(rng), 2.0028}, {1423.0, 20.0 * u(rng), 2.01},
                                      FieldVector<double>(50 * u(rng), 50 * u(rng), 500 * u(rng)));
    const std::array<MicrowaveDrive, 2> drives{
        MicrowaveDrive{2000.0 + 1000.0 * u(rng), 30.0 * u(rng), 10.0, Manifold::Ground, Transition::Minus},
        MicrowaveDrive{1000.0 + 800.0 * u(rng), 30.0 * u(rng), 100.0, Manifold::Excited, Transition::Plus}};
    const Generator g = rate_matrix(rp, u(rng) < 0.5, drives, ctx);
    LevelPopulations p;
    for (int i = 0; i < kNumLevels; ++i) p(i) = u(rng);
    p /= p.sum();
    const auto q = evolve(p, g, 5000.0 * u(rng));
    CHECK(std::abs(q.sum() - 1.0) < 1e-9);
    CHECK(q.minCoeff() >= -1e-12);
  }
}

TEST_CASE("Zeeman and exponential fits recover random parameters") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double d = 500.0 + 3000.0 * u(rng), g = 1.8 + 0.4 * u(rng);
    std::vector<ZeemanSample> s;
    for (double b = 10.0; b < 200.0; b += 10.0) {
      s.push_back({b, d - g * oracle::kMu * b, -1});
      s.push_back({b, d + g * oracle::kMu * b, +1});
    }
    const auto fit = fit_zeeman(s);
    CHECK(fit.value("D") == Approx(d).epsilon(1e-10));
    CHECK(fit.value("g") == Approx(g).epsilon(1e-10));

    const double tau = 5.0 + 40.0 * u(rng), amp = 1e-3 + u(rng);
    DecayHistogram h;
    for (int i = 0; i <= 200; ++i) h.bin_edges.push_back(0.5 * i);
    for (int i = 0; i < 200; ++i) h.counts.push_back(amp * std::exp(-h.bin_center(i) / tau));
    const auto e = fit_exponential(h, 0.0, 100.0);
    CHECK(e.converged);
    CHECK(e.value("tau") == Approx(tau).epsilon(1e-7));
  }
}
