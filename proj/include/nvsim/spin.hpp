#pragma once

// S=1 spin Hamiltonian of one NV triplet manifold (ground or excited), its
// diagonalization and the ESR transition frequencies derived from it.
//
// Basis is {ms=+1, ms=0, ms=-1} everywhere, so Sz = diag(1, 0, -1).
// Energies are frequencies in MHz, fields in gauss.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "nvsim/constants.hpp"
#include "nvsim/error.hpp"

namespace nvsim {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector3c = Eigen::Matrix<std::complex<Scalar>, 3, 1>;
template <typename Scalar>
using Matrix3c = Eigen::Matrix<std::complex<Scalar>, 3, 3>;

// Magnetic field in gauss. Which frame it lives in is up to the caller;
// build_hamiltonian expects the NV frame (z along the defect axis).
template <typename Scalar = double>
using FieldVector = Vector3<Scalar>;

template <typename Scalar = double>
using HamiltonianMatrix = Matrix3c<Scalar>;

inline constexpr int kMsPlusIndex = 0;
inline constexpr int kMsZeroIndex = 1;
inline constexpr int kMsMinusIndex = 2;

template <typename Scalar = double>
struct SpinParams {
  Scalar d_zfs{};     // MHz
  Scalar e_strain{};  // MHz
  Scalar g_factor{};

  void validate() const {
    using std::isfinite;
    if (!isfinite(d_zfs) || d_zfs <= Scalar(0))
      throw InvalidInput("d_zfs must be finite and > 0");
    if (!isfinite(e_strain) || e_strain < Scalar(0))
      throw InvalidInput("e_strain must be finite and >= 0");
    if (!isfinite(g_factor) || g_factor <= Scalar(0))
      throw InvalidInput("g_factor must be finite and > 0");
    if (e_strain >= d_zfs) throw InvalidInput("e_strain must be smaller than d_zfs");
  }

  friend bool operator==(const SpinParams&, const SpinParams&) = default;
};

template <typename Scalar = double>
struct SpinOperators {
  Matrix3c<Scalar> sx, sy, sz;
};

template <typename Scalar = double>
SpinOperators<Scalar> spin_operators() {
  using C = std::complex<Scalar>;
  const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
  const C i(0, 1);
  SpinOperators<Scalar> s;
  s.sx << C(0), C(r), C(0),
          C(r), C(0), C(r),
          C(0), C(r), C(0);
  s.sy << C(0), -i * r, C(0),
          i * r, C(0), -i * r,
          C(0), i * r, C(0);
  s.sz << C(1), C(0), C(0),
          C(0), C(0), C(0),
          C(0), C(0), C(-1);
  return s;
}

// H = D (Sz^2 - 2/3) + E (Sx^2 - Sy^2) + g mu B.S, in MHz.
template <typename Scalar>
HamiltonianMatrix<Scalar> build_hamiltonian(const SpinParams<Scalar>& params,
                                            const FieldVector<Scalar>& b_nv) {
  using std::isfinite;
  if (!isfinite(b_nv.x()) || !isfinite(b_nv.y()) || !isfinite(b_nv.z()))
    throw InvalidInput("field components must be finite");
  if (b_nv.norm() >= Scalar(1e5)) throw InvalidInput("field magnitude must be below 1e5 G");

  const auto s = spin_operators<Scalar>();
  const Matrix3c<Scalar> identity = Matrix3c<Scalar>::Identity();
  const Scalar zeeman = params.g_factor * Scalar(kBohrMhzPerGauss);

  HamiltonianMatrix<Scalar> h =
      params.d_zfs * (s.sz * s.sz - Scalar(2) / Scalar(3) * identity) +
      params.e_strain * (s.sx * s.sx - s.sy * s.sy) +
      zeeman * (b_nv.x() * s.sx + b_nv.y() * s.sy + b_nv.z() * s.sz);
  return h;
}

template <typename Scalar = double>
struct EigenSystem {
  Vector3<Scalar> energies;  // ascending, MHz
  Matrix3c<Scalar> states;   // column k is the eigenvector of energies(k)
  int ms0_index = 0;         // eigenstate with maximal |<ms=0|psi>|^2
};

namespace detail {

template <typename Scalar>
Scalar off_diagonal_norm(const Matrix3c<Scalar>& a) {
  Scalar sum = 0;
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q)
      if (p != q) sum += std::norm(a(p, q));
  return std::sqrt(sum);
}

}  // namespace detail

// Cyclic complex Jacobi. Each (p,q) rotation first removes the phase of
// a_pq, then applies the real symmetric Jacobi rotation that zeroes it.
template <typename Scalar>
EigenSystem<Scalar> diagonalize(const Matrix3c<Scalar>& h) {
  using C = std::complex<Scalar>;
  if (!h.allFinite()) throw InvalidInput("Hamiltonian entries must be finite");
  const Scalar scale = h.norm();
  const Scalar asymmetry = (h - h.adjoint()).norm();
  if (asymmetry > Scalar(1e-9) * std::max(Scalar(1), scale))
    throw InvalidInput("matrix is not Hermitian");

  Matrix3c<Scalar> a = (h + h.adjoint()) * Scalar(0.5);
  Matrix3c<Scalar> v = Matrix3c<Scalar>::Identity();
  const Scalar tolerance = Scalar(1e-12) * scale;

  for (int sweep = 0; sweep < 64; ++sweep) {
    if (detail::off_diagonal_norm(a) <= tolerance) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const Scalar magnitude = std::abs(a(p, q));
        if (magnitude == Scalar(0)) continue;
        const C phase = a(p, q) / magnitude;
        const Scalar theta =
            Scalar(0.5) * std::atan2(Scalar(2) * magnitude, a(q, q).real() - a(p, p).real());
        const Scalar c = std::cos(theta);
        const Scalar s = std::sin(theta);

        Matrix3c<Scalar> u = Matrix3c<Scalar>::Identity();
        u(p, p) = c;
        u(p, q) = s;
        u(q, p) = -s * std::conj(phase);
        u(q, q) = c * std::conj(phase);

        a = (u.adjoint() * a * u).eval();
        a(p, q) = a(q, p) = C(0);
        v = (v * u).eval();
      }
    }
  }

  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i).real() < a(j, j).real(); });

  EigenSystem<Scalar> result;
  for (int k = 0; k < 3; ++k) {
    result.energies(k) = a(order[k], order[k]).real();
    result.states.col(k) = v.col(order[k]).normalized();
  }

  // Ties (overlap difference below 1e-9) go to the lowest energy, which is
  // the first one seen because energies are ascending.
  Scalar best = -1;
  for (int k = 0; k < 3; ++k) {
    const Scalar overlap = std::norm(result.states(kMsZeroIndex, k));
    if (overlap > best + Scalar(1e-9)) {
      best = overlap;
      result.ms0_index = k;
    }
  }
  return result;
}

template <typename Scalar = double>
struct TransitionPair {
  Scalar omega_minus{};  // MHz, lower of the two transitions
  Scalar omega_plus{};   // MHz
};

// Frequencies from the ms=0-like eigenstate to the other two.
template <typename Scalar>
TransitionPair<Scalar> transition_frequencies(const EigenSystem<Scalar>& eig) {
  std::array<Scalar, 2> f{};
  int n = 0;
  for (int k = 0; k < 3; ++k)
    if (k != eig.ms0_index) f[n++] = std::abs(eig.energies(k) - eig.energies(eig.ms0_index));
  if (f[0] > f[1]) std::swap(f[0], f[1]);
  return {f[0], f[1]};
}

template <typename Scalar>
TransitionPair<Scalar> esr_frequencies(const SpinParams<Scalar>& params,
                                       const FieldVector<Scalar>& b_nv) {
  params.validate();
  return transition_frequencies(diagonalize(build_hamiltonian(params, b_nv)));
}

// D -/+ g mu B, valid when the Zeeman term dominates the strain term.
template <typename Scalar>
TransitionPair<Scalar> high_field_approx(const SpinParams<Scalar>& params, Scalar b_magnitude) {
  const Scalar zeeman = params.g_factor * Scalar(kBohrMhzPerGauss) * std::abs(b_magnitude);
  return {params.d_zfs - zeeman, params.d_zfs + zeeman};
}

// Axial field at which the ms=0 and ms=-1 levels cross (E = 0).
template <typename Scalar>
Scalar lac_field(const SpinParams<Scalar>& params) {
  params.validate();
  return params.d_zfs / (params.g_factor * Scalar(kBohrMhzPerGauss));
}

}  // namespace nvsim
