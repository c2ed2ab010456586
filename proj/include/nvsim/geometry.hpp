#pragma once

// Crystal-frame bookkeeping: the four NV axes of the diamond lattice, the
// lab (cubic crystal) to NV frame change, and field rotation scans.

#include <array>
#include <cmath>
#include <vector>

#include "nvsim/spin.hpp"

namespace nvsim {

template <typename Scalar = double>
Scalar degrees_to_radians(Scalar degrees) {
  return degrees * Scalar(kPi) / Scalar(180);
}

template <typename Scalar = double>
struct NVOrientation {
  Vector3<Scalar> axis;    // unit, crystal frame
  Vector3<Scalar> x_axis;  // unit, perpendicular to axis
  Vector3<Scalar> y_axis;  // axis x x_axis

  // x_axis is the crystal [1,-1,0] direction projected into the plane
  // perpendicular to the axis. Only matters when E != 0.
  static NVOrientation from_axis(const Vector3<Scalar>& direction) {
    if (!direction.allFinite() || direction.norm() == Scalar(0))
      throw InvalidInput("NV axis must be a finite non-zero vector");
    NVOrientation o;
    o.axis = direction.normalized();
    const Vector3<Scalar> reference(1, -1, 0);
    Vector3<Scalar> x = reference - reference.dot(o.axis) * o.axis;
    if (x.norm() < Scalar(1e-9)) x = Vector3<Scalar>(0, 0, 1) - o.axis.z() * o.axis;
    o.x_axis = x.normalized();
    o.y_axis = o.axis.cross(o.x_axis);
    return o;
  }
};

// [111], [1-1-1], [-11-1], [-1-11].
template <typename Scalar = double>
std::array<NVOrientation<Scalar>, 4> nv_orientations() {
  return {NVOrientation<Scalar>::from_axis(Vector3<Scalar>(1, 1, 1)),
          NVOrientation<Scalar>::from_axis(Vector3<Scalar>(1, -1, -1)),
          NVOrientation<Scalar>::from_axis(Vector3<Scalar>(-1, 1, -1)),
          NVOrientation<Scalar>::from_axis(Vector3<Scalar>(-1, -1, 1))};
}

// Rodrigues rotation by angle_deg (right-handed) about axis.
template <typename Scalar>
Vector3<Scalar> rotate_about_axis(const Vector3<Scalar>& v, const Vector3<Scalar>& axis,
                                  Scalar angle_deg) {
  const Scalar norm = axis.norm();
  if (!(norm > Scalar(0)) || !axis.allFinite()) throw InvalidInput("rotation axis must be non-zero");
  const Vector3<Scalar> k = axis / norm;
  const Scalar theta = degrees_to_radians(angle_deg);
  const Scalar c = std::cos(theta);
  const Scalar s = std::sin(theta);
  return v * c + k.cross(v) * s + k * (k.dot(v)) * (Scalar(1) - c);
}

template <typename Scalar>
FieldVector<Scalar> lab_to_nv(const FieldVector<Scalar>& b, const NVOrientation<Scalar>& o) {
  return {b.dot(o.x_axis), b.dot(o.y_axis), b.dot(o.axis)};
}

template <typename Scalar = double>
struct RotationScan {
  Vector3<Scalar> rotation_axis;
  Scalar b_magnitude{};            // gauss
  std::vector<Scalar> angle_grid;  // degrees, ascending

  void validate() const {
    if (!rotation_axis.allFinite() || std::abs(rotation_axis.norm() - Scalar(1)) > Scalar(1e-9))
      throw InvalidInput("rotation_axis must be a unit vector");
    if (!std::isfinite(b_magnitude) || b_magnitude < Scalar(0))
      throw InvalidInput("b_magnitude must be finite and >= 0");
    for (std::size_t i = 1; i < angle_grid.size(); ++i)
      if (!(angle_grid[i] > angle_grid[i - 1])) throw InvalidInput("angle_grid must be ascending");
    if (!angle_grid.empty() && angle_grid.back() - angle_grid.front() > Scalar(360))
      throw InvalidInput("angle_grid must span at most one period (360 degrees)");
  }
};

template <typename Scalar = double>
struct RotationPoint {
  Scalar angle_deg{};
  Scalar omega_minus{};
  Scalar omega_plus{};
};

template <typename Scalar>
std::vector<RotationPoint<Scalar>> rotation_scan_frequencies(
    const RotationScan<Scalar>& scan, const Vector3<Scalar>& initial_b_direction,
    const SpinParams<Scalar>& params, const NVOrientation<Scalar>& o) {
  scan.validate();
  params.validate();
  if (!initial_b_direction.allFinite() || initial_b_direction.norm() == Scalar(0))
    throw InvalidInput("initial field direction must be non-zero");
  const Vector3<Scalar> b0 = initial_b_direction.normalized() * scan.b_magnitude;

  std::vector<RotationPoint<Scalar>> out;
  out.reserve(scan.angle_grid.size());
  for (Scalar angle : scan.angle_grid) {
    const auto b_lab = rotate_about_axis(b0, scan.rotation_axis, angle);
    const auto f = esr_frequencies(params, lab_to_nv(b_lab, o));
    out.push_back({angle, f.omega_minus, f.omega_plus});
  }
  return out;
}

template <typename Scalar>
std::array<std::vector<RotationPoint<Scalar>>, 4> rotation_scan_all_orientations(
    const RotationScan<Scalar>& scan, const Vector3<Scalar>& initial_b_direction,
    const SpinParams<Scalar>& params) {
  std::array<std::vector<RotationPoint<Scalar>>, 4> out;
  const auto orientations = nv_orientations<Scalar>();
  for (std::size_t i = 0; i < orientations.size(); ++i)
    out[i] = rotation_scan_frequencies(scan, initial_b_direction, params, orientations[i]);
  return out;
}

}  // namespace nvsim
