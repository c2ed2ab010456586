#include "nvsim/spectra.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "nvsim/geometry.hpp"

namespace nvsim {

void DriveTemplate::validate() const {
  for (double v : {ground_rabi, excited_rabi})
    if (!std::isfinite(v) || v < 0) throw InvalidInput("drive rabi frequency must be >= 0");
  for (double v : {ground_fwhm, excited_fwhm})
    if (!std::isfinite(v) || v <= 0) throw InvalidInput("drive linewidth must be > 0");
}

std::vector<double> linear_grid(double start, double stop, std::size_t points) {
  if (points < 2) return {start};
  std::vector<double> g(points);
  const double step = (stop - start) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = start + step * static_cast<double>(i);
  g.back() = stop;
  return g;
}

std::vector<double> stepped_grid(double start, double stop, double step) {
  if (!(step > 0) || !(stop >= start)) throw InvalidInput("grid needs step > 0 and stop >= start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = start + step * static_cast<double>(i);
  return g;
}

std::vector<double> detect_dips(std::span<const double> x, std::span<const double> y,
                                double threshold) {
  std::vector<double> dips;
  if (x.size() != y.size()) throw InvalidInput("x and y must have equal length");
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] < y[i - 1] && y[i] <= y[i + 1] && y[i] < 1.0 - threshold)) continue;
    const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
    const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
    const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    double center = x1;
    if (den != 0) center = x1 - 0.5 * num / den;
    dips.push_back(std::clamp(center, x0, x2));
  }
  return dips;
}

OdmrSpectrum odmr_spectrum(const SpinParams<double>& gs, const SpinParams<double>& es,
                           const RateParams& rp, const DriveTemplate& drives,
                           const FieldVector<double>& field_nv, std::span<const double> grid) {
  drives.validate();
  const EsrContext ctx = make_esr_context(gs, es, field_nv);
  const double reference = pl_rate(steady_state(rate_matrix(rp, true)), rp);

  OdmrSpectrum out;
  out.frequency.assign(grid.begin(), grid.end());
  out.pl.reserve(grid.size());
  std::array<MicrowaveDrive, 4> set{};
  for (double f : grid) {
    int k = 0;
    for (Manifold m : {Manifold::Ground, Manifold::Excited}) {
      for (Transition t : {Transition::Minus, Transition::Plus}) {
        const bool ground = m == Manifold::Ground;
        set[k++] = {f, ground ? drives.ground_rabi : drives.excited_rabi,
                    ground ? drives.ground_fwhm : drives.excited_fwhm, m, t};
      }
    }
    const auto p = steady_state(rate_matrix(rp, true, set, ctx));
    out.pl.push_back(pl_rate(p, rp) / reference);
  }
  out.dips = detect_dips(out.frequency, out.pl);

  const double widest = std::max(drives.ground_fwhm, drives.excited_fwhm);
  out.near_lac = ctx.ground.omega_minus < widest || ctx.excited.omega_minus < widest;
  return out;
}

std::vector<ZeemanPoint> zeeman_scan(const SpinParams<double>& params,
                                     std::span<const double> b_grid) {
  std::vector<ZeemanPoint> out;
  out.reserve(b_grid.size());
  for (double b : b_grid) {
    const auto f = esr_frequencies(params, FieldVector<double>(0, 0, b));
    out.push_back({b, f.omega_minus, f.omega_plus});
  }
  return out;
}

LacScan lac_scan(const SpinParams<double>& gs, const SpinParams<double>& es, const RateParams& rp,
                 std::span<const double> b_grid, double misalignment_deg) {
  gs.validate();
  es.validate();
  if (!std::isfinite(misalignment_deg)) throw InvalidInput("misalignment must be finite");

  // Unmixed reference: pure |ms> eigenstates in level order (0, +1, -1).
  Matrix3c<double> pure = Matrix3c<double>::Zero();
  pure(kMsZeroIndex, 0) = pure(kMsPlusIndex, 1) = pure(kMsMinusIndex, 2) = 1.0;
  const double reference = pl_rate(steady_state(rate_matrix_eigenbasis(rp, true, pure, pure)), rp);

  const double a = degrees_to_radians(misalignment_deg);
  const Vector3<double> direction(std::sin(a), 0.0, std::cos(a));

  LacScan out;
  out.b_grid.assign(b_grid.begin(), b_grid.end());
  out.pl.reserve(b_grid.size());
  for (double b : b_grid) {
    const FieldVector<double> field = b * direction;
    const auto ground = diagonalize(build_hamiltonian(gs, field));
    const auto excited = diagonalize(build_hamiltonian(es, field));
    const auto g = rate_matrix_eigenbasis(rp, true, ground.states, excited.states);
    out.pl.push_back(pl_rate(steady_state(g), rp) / reference);
  }
  out.minima = detect_dips(out.b_grid, out.pl, 1e-6);
  out.trivially_flat = misalignment_deg == 0 && gs.e_strain == 0 && es.e_strain == 0;
  return out;
}

double calibrate_strain(const SpinParams<double>& params, const FieldVector<double>& field_nv,
                        Transition transition, double target_mhz) {
  auto frequency = [&](double e) {
    SpinParams<double> p = params;
    p.e_strain = e;
    const auto f = esr_frequencies(p, field_nv);
    return transition == Transition::Minus ? f.omega_minus : f.omega_plus;
  };
  // omega_minus falls and omega_plus rises with E.
  const double sign = transition == Transition::Minus ? -1.0 : 1.0;
  double lo = 0.0;
  double hi = params.d_zfs * (1 - 1e-9);
  const double f_lo = sign * (frequency(lo) - target_mhz);
  const double f_hi = sign * (frequency(hi) - target_mhz);
  if (f_lo > 0 || f_hi < 0)
    throw InvalidInput("target frequency is not reachable by varying e_strain in [0, d_zfs)");
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sign * (frequency(mid) - target_mhz) < 0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace nvsim
