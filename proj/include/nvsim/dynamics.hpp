#pragma once

// Seven-level rate model of NV photodynamics.
//
// Level order: g0, g+1, g-1, e0, e+1, e-1, s. Generators act on column
// vectors of populations, dp/dt = G p, with G(to, from) the transfer rate
// in 1/ns. Columns of every generator sum to zero.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nvsim/spin.hpp"

namespace nvsim {

inline constexpr int kNumLevels = 7;

enum Level : int { kG0 = 0, kGPlus, kGMinus, kE0, kEPlus, kEMinus, kSinglet };

using LevelPopulations = Eigen::Matrix<double, kNumLevels, 1>;
using Generator = Eigen::Matrix<double, kNumLevels, kNumLevels>;

// All rates per ns.
struct RateParams {
  double pump_rate = 0.02;
  double gamma_rad = 1.0 / 23.0;
  double k_isc_0 = 0.0;
  double k_isc_1 = 1.0 / 12.7 - 1.0 / 23.0;
  double gamma_s = 1.0 / 300.0;  // singlet lifetime placeholder, not measured here
  double branch_0 = 1.0;         // singlet decay fraction into g0

  void validate() const;
  friend bool operator==(const RateParams&, const RateParams&) = default;
};

enum class Manifold { Ground, Excited };
enum class Transition { Minus, Plus };  // 0 <-> -1 and 0 <-> +1

struct MicrowaveDrive {
  double frequency = 0;        // MHz
  double rabi_frequency = 0;   // MHz
  double linewidth_fwhm = 10;  // MHz
  Manifold target_manifold = Manifold::Ground;
  Transition target_transition = Transition::Minus;

  void validate() const;
};

// Transition frequencies of both manifolds, as seen by microwave drives.
// "Minus" targets the lower-frequency line of a manifold.
struct EsrContext {
  TransitionPair<double> ground;
  TransitionPair<double> excited;
};

EsrContext make_esr_context(const SpinParams<double>& ground, const SpinParams<double>& excited,
                            const FieldVector<double>& b_nv);

// Level indices (ms=0 level, ms=+/-1 level) addressed by a drive.
std::pair<int, int> drive_levels(Manifold manifold, Transition transition);
double transition_frequency(const EsrContext& ctx, Manifold manifold, Transition transition);

// Unit-peak Lorentzian of the given FWHM.
double lorentzian(double detuning, double fwhm);

// Incoherent cw transfer rate in 1/ns: rabi^2 / (2 fwhm) * L(f - f0), MHz
// converted to 1/ns.
double drive_rate(const MicrowaveDrive& drive, double transition_frequency_mhz);

Generator rate_matrix(const RateParams& rp, bool laser_on);
Generator rate_matrix(const RateParams& rp, bool laser_on, std::span<const MicrowaveDrive> drives,
                      const std::optional<EsrContext>& esr_context);

// Rate model in the instantaneous eigenbases of the two manifolds. Columns of
// ground_states/excited_states are eigenvectors in the {+1,0,-1} spin basis;
// levels 0..2 and 3..5 of the result are those eigenstates in column order.
// Optical rates follow state overlaps, ISC and singlet branching follow the
// ms content of each eigenstate.
Generator rate_matrix_eigenbasis(const RateParams& rp, bool laser_on,
                                 const Matrix3c<double>& ground_states,
                                 const Matrix3c<double>& excited_states);

LevelPopulations evolve(const LevelPopulations& p0, const Generator& generator, double duration_ns,
                        double max_step_ns = std::numeric_limits<double>::infinity());

LevelPopulations steady_state(const Generator& generator);

double pl_rate(const LevelPopulations& p, const RateParams& rp);

double polarization(const LevelPopulations& p);

LevelPopulations thermal_ground();

// Coherent two-level transfer probability, rabi and detuning in MHz.
double rabi_transfer(double rabi_mhz, double detuning_mhz, double t_ns);
std::vector<double> rabi_curve(const MicrowaveDrive& drive, double transition_frequency_mhz,
                               std::span<const double> t_grid_ns);

// ---------------------------------------------------------------------------
// Pulse sequences

struct LaserPulse {
  double duration_ns = 0;
};
struct Wait {
  double duration_ns = 0;
};
// Microwave pulse applied as an instantaneous population swap at the pulse
// midpoint. With pi set the transfer is a pi rotation (complete when
// resonant); otherwise it is the Rabi transfer after duration_ns. The result
// is scaled by fidelity.
struct MwPulse {
  MicrowaveDrive drive;
  bool resonant = true;  // ignore drive.frequency and sit on the transition
  bool pi = true;
  double duration_ns = 0;
  double fidelity = 1.0;
};
// Instantaneous spin-conserving g -> e promotion with probability p_exc.
struct PsExcitation {
  double p_exc = 1.0;
};
// Starts the photon histogram clock; later segments happen inside the window.
struct Readout {
  double window_ns = 100;
  double bin_ns = 0.5;
};

using Segment = std::variant<LaserPulse, Wait, MwPulse, PsExcitation, Readout>;

struct PulseSequence {
  std::vector<Segment> segments;
  void validate() const;
};

struct DecayHistogram {
  std::vector<double> bin_edges;  // ns, relative to readout start
  std::vector<double> counts;     // photons per bin; expected or sampled
  bool monte_carlo = false;
  std::uint64_t shots = 1;

  std::size_t size() const { return counts.size(); }
  double bin_center(std::size_t i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }
};

struct SpinContext {
  SpinParams<double> ground{2870.0, 0.0, 2.0028};
  SpinParams<double> excited{1423.0, 0.0, 2.01};
  FieldVector<double> field_nv = FieldVector<double>::Zero();
};

struct RunOptions {
  bool monte_carlo = false;
  std::uint64_t seed = 0;
  std::uint64_t shots = 0;
};

struct SequenceResult {
  DecayHistogram histogram;
  LevelPopulations final_populations = LevelPopulations::Zero();
  std::optional<std::string> warning;
};

SequenceResult run_sequence(const PulseSequence& seq, const RateParams& rp,
                            const SpinContext& spins, const RunOptions& options = {},
                            const LevelPopulations& initial = thermal_ground());

namespace detail {

// Dormand-Prince 5(4) on dx/dt = A x with absolute error control.
template <typename Matrix, typename Vector>
Vector integrate_linear(const Matrix& a, Vector x, double duration, double max_step,
                        double abs_tol = 1e-10) {
  if (!(duration > 0)) return x;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double rate_scale = std::max(a.cwiseAbs().rowwise().sum().maxCoeff(), 1e-12);
  double h = std::min({duration, max_step, 0.1 / rate_scale});
  double t = 0;
  Vector k1 = a * x;
  while (t < duration) {
    const bool last = t + h >= duration;
    if (last) h = duration - t;
    const Vector k2 = a * (x + h * a21 * k1);
    const Vector k3 = a * (x + h * (a31 * k1 + a32 * k2));
    const Vector k4 = a * (x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = a * (x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 = a * (x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector next = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = a * next;
    const double err =
        (h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)).cwiseAbs().maxCoeff();
    if (err <= abs_tol) {
      t = last ? duration : t + h;
      x = next;
      k1 = k7;
    }
    const double factor =
        err == 0 ? 5.0 : std::clamp(0.9 * std::pow(abs_tol / err, 0.2), 0.2, 5.0);
    h = std::min(h * factor, max_step);
  }
  return x;
}

}  // namespace detail

}  // namespace nvsim
