#include "nvsim/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace nvsim {

namespace {

void require_rate(double value, const char* name) {
  if (!std::isfinite(value) || value < 0)
    throw InvalidInput(std::string(name) + " must be finite and >= 0");
}

void fill_diagonal(Generator& g) {
  for (int j = 0; j < kNumLevels; ++j) {
    g(j, j) = 0;
    g(j, j) = -g.col(j).sum();
  }
}

}  // namespace

void RateParams::validate() const {
  require_rate(pump_rate, "pump_rate");
  require_rate(gamma_rad, "gamma_rad");
  require_rate(k_isc_0, "k_isc_0");
  require_rate(k_isc_1, "k_isc_1");
  require_rate(gamma_s, "gamma_s");
  if (!std::isfinite(branch_0) || branch_0 < 0 || branch_0 > 1)
    throw InvalidInput("branch_0 must lie in [0, 1]");
  if (k_isc_0 > k_isc_1) throw InvalidInput("k_isc_0 must not exceed k_isc_1");
}

void MicrowaveDrive::validate() const {
  if (!std::isfinite(frequency)) throw InvalidInput("drive frequency must be finite");
  if (!std::isfinite(rabi_frequency) || rabi_frequency < 0)
    throw InvalidInput("rabi_frequency must be finite and >= 0");
  if (!std::isfinite(linewidth_fwhm) || linewidth_fwhm <= 0)
    throw InvalidInput("linewidth_fwhm must be finite and > 0");
}

EsrContext make_esr_context(const SpinParams<double>& ground, const SpinParams<double>& excited,
                            const FieldVector<double>& b_nv) {
  return {esr_frequencies(ground, b_nv), esr_frequencies(excited, b_nv)};
}

std::pair<int, int> drive_levels(Manifold manifold, Transition transition) {
  const int base = manifold == Manifold::Ground ? kG0 : kE0;
  return {base, base + (transition == Transition::Plus ? 1 : 2)};
}

double transition_frequency(const EsrContext& ctx, Manifold manifold, Transition transition) {
  const auto& pair = manifold == Manifold::Ground ? ctx.ground : ctx.excited;
  return transition == Transition::Minus ? pair.omega_minus : pair.omega_plus;
}

double lorentzian(double detuning, double fwhm) {
  const double x = 2.0 * detuning / fwhm;
  return 1.0 / (1.0 + x * x);
}

double drive_rate(const MicrowaveDrive& drive, double transition_frequency_mhz) {
  drive.validate();
  const double peak_mhz = drive.rabi_frequency * drive.rabi_frequency / (2.0 * drive.linewidth_fwhm);
  return 1e-3 * peak_mhz * lorentzian(drive.frequency - transition_frequency_mhz, drive.linewidth_fwhm);
}

Generator rate_matrix(const RateParams& rp, bool laser_on) {
  return rate_matrix(rp, laser_on, {}, std::nullopt);
}

Generator rate_matrix(const RateParams& rp, bool laser_on, std::span<const MicrowaveDrive> drives,
                      const std::optional<EsrContext>& esr_context) {
  rp.validate();
  if (!drives.empty() && !esr_context)
    throw InvalidInput("microwave drive requires transition frequencies (esr_context)");

  Generator g = Generator::Zero();
  for (int m = 0; m < 3; ++m) {
    if (laser_on) g(kE0 + m, kG0 + m) += rp.pump_rate;
    g(kG0 + m, kE0 + m) += rp.gamma_rad;
  }
  g(kSinglet, kE0) += rp.k_isc_0;
  g(kSinglet, kEPlus) += rp.k_isc_1;
  g(kSinglet, kEMinus) += rp.k_isc_1;
  g(kG0, kSinglet) += rp.gamma_s * rp.branch_0;
  g(kGPlus, kSinglet) += rp.gamma_s * 0.5 * (1.0 - rp.branch_0);
  g(kGMinus, kSinglet) += rp.gamma_s * 0.5 * (1.0 - rp.branch_0);

  for (const auto& drive : drives) {
    const double f0 =
        transition_frequency(*esr_context, drive.target_manifold, drive.target_transition);
    const double w = drive_rate(drive, f0);
    const auto [a, b] = drive_levels(drive.target_manifold, drive.target_transition);
    g(a, b) += w;
    g(b, a) += w;
  }
  fill_diagonal(g);
  return g;
}

Generator rate_matrix_eigenbasis(const RateParams& rp, bool laser_on,
                                 const Matrix3c<double>& ground_states,
                                 const Matrix3c<double>& excited_states) {
  rp.validate();
  const Eigen::Matrix3d overlap = (ground_states.adjoint() * excited_states).cwiseAbs2();
  const Eigen::Matrix3d ground_weight = ground_states.cwiseAbs2();    // (basis, state)
  const Eigen::Matrix3d excited_weight = excited_states.cwiseAbs2();  // (basis, state)

  // Per spin-basis row {+1, 0, -1}.
  const Eigen::Vector3d isc(rp.k_isc_1, rp.k_isc_0, rp.k_isc_1);
  const double side = 0.5 * (1.0 - rp.branch_0);
  const Eigen::Vector3d branch(side, rp.branch_0, side);

  Generator g = Generator::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (laser_on) g(kE0 + j, kG0 + i) += rp.pump_rate * overlap(i, j);
      g(kG0 + i, kE0 + j) += rp.gamma_rad * overlap(i, j);
    }
  }
  for (int j = 0; j < 3; ++j) g(kSinglet, kE0 + j) = isc.dot(excited_weight.col(j));
  for (int i = 0; i < 3; ++i) g(kG0 + i, kSinglet) = rp.gamma_s * branch.dot(ground_weight.col(i));
  fill_diagonal(g);
  return g;
}

LevelPopulations evolve(const LevelPopulations& p0, const Generator& generator, double duration_ns,
                        double max_step_ns) {
  if (!generator.allFinite()) throw InvalidInput("generator entries must be finite");
  if (!std::isfinite(duration_ns) || duration_ns < 0)
    throw InvalidInput("duration must be finite and >= 0");
  LevelPopulations p = detail::integrate_linear(generator, p0, duration_ns, max_step_ns);
  // Negatives at the level of the integration tolerance are truncation
  // error on an emptied level.
  for (int i = 0; i < kNumLevels; ++i)
    if (p(i) < 0 && p(i) > -1e-9) p(i) = 0;
  return p;
}

LevelPopulations steady_state(const Generator& generator) {
  if (!generator.allFinite()) throw InvalidInput("generator entries must be finite");
  Eigen::FullPivLU<Generator> lu(generator);
  lu.setThreshold(1e-10);
  if (lu.rank() != kNumLevels - 1)
    throw DegenerateSteadyState("generator has " + std::to_string(kNumLevels - lu.rank()) +
                                " stationary directions; steady state is not unique");

  // Replace one balance equation by normalization.
  Generator a = generator;
  a.row(0).setOnes();
  LevelPopulations rhs = LevelPopulations::Zero();
  rhs(0) = 1;
  LevelPopulations p = a.fullPivLu().solve(rhs);
  for (int i = 0; i < kNumLevels; ++i)
    if (p(i) < 0) p(i) = 0;
  return p / p.sum();
}

double pl_rate(const LevelPopulations& p, const RateParams& rp) {
  return rp.gamma_rad * (p(kE0) + p(kEPlus) + p(kEMinus));
}

double polarization(const LevelPopulations& p) {
  const double total = p(kG0) + p(kGPlus) + p(kGMinus);
  if (!(total > 0)) throw UndefinedPolarization("ground manifold is empty");
  return (p(kG0) - p(kGPlus) - p(kGMinus)) / total;
}

LevelPopulations thermal_ground() {
  LevelPopulations p = LevelPopulations::Zero();
  p(kG0) = p(kGPlus) = p(kGMinus) = 1.0 / 3.0;
  return p;
}

// t_ns * 1e-3 puts time in microseconds so that MHz * us is a cycle count.
double rabi_transfer(double rabi_mhz, double detuning_mhz, double t_ns) {
  const double generalized = std::hypot(rabi_mhz, detuning_mhz);
  if (generalized == 0) return 0;
  const double s = std::sin(kPi * generalized * t_ns * 1e-3);
  return rabi_mhz * rabi_mhz / (generalized * generalized) * s * s;
}

std::vector<double> rabi_curve(const MicrowaveDrive& drive, double transition_frequency_mhz,
                               std::span<const double> t_grid_ns) {
  drive.validate();
  const double detuning = drive.frequency - transition_frequency_mhz;
  std::vector<double> out;
  out.reserve(t_grid_ns.size());
  for (double t : t_grid_ns) out.push_back(rabi_transfer(drive.rabi_frequency, detuning, t));
  return out;
}

}  // namespace nvsim
