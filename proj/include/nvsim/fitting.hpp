#pragma once

// Least-squares parameter recovery: Zeeman line fits, Lorentzian dip fits
// and single/piecewise exponential lifetime fits.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nvsim/dynamics.hpp"
#include "nvsim/spectra.hpp"
#include "nvsim/spin.hpp"

namespace nvsim {

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd values;
  Eigen::VectorXd std_errors;
  double residual_norm = 0;
  double gradient_norm = 0;  // max cosine between residual and Jacobian columns
  int iterations = 0;
  bool converged = false;
  std::string message;

  double value(std::string_view name) const;
  double error(std::string_view name) const;
};

struct DataSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> sigma;  // empty means unweighted

  void validate(std::size_t free_parameters) const;
};

struct LmOptions {
  int max_iterations = 200;
  double xtol = 1e-9;          // relative parameter step
  double gtol = 1e-8;          // scaled gradient
  double lambda0 = 1e-3;
  double fd_relative_step = 1e-4;
};

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Damped Gauss-Newton with Marquardt diagonal scaling and central
// finite-difference Jacobians. Uncertainties are the residual-variance
// scaled diagonal of (J^T J)^-1 at the solution, which is approximate.
FitResult levenberg_marquardt(const ResidualFunction& residuals, Eigen::VectorXd x0,
                              std::vector<std::string> names, const LmOptions& options = {});

Eigen::MatrixXd finite_difference_jacobian(const ResidualFunction& residuals,
                                           const Eigen::VectorXd& x, double relative_step);

// ---------------------------------------------------------------------------

struct ZeemanSample {
  double b_gauss{};
  double omega_mhz{};
  int branch = +1;  // +1 for D + g mu B, -1 for D - g mu B
};

// Linear fit of omega = D + branch * g mu B. Returns {D, g}; g is reported
// as a magnitude so swapping branch labels leaves the result unchanged.
FitResult fit_zeeman(std::span<const ZeemanSample> samples);

enum class Branch { Lower, Upper };

struct FieldSample {
  FieldVector<double> b_nv;
  double omega_mhz{};
  Branch branch = Branch::Lower;
};

// Full-diagonalization fit of {D, E, g}; E enters through |E|.
FitResult fit_nonlinear_zeeman(std::span<const FieldSample> samples,
                               const SpinParams<double>& initial, const LmOptions& options = {});

// A exp(-t/tau) over bins whose centers lie in [t_begin, t_end]. Poisson
// weights for Monte Carlo histograms, uniform otherwise.
FitResult fit_exponential(const DecayHistogram& hist, double t_begin, double t_end);

// Independent exponential fits of the bins before and after break_time.
FitResult fit_piecewise_decay(const DecayHistogram& hist, double break_time);

struct LorentzianDip {
  double center{};
  double fwhm{};
  double contrast{};
};

struct LorentzianFit {
  FitResult fit;
  std::vector<LorentzianDip> dips;
  bool overlap_warning = false;
};

// y = 1 - sum_k c_k L_k(f).
double lorentzian_dips_model(double f, std::span<const LorentzianDip> dips);

LorentzianFit fit_lorentzian_dips(std::span<const double> frequency, std::span<const double> pl,
                                  std::span<const double> initial_centers);
LorentzianFit fit_lorentzian_dips(const OdmrSpectrum& spectrum,
                                  std::span<const double> initial_centers);

}  // namespace nvsim
