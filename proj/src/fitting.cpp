#include "nvsim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nvsim {

void DataSeries::validate(std::size_t free_parameters) const {
  if (x.size() != y.size()) throw InvalidInput("x and y must have equal length");
  if (!sigma.empty() && sigma.size() != x.size())
    throw InvalidInput("sigma must be empty or match the data length");
  if (x.size() < free_parameters + 1)
    throw InvalidInput("need at least " + std::to_string(free_parameters + 1) + " data points");
  for (double s : sigma)
    if (!(s > 0)) throw InvalidInput("sigma entries must be positive");
}

FitResult fit_zeeman(std::span<const ZeemanSample> samples) {
  if (samples.size() < 2) throw FitDomainError("Zeeman fit needs at least two points");
  // Normal equations for omega = D + g * (s mu B), solved by Cramer's rule
  // so that flipping every branch label flips only the sign of g.
  double n = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (const auto& p : samples) {
    if (p.branch != 1 && p.branch != -1) throw InvalidInput("branch must be +1 or -1");
    const double xi = p.branch * kBohrMhzPerGauss * p.b_gauss;
    n += 1;
    sx += xi;
    sxx += xi * xi;
    sy += p.omega_mhz;
    sxy += xi * p.omega_mhz;
  }
  const double det = n * sxx - sx * sx;
  if (!(std::abs(det) > 1e-12 * n * sxx))
    throw FitDomainError("Zeeman fit is rank deficient: need two branches or two distinct fields");
  const double d = (sxx * sy - sx * sxy) / det;
  const double g = (n * sxy - sx * sy) / det;

  double rss = 0;
  for (const auto& p : samples) {
    const double res = p.omega_mhz - (d + g * p.branch * p.b_gauss * kBohrMhzPerGauss);
    rss += res * res;
  }
  const double variance = samples.size() > 2 ? rss / (n - 2) : 0.0;

  FitResult result;
  result.names = {"D", "g"};
  result.values = Eigen::Vector2d(d, std::abs(g));
  result.std_errors = Eigen::Vector2d(std::sqrt(variance * sxx / det), std::sqrt(variance * n / det));
  result.residual_norm = std::sqrt(rss);
  result.iterations = 0;
  result.converged = true;
  result.message = "closed-form normal equations";
  return result;
}

FitResult fit_nonlinear_zeeman(std::span<const FieldSample> samples,
                               const SpinParams<double>& initial, const LmOptions& options) {
  if (samples.size() < 4) throw InvalidInput("nonlinear Zeeman fit needs at least 4 points");
  const Eigen::Vector3d x0(initial.d_zfs, initial.e_strain, initial.g_factor);
  if (!x0.allFinite()) throw InvalidInput("initial guess must be finite");

  const std::vector<FieldSample> data(samples.begin(), samples.end());
  auto residuals = [data](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
    const SpinParams<double> p{x(0), std::abs(x(1)), x(2)};
    try {
      p.validate();
    } catch (const InvalidInput&) {
      r.setConstant(std::numeric_limits<double>::infinity());
      return r;
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto f = esr_frequencies(p, data[i].b_nv);
      const double model = data[i].branch == Branch::Lower ? f.omega_minus : f.omega_plus;
      r(static_cast<Eigen::Index>(i)) = data[i].omega_mhz - model;
    }
    return r;
  };
  auto result = levenberg_marquardt(residuals, x0, {"D", "E", "g"}, options);
  result.values(1) = std::abs(result.values(1));
  return result;
}

namespace {

FitResult fit_exponential_bins(const DecayHistogram& hist, const std::vector<std::size_t>& bins) {
  std::vector<double> t, y, w;
  for (std::size_t i : bins) {
    t.push_back(hist.bin_center(i));
    y.push_back(hist.counts[i]);
    w.push_back(hist.monte_carlo ? 1.0 / std::max(hist.counts[i], 1.0) : 1.0);
  }
  const auto positive = std::count_if(y.begin(), y.end(), [](double v) { return v > 0; });
  if (positive == 0) throw FitDomainError("no positive data in the fit window");
  if (positive < 3) throw FitDomainError("need at least 3 positive bins in the fit window");

  // Log-linear start, weighted by counts.
  double s0 = 0, st = 0, stt = 0, sl = 0, stl = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0)) continue;
    const double wi = hist.monte_carlo ? y[i] : 1.0;
    const double l = std::log(y[i]);
    s0 += wi;
    st += wi * t[i];
    stt += wi * t[i] * t[i];
    sl += wi * l;
    stl += wi * t[i] * l;
  }
  const double slope = (s0 * stl - st * sl) / (s0 * stt - st * st);
  const double intercept = (sl - slope * st) / s0;

  if (!(slope < -1e-12)) {
    FitResult degenerate;
    degenerate.names = {"amplitude", "tau"};
    degenerate.values = Eigen::Vector2d(std::exp(intercept), std::numeric_limits<double>::infinity());
    degenerate.std_errors = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
    degenerate.converged = false;
    degenerate.message = "no decay in window; tau is unbounded";
    return degenerate;
  }

  auto residuals = [t, y, w](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i)
      r(static_cast<Eigen::Index>(i)) = std::sqrt(w[i]) * (y[i] - x(0) * std::exp(-t[i] / x(1)));
    return r;
  };
  return levenberg_marquardt(residuals, Eigen::Vector2d(std::exp(intercept), -1.0 / slope),
                             {"amplitude", "tau"});
}

void check_histogram(const DecayHistogram& hist) {
  if (hist.bin_edges.size() != hist.counts.size() + 1)
    throw InvalidInput("histogram needs one more bin edge than bins");
}

}  // namespace

FitResult fit_exponential(const DecayHistogram& hist, double t_begin, double t_end) {
  check_histogram(hist);
  std::vector<std::size_t> bins;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double c = hist.bin_center(i);
    if (c >= t_begin && c <= t_end) bins.push_back(i);
  }
  return fit_exponential_bins(hist, bins);
}

FitResult fit_piecewise_decay(const DecayHistogram& hist, double break_time) {
  check_histogram(hist);
  std::vector<std::size_t> before, after;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist.bin_edges[i + 1] <= break_time + 1e-9) before.push_back(i);
    if (hist.bin_edges[i] >= break_time - 1e-9) after.push_back(i);
  }
  if (before.size() < 3 || after.size() < 3)
    throw InvalidInput("break_time must leave at least 3 bins on each side");

  const FitResult a = fit_exponential_bins(hist, before);
  const FitResult b = fit_exponential_bins(hist, after);
  FitResult result;
  result.names = {"tau_before", "tau_after", "amplitude_before", "amplitude_after"};
  result.values = Eigen::Vector4d(a.values(1), b.values(1), a.values(0), b.values(0));
  result.std_errors =
      Eigen::Vector4d(a.std_errors(1), b.std_errors(1), a.std_errors(0), b.std_errors(0));
  result.residual_norm = std::hypot(a.residual_norm, b.residual_norm);
  result.gradient_norm = std::max(a.gradient_norm, b.gradient_norm);
  result.iterations = a.iterations + b.iterations;
  result.converged = a.converged && b.converged;
  result.message = "before: " + a.message + "; after: " + b.message;
  return result;
}

double lorentzian_dips_model(double f, std::span<const LorentzianDip> dips) {
  double y = 1.0;
  for (const auto& d : dips) y -= d.contrast * lorentzian(f - d.center, std::abs(d.fwhm));
  return y;
}

LorentzianFit fit_lorentzian_dips(std::span<const double> frequency, std::span<const double> pl,
                                  std::span<const double> initial_centers) {
  if (initial_centers.empty()) throw InvalidInput("need at least one dip");
  DataSeries data{{frequency.begin(), frequency.end()}, {pl.begin(), pl.end()}, {}};
  data.validate(3 * initial_centers.size());
  const auto [lo, hi] = std::minmax_element(data.x.begin(), data.x.end());

  const std::size_t n = data.x.size();
  const double spacing = (*hi - *lo) / static_cast<double>(n - 1);
  Eigen::VectorXd x0(static_cast<Eigen::Index>(3 * initial_centers.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < initial_centers.size(); ++k) {
    const double c = initial_centers[k];
    if (c < *lo || c > *hi) throw InvalidInput("initial dip center outside the frequency grid");
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(data.x[i] - c) < std::abs(data.x[i0] - c)) i0 = i;
    const double depth = std::max(1.0 - data.y[i0], 1e-6);
    // Half-depth crossings around the starting point.
    std::size_t left = i0, right = i0;
    while (left > 0 && 1.0 - data.y[left] > 0.5 * depth) --left;
    while (right + 1 < n && 1.0 - data.y[right] > 0.5 * depth) ++right;
    double width = std::abs(data.x[right] - data.x[left]);
    if (!(width > 2 * spacing)) width = 4 * spacing;

    const auto base = static_cast<Eigen::Index>(3 * k);
    x0(base) = c;
    x0(base + 1) = width;
    x0(base + 2) = depth;
    const auto tag = std::to_string(k);
    names.push_back("center_" + tag);
    names.push_back("fwhm_" + tag);
    names.push_back("contrast_" + tag);
  }

  const std::size_t dips_count = initial_centers.size();
  auto unpack = [dips_count](const Eigen::VectorXd& x) {
    std::vector<LorentzianDip> dips(dips_count);
    for (std::size_t k = 0; k < dips_count; ++k) {
      const auto base = static_cast<Eigen::Index>(3 * k);
      dips[k] = {x(base), std::abs(x(base + 1)), x(base + 2)};
    }
    return dips;
  };
  auto residuals = [&data, &unpack](const Eigen::VectorXd& x) {
    const auto dips = unpack(x);
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.x.size()));
    for (std::size_t i = 0; i < data.x.size(); ++i)
      r(static_cast<Eigen::Index>(i)) = data.y[i] - lorentzian_dips_model(data.x[i], dips);
    return r;
  };

  LorentzianFit out;
  out.fit = levenberg_marquardt(residuals, x0, names);
  out.dips = unpack(out.fit.values);
  for (std::size_t k = 0; k < dips_count; ++k)
    out.fit.values(static_cast<Eigen::Index>(3 * k + 1)) = out.dips[k].fwhm;
  for (std::size_t i = 0; i < out.dips.size(); ++i)
    for (std::size_t j = i + 1; j < out.dips.size(); ++j) {
      const double width = std::max(out.dips[i].fwhm, out.dips[j].fwhm);
      if (std::abs(out.dips[i].center - out.dips[j].center) < 0.25 * width)
        out.overlap_warning = true;
    }
  return out;
}

LorentzianFit fit_lorentzian_dips(const OdmrSpectrum& spectrum,
                                  std::span<const double> initial_centers) {
  return fit_lorentzian_dips(spectrum.frequency, spectrum.pl, initial_centers);
}

}  // namespace nvsim
