#include <algorithm>
#include <cmath>
#include <limits>

#include "nvsim/fitting.hpp"

namespace nvsim {

double FitResult::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values(static_cast<Eigen::Index>(i));
  throw InvalidInput("no fit parameter named " + std::string(name));
}

double FitResult::error(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return std_errors(static_cast<Eigen::Index>(i));
  throw InvalidInput("no fit parameter named " + std::string(name));
}

Eigen::MatrixXd finite_difference_jacobian(const ResidualFunction& residuals,
                                           const Eigen::VectorXd& x, double relative_step) {
  Eigen::MatrixXd jac;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = relative_step * std::max(std::abs(x(j)), 1e-8);
    Eigen::VectorXd up = x, down = x;
    up(j) += h;
    down(j) -= h;
    const Eigen::VectorXd column = (residuals(up) - residuals(down)) / (2 * h);
    if (jac.size() == 0) jac.resize(column.size(), x.size());
    jac.col(j) = column;
  }
  return jac;
}

namespace {

// Largest cosine between the residual vector and a Jacobian column.
double scaled_gradient(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r) {
  const double rn = r.norm();
  if (rn == 0) return 0;
  const Eigen::VectorXd g = jac.transpose() * r;
  double worst = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double cn = jac.col(j).norm();
    if (cn > 0) worst = std::max(worst, std::abs(g(j)) / (cn * rn));
  }
  return worst;
}

}  // namespace

FitResult levenberg_marquardt(const ResidualFunction& residuals, Eigen::VectorXd x,
                              std::vector<std::string> names, const LmOptions& options) {
  FitResult result;
  result.names = std::move(names);

  Eigen::VectorXd r = residuals(x);
  if (!r.allFinite()) throw FitDomainError("residuals are not finite at the initial guess");
  if (r.size() < x.size()) throw FitDomainError("fewer residuals than free parameters");
  double cost = r.squaredNorm();
  double lambda = options.lambda0;

  Eigen::MatrixXd jac = finite_difference_jacobian(residuals, x, options.fd_relative_step);
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    result.gradient_norm = scaled_gradient(jac, r);
    if (result.gradient_norm < options.gtol) {
      result.converged = true;
      result.message = "gradient tolerance reached";
      break;
    }

    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    Eigen::VectorXd scale = jtj.diagonal();
    const double floor = std::max(scale.maxCoeff(), 1.0) * 1e-15;
    scale = scale.cwiseMax(floor);

    bool accepted = false;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(x.size());
    while (lambda < 1e20) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * scale;
      step = damped.ldlt().solve(-grad);
      const Eigen::VectorXd trial = x + step;
      const Eigen::VectorXd r_trial = residuals(trial);
      const double trial_cost = r_trial.allFinite() ? r_trial.squaredNorm()
                                                    : std::numeric_limits<double>::infinity();
      if (trial_cost < cost) {
        x = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 10, 1e-15);
        accepted = true;
        break;
      }
      lambda *= 10;
    }

    const bool small_step = step.norm() <= options.xtol * (x.norm() + options.xtol);
    if (!accepted) {
      // No downhill step at any damping: we are at the floor of the
      // finite-difference resolution.
      result.converged = small_step || cost == 0;
      result.message = result.converged ? "step tolerance reached" : "no decrease at any damping";
      break;
    }
    jac = finite_difference_jacobian(residuals, x, options.fd_relative_step);
    if (small_step) {
      result.converged = true;
      result.message = "step tolerance reached";
      ++iteration;
      break;
    }
  }
  if (iteration >= options.max_iterations && !result.converged)
    result.message = "iteration limit reached";

  result.iterations = iteration;
  result.values = x;
  result.residual_norm = std::sqrt(cost);
  result.gradient_norm = scaled_gradient(jac, r);

  const auto dof = static_cast<double>(r.size() - x.size());
  const double variance = dof > 0 ? cost / dof : 0.0;
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const Eigen::MatrixXd covariance =
      variance * jtj.completeOrthogonalDecomposition().pseudoInverse();
  result.std_errors = covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return result;
}

}  // namespace nvsim
