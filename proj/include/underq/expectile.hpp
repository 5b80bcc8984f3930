#pragma once

#include <Eigen/Core>

namespace underq::expectile {

// Asymmetric squared loss |tau - 1(u < 0)| u^2: weight tau on positive
// residuals, 1 - tau on negative ones.
double loss(double tau, double u);

// d loss / d u. The u = 0 tie is assigned the positive branch (value 0).
double loss_grad(double tau, double u);

// Weighted tau-expectile: the scalar e minimizing sum_i w_i loss(tau, x_i - e),
// found by bisecting the first-order condition to 1e-10. tau = 0.5 gives the
// weighted mean.
double solve_expectile(const Eigen::VectorXd& samples,
                       const Eigen::VectorXd& weights, double tau);

// Unweighted convenience overload.
double solve_expectile(const Eigen::VectorXd& samples, double tau);

// Residual-sign convention for the TD expectile loss.
//   PredMinusTarget:     u = q_pred - (r + gamma * q_next), weight tau on u > 0.
//   TargetMinusPred: u = (r + gamma * q_next) - q_pred with tau mapped to
//                     1 - tau; identical loss surface by symmetry.
enum class TdConvention { PredMinusTarget, TargetMinusPred };

struct TdLossResult {
    double loss = 0.0;
    double grad_wrt_q_pred = 0.0;
};

// Expectile TD loss for one transition. The target r + gamma * q_target_next
// is treated as a constant; the gradient flows only through q_pred.
TdLossResult td_expectile_residual(double q_pred, double reward,
                                   double q_target_next, double gamma,
                                   double tau, TdConvention convention);

}  // namespace underq::expectile
