#include "underq/expectile.hpp"

#include <cmath>
#include <stdexcept>

namespace underq::expectile {

namespace {

void check_tau(double tau) {
    if (!(tau > 0.0) || !(tau < 1.0))
        throw std::invalid_argument("tau must lie in (0, 1)");
}

}  // namespace

double loss(double tau, double u) {
    check_tau(tau);
    const double w = (u < 0.0) ? (1.0 - tau) : tau;
    return w * u * u;
}

double loss_grad(double tau, double u) {
    check_tau(tau);
    const double w = (u < 0.0) ? (1.0 - tau) : tau;
    return 2.0 * w * u;
}

double solve_expectile(const Eigen::VectorXd& samples,
                       const Eigen::VectorXd& weights, double tau) {
    check_tau(tau);
    if (samples.size() == 0) throw std::invalid_argument("empty sample set");
    if (samples.size() != weights.size())
        throw std::invalid_argument("samples/weights size mismatch");
    if (std::abs(weights.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("weights must sum to 1");

    // First-order condition: g(e) = tau * sum w (x - e)_+ - (1-tau) * sum
    // w (e - x)_+ is strictly decreasing in e and crosses zero inside
    // [min x, max x].
    const auto g = [&](double e) {
        double pos = 0.0, neg = 0.0;
        for (Eigen::Index i = 0; i < samples.size(); ++i) {
            const double d = samples[i] - e;
            if (d >= 0.0)
                pos += weights[i] * d;
            else
                neg -= weights[i] * d;
        }
        return tau * pos - (1.0 - tau) * neg;
    };

    double lo = samples.minCoeff();
    double hi = samples.maxCoeff();
    if (hi - lo < 1e-300) return lo;
    for (int iter = 0; iter < 200 && hi - lo > 1e-10; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double solve_expectile(const Eigen::VectorXd& samples, double tau) {
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(
        samples.size(), 1.0 / static_cast<double>(samples.size()));
    return solve_expectile(samples, w, tau);
}

TdLossResult td_expectile_residual(double q_pred, double reward,
                                   double q_target_next, double gamma,
                                   double tau, TdConvention convention) {
    const double target = reward + gamma * q_target_next;
    if (convention == TdConvention::PredMinusTarget) {
        const double u = q_pred - target;
        return {loss(tau, u), loss_grad(tau, u)};
    }
    const double u = target - q_pred;
    const double t = 1.0 - tau;
    return {loss(t, u), -loss_grad(t, u)};
}

}  // namespace underq::expectile
