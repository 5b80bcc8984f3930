#include "underq/gumbel.hpp"

#include <cmath>
#include <stdexcept>

#include "underq/rng.hpp"

namespace underq::gumbel {

namespace {

void check_chain(const NestedChainSpec& spec, int t) {
    if (spec.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(spec.terminal_scale > 0.0))
        throw std::invalid_argument("terminal scale must be positive");
    if (!(spec.discount > 0.0) || spec.discount > 1.0)
        throw std::invalid_argument("discount must lie in (0, 1]");
    if (spec.actions_per_state < 1)
        throw std::invalid_argument("actions_per_state must be >= 1");
    if (!spec.rewards.empty() &&
        spec.rewards.size() != static_cast<std::size_t>(spec.horizon))
        throw std::invalid_argument("rewards must have horizon entries");
    if (t < 1 || t > spec.horizon)
        throw std::invalid_argument("t must lie in [1, horizon]");
}

double step_reward(const NestedChainSpec& spec, int k) {
    return spec.rewards.empty() ? 0.0 : spec.rewards[static_cast<std::size_t>(k - 1)];
}

// beta_k = gamma^(T-k) * beta; defined for k up to T+1.
double chain_scale(const NestedChainSpec& spec, int k) {
    return std::pow(spec.discount, spec.horizon - k) * spec.terminal_scale;
}

// Soft-max over the chain's identical per-action values.
double chain_softmax(const NestedChainSpec& spec, double value, double beta) {
    const Eigen::VectorXd v =
        Eigen::VectorXd::Constant(spec.actions_per_state, value);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(
        spec.actions_per_state, 1.0 / spec.actions_per_state);
    return soft_max_operator(v, w, beta);
}

}  // namespace

Eigen::VectorXd sample_gumbel(const GumbelParams& params, std::int64_t n,
                              std::uint64_t seed) {
    if (!(params.scale > 0.0))
        throw std::invalid_argument("Gumbel scale must be positive");
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    Rng rng(seed);
    Eigen::VectorXd out(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const double u = rng.uniform_open();
        out[i] = params.location - params.scale * std::log(-std::log(u));
    }
    return out;
}

double soft_max_operator(const Eigen::VectorXd& values,
                         const Eigen::VectorXd& weights, double beta) {
    if (values.size() == 0) throw std::invalid_argument("empty value vector");
    if (values.size() != weights.size())
        throw std::invalid_argument("values/weights size mismatch");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    if (!values.allFinite()) throw std::invalid_argument("values must be finite");
    if (std::abs(weights.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("weights must sum to 1");
    const double m = values.maxCoeff();
    const double s = (weights.array() * ((values.array() - m) / beta).exp()).sum();
    return m + beta * std::log(s);
}

double q_bias_bound(int horizon, int t, double gamma, double beta) {
    if (t < 1 || t > horizon) throw std::invalid_argument("require 1 <= t <= T");
    if (!(gamma > 0.0) || gamma > 1.0)
        throw std::invalid_argument("gamma must lie in (0, 1]");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    return (horizon - t + 1) * kEulerMascheroni *
           std::pow(gamma, horizon - t) * beta;
}

double v_bias_bound(int horizon, int t, double gamma, double beta) {
    if (t < 1 || t > horizon) throw std::invalid_argument("require 1 <= t <= T");
    if (!(gamma > 0.0) || gamma > 1.0)
        throw std::invalid_argument("gamma must lie in (0, 1]");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    return (horizon - t + 2) * kEulerMascheroni *
           std::pow(gamma, horizon - t) * beta;
}

double chain_optimal_q(const NestedChainSpec& spec, int t) {
    check_chain(spec, t);
    double q = 0.0;  // value beyond the horizon
    for (int k = spec.horizon; k >= t; --k) {
        q = step_reward(spec, k) +
            spec.discount * chain_softmax(spec, q, chain_scale(spec, k + 1));
    }
    return q;
}

McEstimate simulate_nested_error(const NestedChainSpec& spec, int t,
                                 std::uint64_t seed, bool fit_per_step) {
    check_chain(spec, t);
    if (spec.mc_samples < 10000)
        throw std::invalid_argument("mc_samples must be >= 1e4");
    const std::int64_t n = spec.mc_samples;
    const double q_true = chain_optimal_q(spec, t);

    if (!fit_per_step) {
        // Fitted values above level t carry their analytic bias gamma_e*beta_k;
        // only the final level is sampled.
        double q_fit = 0.0;
        for (int k = spec.horizon; k > t; --k) {
            q_fit = step_reward(spec, k) +
                    spec.discount *
                        chain_softmax(spec, q_fit, chain_scale(spec, k + 1)) +
                    kEulerMascheroni * chain_scale(spec, k);
        }
        const double loc =
            step_reward(spec, t) +
            spec.discount * chain_softmax(spec, q_fit, chain_scale(spec, t + 1));
        const double beta_t = chain_scale(spec, t);
        Rng rng(seed);
        double sum = 0.0, sumsq = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double x =
                loc - beta_t * std::log(-std::log(rng.uniform_open()));
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / static_cast<double>(n);
        const double var =
            (sumsq - sum * mean) / static_cast<double>(n - 1);
        return {mean - q_true, std::sqrt(var / static_cast<double>(n))};
    }

    // Slow mode: at each level fit the squared-error-optimal constant (the
    // sample mean) from fresh draws and feed it to the level below.
    Rng rng(seed);
    double q_fit = 0.0;
    double var_prop = 0.0;  // variance of the fitted constant, propagated
    const double pi2_6 = 1.6449340668482264;
    for (int k = spec.horizon; k >= t; --k) {
        const double loc =
            step_reward(spec, k) +
            spec.discount *
                chain_softmax(spec, q_fit, chain_scale(spec, k + 1));
        const double beta_k = chain_scale(spec, k);
        double sum = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            sum += loc - beta_k * std::log(-std::log(rng.uniform_open()));
        q_fit = sum / static_cast<double>(n);
        var_prop = spec.discount * spec.discount * var_prop +
                   pi2_6 * beta_k * beta_k / static_cast<double>(n);
    }
    return {q_fit - q_true, std::sqrt(var_prop)};
}

double backup_identity_residual(const NestedChainSpec& spec, int t) {
    check_chain(spec, t);
    const double gamma = spec.discount;
    const double beta = spec.terminal_scale;
    const int tail = spec.horizon - t;  // T - t
    const double q_next = (t == spec.horizon) ? 0.0 : chain_optimal_q(spec, t + 1);
    const double softmax_next =
        chain_softmax(spec, q_next, chain_scale(spec, t + 1));
    const double lhs = step_reward(spec, t) + gamma * softmax_next +
                       q_bias_bound(spec.horizon, t, gamma, beta);
    const double v_next = softmax_next + (tail + 1) * kEulerMascheroni *
                                             std::pow(gamma, tail - 1) * beta;
    const double rhs = step_reward(spec, t) + gamma * v_next;
    return std::abs(lhs - rhs);
}

double error_curve(const ErrorCurveParams& params) {
    if (!(params.discount > 0.0) || params.discount > 1.0)
        throw std::invalid_argument("discount must lie in (0, 1]");
    if (params.offset != 1 && params.offset != 2)
        throw std::invalid_argument("offset must be 1 or 2");
    if (params.horizon_index < 0.0)
        throw std::invalid_argument("horizon index must be >= 0");
    return params.coefficient * params.horizon_index *
           std::pow(params.discount, params.horizon_index - params.offset);
}

double error_curve_argmax(double discount) {
    if (!(discount > 0.0) || !(discount < 1.0))
        throw std::domain_error("argmax requires discount in (0, 1)");
    return -1.0 / std::log(discount);
}

}  // namespace underq::gumbel
