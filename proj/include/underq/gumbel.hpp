#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace underq::gumbel {

// Bias of a standard Gumbel's mean over its mode.
inline constexpr double kEulerMascheroni = 0.5772156649015329;

// Location/scale pair of a max-type Gumbel distribution G(mu, beta).
// Mean = location + kEulerMascheroni * scale, variance = pi^2 beta^2 / 6.
struct GumbelParams {
    double location = 0.0;
    double scale = 1.0;
};

// Deterministic chain used to verify the nested overestimation bounds:
// T steps, per-step rewards, terminal noise scale beta at the horizon and
// beta_t = gamma^(T-t) * beta upstream.
struct NestedChainSpec {
    int horizon = 1;              // T >= 1
    double terminal_scale = 1.0;  // beta > 0
    double discount = 0.99;       // gamma in (0, 1]
    std::vector<double> rewards;  // length horizon; empty means all-zero
    int actions_per_state = 1;
    std::int64_t mc_samples = 1000000;
};

struct McEstimate {
    double value = 0.0;
    double standard_error = 0.0;
};

// Parameters of the overestimation error curve f(x) = C x gamma^(x-b).
struct ErrorCurveParams {
    double coefficient = 1.0;  // C = gamma_e * beta
    double discount = 0.99;    // gamma in (0, 1]
    int offset = 1;            // b in {1, 2}
    double horizon_index = 0;  // x = T - t >= 0
};

// Inverse-CDF Gumbel samples x = mu - beta * ln(-ln u). Deterministic per seed.
Eigen::VectorXd sample_gumbel(const GumbelParams& params, std::int64_t n,
                              std::uint64_t seed);

// Soft-max (log-sum-exp) operator: beta * log sum_i w_i exp(q_i / beta),
// computed with max subtraction. Weights must sum to 1 within 1e-9.
double soft_max_operator(const Eigen::VectorXd& values,
                         const Eigen::VectorXd& weights, double beta);

// Closed-form overestimation of the Q-value at step t of a horizon-T chain:
// (T - t + 1) * gamma_e * gamma^(T-t) * beta.
double q_bias_bound(int horizon, int t, double gamma, double beta);

// Same for the V-value: coefficient (T - t + 2).
double v_bias_bound(int horizon, int t, double gamma, double beta);

// Monte-Carlo estimate of the overestimation bias of the fitted Q at step t.
// Fast mode: the per-step expectation bias above level t is injected
// analytically (Gumbel mean = location + gamma_e * beta) and only the final
// level is sampled. Slow mode (fit_per_step = true) fits the squared-error
// optimal constant (the sample mean) at every level from fresh draws and
// propagates the fitted value downward.
McEstimate simulate_nested_error(const NestedChainSpec& spec, int t,
                                 std::uint64_t seed, bool fit_per_step = false);

// Closed-form residual |Q~(s_t, a_t) - (r_t + gamma * V~(s_{t+1}))|; exact
// identity up to rounding.
double backup_identity_residual(const NestedChainSpec& spec, int t);

// f(x) = C x gamma^(x - b).
double error_curve(const ErrorCurveParams& params);

// Maximizer of f: -1 / ln(gamma). Requires discount strictly inside (0, 1).
double error_curve_argmax(double discount);

// Noise-free optimal Q at step t of the chain (with identical per-action
// values the soft-max chain reduces to the discounted reward sum).
double chain_optimal_q(const NestedChainSpec& spec, int t);

}  // namespace underq::gumbel
