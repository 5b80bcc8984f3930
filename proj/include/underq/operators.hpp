#pragma once

#include <cstdint>
#include <optional>

#include "underq/finite_mdp.hpp"

namespace underq::ops {

// The quantile reduction q^iota applied inside the underestimated backup is
// only meaningful under an implicit distribution or scaling, so three
// concrete readings are shipped:
//   Scaling       - q^iota(x) = iota * x, the algebra of the contraction proof;
//   NoisyQuantile - iota order-statistic quantile of the backup target after
//                   Gumbel(0, noise_scale) noise on Q(s', a') before the max;
//   Expectile     - tau-expectile of the same noisy target sample.
enum class Interpretation { Scaling, NoisyQuantile, Expectile };

struct UnderestimateConfig {
    double iota = 1.0;  // in (0, 1]
    Interpretation interpretation = Interpretation::Scaling;
    double noise_scale = 0.0;  // beta >= 0 (NoisyQuantile / Expectile)
    double tau = 0.5;          // Expectile only
    int noise_draws = 1000;    // sample size of the noisy target distribution
    std::uint64_t noise_seed = 0;  // common random numbers across Q inputs
    // Optional restriction of max over a' to a policy's support.
    std::optional<Eigen::MatrixXd> policy_mask;  // S x A, nonzero = allowed

    void validate() const;
};

struct ContractionReport {
    int pairs_tested = 0;
    double max_ratio = 0.0;  // observed ||T Q1 - T Q2||inf / ||Q1 - Q2||inf
    double bound = 0.0;      // iota*gamma (Scaling) or gamma (noisy readings)
    bool passed = false;
};

// One synchronous sweep of the optimal Bellman operator (terminal next
// states contribute no bootstrap).
mdp::QTable optimal_backup(const mdp::FiniteMdp& m, const mdp::QTable& q);

// One sweep of the underestimated operator under the configured reading.
mdp::QTable underestimated_backup(const mdp::FiniteMdp& m, const mdp::QTable& q,
                                  const UnderestimateConfig& cfg);

// Applies the operator to random Q-pairs (plus one constant-shift pair that
// attains the modulus) and reports the measured sup-norm contraction ratio.
ContractionReport verify_contraction(const mdp::FiniteMdp& m,
                                     const UnderestimateConfig& cfg,
                                     int n_pairs, double q_range,
                                     std::uint64_t seed);

struct FixedPointResult {
    mdp::QTable q;
    int iterations = 0;
    double final_residual = 0.0;
};

FixedPointResult fixed_point(const mdp::FiniteMdp& m,
                             const UnderestimateConfig& cfg, double tol = 1e-10,
                             int max_iters = 100000,
                             const mdp::QTable* init = nullptr);

// Elementwise Q* (iota = 1 Scaling fixed point) minus the configured fixed
// point.
mdp::QTable underestimation_gap(const mdp::FiniteMdp& m,
                                const UnderestimateConfig& cfg,
                                double tol = 1e-10);

// Empirical iota-quantile with linear interpolation between order statistics.
double linear_quantile(Eigen::VectorXd samples, double iota);

}  // namespace underq::ops
