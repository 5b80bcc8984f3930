#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "underq/mlp.hpp"
#include "underq/rng.hpp"

namespace underq::diffusion {

// N-step variance-preserving noise schedule. alpha_bar has N+1 entries with
// alpha_bar[0] = 1 and alpha_bar[n] = prod_{k<=n} (1 - beta_k).
struct DiffusionSchedule {
    int n_steps = 5;
    Eigen::VectorXd beta;       // per-step variances beta_1..beta_N
    Eigen::VectorXd alpha_bar;  // size N+1

    double alpha(int n) const { return 1.0 - beta[n - 1]; }
    // Std-dev of the reverse-step Gaussian at step n.
    double posterior_sigma(int n) const;
};

// Per-step variances interpolated between the endpoints on a sine-warped
// grid that front-loads signal destruction, suited to small N. Defaults give
// alpha_bar[N] < 0.05 at N = 5.
DiffusionSchedule make_schedule(int n_steps, double beta_min = 0.1,
                                double beta_max = 0.75);

// aⁿ = sqrt(alpha_bar_n) a⁰ + sqrt(1 - alpha_bar_n) eps, rowwise on batches.
Eigen::MatrixXd forward_noise(const DiffusionSchedule& schedule,
                              const Eigen::MatrixXd& actions, int n,
                              const Eigen::MatrixXd& eps);

// Conditional eps-predictor: an MLP over [noisy action, state, one-hot step].
struct PolicyNet {
    nn::MlpSpec spec;
    nn::ParamSet params;
    int state_dim = 1;
    int action_dim = 1;
    int n_steps = 5;
};

PolicyNet make_policy_net(int state_dim, int action_dim, int n_steps,
                          const std::vector<int>& hidden, std::uint64_t seed,
                          nn::Activation activation = nn::Activation::Mish);

// Assembles [noisy action | state | one-hot n] net inputs for a whole batch
// at a common step n.
Eigen::MatrixXd assemble_inputs(const PolicyNet& net,
                                const Eigen::MatrixXd& noisy_actions,
                                const Eigen::MatrixXd& states, int n);

Eigen::MatrixXd predict_eps(const PolicyNet& net,
                            const Eigen::MatrixXd& noisy_actions,
                            const Eigen::MatrixXd& states, int n);

struct LossResult {
    double loss = 0.0;
    Eigen::VectorXd grad;  // w.r.t. the policy parameters
};

// eps-prediction loss with explicit per-sample steps and noise; the training
// entry point below draws them. Loss is mean over the batch of the squared
// eps residual norm.
LossResult denoise_loss_given(const PolicyNet& net,
                              const DiffusionSchedule& schedule,
                              const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& actions,
                              const std::vector<int>& steps,
                              const Eigen::MatrixXd& eps);

LossResult denoise_loss(const PolicyNet& net, const DiffusionSchedule& schedule,
                        const Eigen::MatrixXd& states,
                        const Eigen::MatrixXd& actions, Rng& rng);

// Loss value alone from externally supplied predictions (independent oracle
// path for tests).
double denoise_loss_terms(const Eigen::MatrixXd& eps,
                          const Eigen::MatrixXd& eps_pred);

// Noise consumed by one reverse chain: column blocks [a_N | z_N .. z_2],
// each action_dim wide. The final step draws no noise.
Eigen::MatrixXd draw_chain_noise(Rng& rng, Eigen::Index batch, int action_dim,
                                 int n_steps);

// Record of one reverse chain, enough to backpropagate through it.
struct ChainTape {
    std::vector<Eigen::MatrixXd> noisy_actions;  // a_N .. a_1 (index N-n)
    Eigen::MatrixXd raw_output;                  // a_0 before clamping
    Eigen::MatrixXd actions;                     // clamped a_0
};

// Ancestral sampling of the reverse chain; a pure function of
// (params, states, noise). Final actions are clamped to [-1, 1].
Eigen::MatrixXd sample_actions(const PolicyNet& net,
                               const DiffusionSchedule& schedule,
                               const Eigen::MatrixXd& states,
                               const Eigen::MatrixXd& noise,
                               ChainTape* tape = nullptr);

// Single-state convenience wrapper, deterministic per seed.
Eigen::VectorXd sample_action(const PolicyNet& net,
                              const DiffusionSchedule& schedule,
                              const Eigen::VectorXd& state, std::uint64_t seed);

// Gradient of sum_i <upstream_i, a0_i> w.r.t. the policy parameters through
// the recorded reverse chain (reparameterized pathwise derivative; clamped
// coordinates pass no gradient).
Eigen::VectorXd chain_backward(const PolicyNet& net,
                               const DiffusionSchedule& schedule,
                               const Eigen::MatrixXd& states,
                               const ChainTape& tape,
                               const Eigen::MatrixXd& upstream);

// Critic evaluation with the gradient w.r.t. the action input.
struct CriticEval {
    Eigen::VectorXd value;        // batch
    Eigen::MatrixXd action_grad;  // batch x action_dim
};
using CriticFn = std::function<CriticEval(const Eigen::MatrixXd& states,
                                          const Eigen::MatrixXd& actions)>;

struct ActorLossWeights {
    double eta = 1.0;   // Q-term weight
    double zeta = 1.0;  // regularization weight
};

// -eta * mean(Q(s, pi(s))) + zeta * denoise_loss, with the gradient flowing
// through the reverse chain and the critic's action input.
LossResult actor_loss(const PolicyNet& net, const DiffusionSchedule& schedule,
                      const CriticFn& critic, const Eigen::MatrixXd& states,
                      const Eigen::MatrixXd& dataset_actions,
                      const ActorLossWeights& weights, Rng& rng);

}  // namespace underq::diffusion
