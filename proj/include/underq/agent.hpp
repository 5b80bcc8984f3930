#pragma once

#include <cstdint>
#include <vector>

#include "underq/diffusion.hpp"
#include "underq/envs.hpp"
#include "underq/expectile.hpp"
#include "underq/finite_mdp.hpp"
#include "underq/mlp.hpp"

namespace underq::agent {

// Training hyperparameters. tau_q1/tau_q2 follow the over-prediction-weight
// convention: values above 0.5 penalize predictions above the TD target and
// push the critic below the target mean. Published presets list the
// complementary convention and are mapped on load.
struct AgentConfig {
    double tau_q1 = 0.9;
    double tau_q2 = 0.8;
    double lr = 3e-4;
    double eta = 1.0;
    double zeta = 1.0;
    nn::GradClip grad_norm = nn::GradClip::by_norm(10.0);
    int n_epochs = 50;
    int iters_per_epoch = 200;
    int batch_size = 128;
    bool max_q_backup = false;
    int k_backup_samples = 10;
    double rho = 0.995;
    double gamma = 0.99;
    int eval_interval_epochs = 5;
    int eval_episodes = 20;
    // Chain-noise multiplier used for evaluation rollouts. 1 samples the
    // policy as trained; 0 runs the deterministic reverse chain, which
    // collapses onto the guidance-selected mode (low-temperature control).
    double eval_noise_scale = 1.0;
    std::uint64_t seed = 0;
    std::vector<int> hidden{64, 64};
    int diffusion_steps = 5;
    nn::Activation activation = nn::Activation::Mish;

    void validate() const;
};

struct EvalReport {
    int epoch = 0;
    double mean_return = 0.0;
    double normalized_score = 0.0;
    double mean_q_estimate = 0.0;
    bool selected_best = false;
};

struct Critic {
    nn::MlpSpec spec;
    nn::ParamSet params;
};

// Q(s, a) for a batch; inputs are [state | action] rows.
Eigen::VectorXd critic_values(const Critic& critic, const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& actions);

struct AgentState {
    AgentConfig cfg;
    int state_dim = 1;
    int action_dim = 1;
    Critic q1, q2, q1_target, q2_target;
    diffusion::PolicyNet actor, actor_target;
    diffusion::DiffusionSchedule schedule;
    nn::OptimState opt_q1, opt_q2, opt_actor;
};

AgentState make_agent(int state_dim, int action_dim, const AgentConfig& cfg);

struct Batch {
    Eigen::MatrixXd states, actions, next_states;
    Eigen::VectorXd rewards, done;
};

Batch sample_batch(const mdp::OfflineDataset& ds, int batch_size, Rng& rng);
Batch dataset_as_batch(const mdp::OfflineDataset& ds);

struct CriticStats {
    double loss_q1 = 0.0, loss_q2 = 0.0;
    double mean_target = 0.0, mean_pred = 0.0;
};

// Double expectile TD update: next actions from the target actor (k sampled
// actions with a per-critic max under max_q_backup), target
// r + gamma (1 - done) min(Q'1, Q'2), each critic trained on its own tau.
CriticStats critic_update(AgentState& ag, const Batch& batch, Rng& rng);

struct ActorStats {
    double loss = 0.0;
};

ActorStats actor_update(AgentState& ag, const Batch& batch, Rng& rng);

void target_update(AgentState& ag);

EvalReport evaluate(const diffusion::PolicyNet& actor,
                    const diffusion::DiffusionSchedule& schedule,
                    env::ToyEnv& env, int n_episodes, std::uint64_t seed,
                    const AgentState* critics = nullptr,
                    double noise_scale = 1.0);

struct TrainResult {
    std::vector<EvalReport> reports;
    AgentState final_state;
    diffusion::PolicyNet best_actor;
    double best_score = 0.0;
    int best_epoch = 0;
};

// Algorithm loop: critic update, actor update, Polyak tracking of all three
// targets per iteration; periodic evaluation with best-checkpoint retention.
TrainResult train(const mdp::OfflineDataset& ds, env::ToyEnv& env,
                  const AgentConfig& cfg);

struct ProbeResult {
    double mean_q_estimate = 0.0;
    double mc_return_estimate = 0.0;
    double gap = 0.0;
    double mc_standard_error = 0.0;
};

// Mean critic value on dataset pairs against fresh discounted Monte-Carlo
// returns of the current actor started from those pairs.
ProbeResult overestimation_probe(const AgentState& ag,
                                 const mdp::OfflineDataset& ds,
                                 env::ToyEnv& env, int max_records,
                                 std::uint64_t seed);

// Mixed-quality dataset: a fraction of episodes from the scripted expert,
// the rest from uniform random actions.
mdp::OfflineDataset generate_mixed_dataset(env::ToyEnv& env, int n_episodes,
                                           double expert_fraction,
                                           std::uint64_t seed);

}  // namespace underq::agent
