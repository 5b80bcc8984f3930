#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

#include "underq/finite_mdp.hpp"
#include "underq/rng.hpp"

namespace underq::env {

// Small episodic continuous-control tasks with [-1, 1] action boxes. Each
// instance carries expert/random reference returns for normalized scoring.
class ToyEnv {
public:
    virtual ~ToyEnv() = default;

    virtual std::string name() const = 0;
    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual int horizon() const = 0;

    virtual Eigen::VectorXd reset(Rng& rng) = 0;
    // Restores an arbitrary state (used by the overestimation probe).
    virtual void set_state(const Eigen::VectorXd& state) = 0;

    struct StepResult {
        Eigen::VectorXd state;
        double reward = 0.0;
        bool done = false;
    };
    virtual StepResult step(const Eigen::VectorXd& action) = 0;

    // Scripted near-optimal controller used to build expert datasets and the
    // expert reference score.
    virtual Eigen::VectorXd expert_action(const Eigen::VectorXd& state) const = 0;

    virtual std::unique_ptr<ToyEnv> clone() const = 0;

    // Undiscounted-return references; computed once via set_references.
    double expert_ref = 1.0;
    double random_ref = 0.0;

    double normalized_score(double mean_return) const {
        return 100.0 * (mean_return - random_ref) / (expert_ref - random_ref);
    }
};

// 1-D push task: state is a scalar position, the action nudges it, reward
// peaks at the target position.
std::unique_ptr<ToyEnv> make_push_env();

// 2-D reach task: position in the plane, reward peaks at a target point.
std::unique_ptr<ToyEnv> make_reach_env();

// Random finite MDP exposed through one-hot state vectors and a scalar
// action binned uniformly over the discrete action set.
std::unique_ptr<ToyEnv> make_mdp_env(int n_states, int n_actions,
                                     std::uint64_t seed, int horizon = 30);
const mdp::FiniteMdp& mdp_env_model(const ToyEnv& env);

std::unique_ptr<ToyEnv> make_env(const std::string& name,
                                 std::uint64_t seed = 0);

// Mean undiscounted return of a policy given as a callback.
using PolicyFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& state, Rng& rng)>;
double mean_return(ToyEnv& env, const PolicyFn& policy, int n_episodes,
                   std::uint64_t seed);

// Computes and stores expert/random reference returns on the instance.
void set_references(ToyEnv& env, int n_episodes = 200,
                    std::uint64_t seed = 12345);

}  // namespace underq::env
