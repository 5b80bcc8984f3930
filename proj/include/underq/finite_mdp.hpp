#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace underq::mdp {

// Tabular MDP <S, A, P, r, rho0, gamma>. Transition rows are indexed by
// s * n_actions + a and each row is a distribution over next states.
struct FiniteMdp {
    int n_states = 0;
    int n_actions = 0;
    Eigen::MatrixXd transition;   // (S*A) x S, rows sum to 1
    Eigen::MatrixXd reward;       // S x A
    Eigen::VectorXd initial_dist; // S
    double discount = 0.99;
    std::vector<bool> terminal_mask;  // per state; terminal => zero bootstrap

    int row(int s, int a) const { return s * n_actions + a; }
    void validate() const;
};

using QTable = Eigen::MatrixXd;  // S x A
using VTable = Eigen::VectorXd;  // S

// One offline transition. Discrete problems store the index in a length-1
// vector so tabular and continuous tasks share the same record.
struct TransitionRecord {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool done = false;
};

struct OfflineDataset {
    std::vector<TransitionRecord> records;
    int state_dim = 1;
    int action_dim = 1;
    bool discrete = false;
    std::uint64_t seed = 0;
    std::string generator;  // free-form description

    bool empty() const { return records.empty(); }
};

// Policies are S x A row-stochastic matrices.
using TabularPolicy = Eigen::MatrixXd;

TabularPolicy uniform_policy(const FiniteMdp& mdp);
TabularPolicy greedy_policy(const FiniteMdp& mdp, const QTable& q);

// Random MDP with Dirichlet(1) transition rows restricted to a random support
// of ceil(sparsity * S) states, rewards uniform in [0, 1], uniform initial
// distribution, no terminal states. Deterministic per seed.
FiniteMdp random_mdp(int n_states, int n_actions, std::uint64_t seed,
                     double sparsity = 1.0, double discount = 0.99);

// Behavior rollouts truncated at the horizon or at a terminal state.
OfflineDataset rollout(const FiniteMdp& mdp, const TabularPolicy& policy,
                       int horizon, int n_episodes, std::uint64_t seed);

// Iterates the on-policy Bellman backup to a sup-norm fixed point.
QTable policy_evaluation(const FiniteMdp& mdp, const TabularPolicy& policy,
                         double tol = 1e-10, int max_iters = 1000000);

}  // namespace underq::mdp
