#include "underq/finite_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "underq/rng.hpp"

namespace underq::mdp {

void FiniteMdp::validate() const {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("MDP must have at least one state and action");
    if (!(discount > 0.0) || !(discount < 1.0))
        throw std::invalid_argument("discount must lie in (0, 1)");
    if (transition.rows() != n_states * n_actions ||
        transition.cols() != n_states)
        throw std::invalid_argument("transition shape mismatch");
    if (reward.rows() != n_states || reward.cols() != n_actions)
        throw std::invalid_argument("reward shape mismatch");
    if (!reward.allFinite())
        throw std::invalid_argument("rewards must be finite");
    for (int i = 0; i < transition.rows(); ++i) {
        if (std::abs(transition.row(i).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("transition row does not sum to 1");
    }
    if (std::abs(initial_dist.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("initial distribution does not sum to 1");
    if (terminal_mask.size() != static_cast<std::size_t>(n_states))
        throw std::invalid_argument("terminal mask size mismatch");
}

TabularPolicy uniform_policy(const FiniteMdp& mdp) {
    return Eigen::MatrixXd::Constant(mdp.n_states, mdp.n_actions,
                                     1.0 / mdp.n_actions);
}

TabularPolicy greedy_policy(const FiniteMdp& mdp, const QTable& q) {
    TabularPolicy pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        Eigen::Index best;
        q.row(s).maxCoeff(&best);
        pi(s, best) = 1.0;
    }
    return pi;
}

FiniteMdp random_mdp(int n_states, int n_actions, std::uint64_t seed,
                     double sparsity, double discount) {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("degenerate MDP size");
    if (!(sparsity > 0.0) || sparsity > 1.0)
        throw std::invalid_argument("sparsity must lie in (0, 1]");
    FiniteMdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.discount = discount;
    m.transition = Eigen::MatrixXd::Zero(n_states * n_actions, n_states);
    m.reward = Eigen::MatrixXd(n_states, n_actions);
    m.initial_dist =
        Eigen::VectorXd::Constant(n_states, 1.0 / static_cast<double>(n_states));
    m.terminal_mask.assign(n_states, false);

    Rng rng(seed);
    const int support = std::max(
        1, static_cast<int>(std::ceil(sparsity * static_cast<double>(n_states))));
    std::vector<int> idx(n_states);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            std::iota(idx.begin(), idx.end(), 0);
            // Partial Fisher-Yates to pick the support.
            for (int j = 0; j < support; ++j) {
                const int k =
                    j + static_cast<int>(rng.index(static_cast<std::size_t>(n_states - j)));
                std::swap(idx[j], idx[k]);
            }
            // Dirichlet(1) over the support via normalized exponentials.
            double total = 0.0;
            std::vector<double> mass(support);
            for (int j = 0; j < support; ++j) {
                mass[j] = -std::log(rng.uniform_open());
                total += mass[j];
            }
            for (int j = 0; j < support; ++j)
                m.transition(m.row(s, a), idx[j]) = mass[j] / total;
            m.reward(s, a) = rng.uniform();
        }
    m.validate();
    return m;
}

OfflineDataset rollout(const FiniteMdp& mdp, const TabularPolicy& policy,
                       int horizon, int n_episodes, std::uint64_t seed) {
    mdp.validate();
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    for (int s = 0; s < mdp.n_states; ++s)
        if (std::abs(policy.row(s).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("policy row is not a distribution");

    const auto draw = [](Rng& rng, const auto& probs) {
        const double u = rng.uniform();
        double acc = 0.0;
        Eigen::Index last = probs.size() - 1;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            acc += probs(i);
            if (u < acc) return i;
        }
        return last;
    };

    OfflineDataset ds;
    ds.discrete = true;
    ds.state_dim = 1;
    ds.action_dim = 1;
    ds.seed = seed;
    ds.generator = "tabular-rollout";
    for (int ep = 0; ep < n_episodes; ++ep) {
        Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(ep + 1));
        int s = static_cast<int>(draw(rng, mdp.initial_dist));
        for (int step = 0; step < horizon; ++step) {
            const int a = static_cast<int>(draw(rng, policy.row(s)));
            const int s2 =
                static_cast<int>(draw(rng, mdp.transition.row(mdp.row(s, a))));
            TransitionRecord rec;
            rec.state = Eigen::VectorXd::Constant(1, static_cast<double>(s));
            rec.action = Eigen::VectorXd::Constant(1, static_cast<double>(a));
            rec.reward = mdp.reward(s, a);
            rec.next_state = Eigen::VectorXd::Constant(1, static_cast<double>(s2));
            rec.done = mdp.terminal_mask[static_cast<std::size_t>(s2)] ||
                       step + 1 == horizon;
            ds.records.push_back(std::move(rec));
            if (mdp.terminal_mask[static_cast<std::size_t>(s2)]) break;
            s = s2;
        }
    }
    return ds;
}

QTable policy_evaluation(const FiniteMdp& mdp, const TabularPolicy& policy,
                         double tol, int max_iters) {
    mdp.validate();
    QTable q = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
    for (int it = 0; it < max_iters; ++it) {
        // V^pi(s') with terminal states pinned to zero.
        Eigen::VectorXd v = (policy.array() * q.array()).rowwise().sum();
        for (int s = 0; s < mdp.n_states; ++s)
            if (mdp.terminal_mask[static_cast<std::size_t>(s)]) v[s] = 0.0;
        QTable next(mdp.n_states, mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                next(s, a) = mdp.reward(s, a) +
                             mdp.discount * mdp.transition.row(mdp.row(s, a)).dot(v);
        const double resid = (next - q).cwiseAbs().maxCoeff();
        q = next;
        if (resid < tol) return q;
    }
    throw std::runtime_error("policy evaluation did not converge");
}

}  // namespace underq::mdp
