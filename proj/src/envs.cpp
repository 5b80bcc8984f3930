#include "underq/envs.hpp"

#include <cmath>
#include <stdexcept>

#include "underq/operators.hpp"

namespace underq::env {

namespace {

double clampd(double x, double lo, double hi) {
    return std::min(std::max(x, lo), hi);
}

class PushEnv final : public ToyEnv {
public:
    std::string name() const override { return "push-1d"; }
    int state_dim() const override { return 1; }
    int action_dim() const override { return 1; }
    int horizon() const override { return 20; }

    Eigen::VectorXd reset(Rng& rng) override {
        pos_ = rng.uniform(-1.0, -0.6);
        return state();
    }

    void set_state(const Eigen::VectorXd& s) override { pos_ = s[0]; }

    StepResult step(const Eigen::VectorXd& action) override {
        const double a = clampd(action[0], -1.0, 1.0);
        pos_ = clampd(pos_ + 0.2 * a, -1.0, 1.0);
        const double d = pos_ - kTarget;
        return {state(), std::exp(-8.0 * d * d), false};
    }

    Eigen::VectorXd expert_action(const Eigen::VectorXd& s) const override {
        return Eigen::VectorXd::Constant(1, clampd(5.0 * (kTarget - s[0]), -1.0, 1.0));
    }

    std::unique_ptr<ToyEnv> clone() const override {
        return std::make_unique<PushEnv>(*this);
    }

private:
    static constexpr double kTarget = 0.5;
    double pos_ = 0.0;
    Eigen::VectorXd state() const { return Eigen::VectorXd::Constant(1, pos_); }
};

class ReachEnv final : public ToyEnv {
public:
    std::string name() const override { return "reach-2d"; }
    int state_dim() const override { return 2; }
    int action_dim() const override { return 2; }
    int horizon() const override { return 25; }

    Eigen::VectorXd reset(Rng& rng) override {
        pos_ = Eigen::Vector2d(rng.uniform(-1.0, -0.6), rng.uniform(-1.0, -0.6));
        return pos_;
    }

    void set_state(const Eigen::VectorXd& s) override { pos_ = s.head<2>(); }

    StepResult step(const Eigen::VectorXd& action) override {
        for (int i = 0; i < 2; ++i)
            pos_[i] = clampd(pos_[i] + 0.2 * clampd(action[i], -1.0, 1.0), -1.0, 1.0);
        const double d2 = (pos_ - kTarget).squaredNorm();
        return {pos_, std::exp(-8.0 * d2), false};
    }

    Eigen::VectorXd expert_action(const Eigen::VectorXd& s) const override {
        Eigen::VectorXd a(2);
        for (int i = 0; i < 2; ++i)
            a[i] = clampd(5.0 * (kTarget[i] - s[i]), -1.0, 1.0);
        return a;
    }

    std::unique_ptr<ToyEnv> clone() const override {
        return std::make_unique<ReachEnv>(*this);
    }

private:
    inline static const Eigen::Vector2d kTarget{0.5, 0.5};
    Eigen::Vector2d pos_{0.0, 0.0};
};

class MdpEnv final : public ToyEnv {
public:
    MdpEnv(int n_states, int n_actions, std::uint64_t seed, int horizon)
        : model_(mdp::random_mdp(n_states, n_actions, seed)), horizon_(horizon) {
        ops::UnderestimateConfig cfg;  // iota = 1: classical optimal values
        q_star_ = ops::fixed_point(model_, cfg, 1e-10).q;
    }

    std::string name() const override { return "mdp-vec"; }
    int state_dim() const override { return model_.n_states; }
    int action_dim() const override { return 1; }
    int horizon() const override { return horizon_; }

    Eigen::VectorXd reset(Rng& rng) override {
        step_rng_ = Rng(rng.next_u64());
        state_ = pick(rng, model_.initial_dist);
        return one_hot(state_);
    }

    void set_state(const Eigen::VectorXd& s) override {
        Eigen::Index idx;
        s.maxCoeff(&idx);
        state_ = static_cast<int>(idx);
    }

    StepResult step(const Eigen::VectorXd& action) override {
        const int a = bin_action(action[0]);
        const double r = model_.reward(state_, a);
        state_ = pick(step_rng_, model_.transition.row(model_.row(state_, a)));
        return {one_hot(state_), r, false};
    }

    Eigen::VectorXd expert_action(const Eigen::VectorXd& s) const override {
        Eigen::Index si;
        s.maxCoeff(&si);
        Eigen::Index best;
        q_star_.row(si).maxCoeff(&best);
        // Center of the action bin.
        const double a =
            -1.0 + (2.0 * static_cast<double>(best) + 1.0) / model_.n_actions;
        return Eigen::VectorXd::Constant(1, a);
    }

    std::unique_ptr<ToyEnv> clone() const override {
        return std::make_unique<MdpEnv>(*this);
    }

    const mdp::FiniteMdp& model() const { return model_; }

    int bin_action(double a) const {
        const double u = (clampd(a, -1.0, 1.0) + 1.0) / 2.0;
        return std::min(model_.n_actions - 1,
                        static_cast<int>(u * model_.n_actions));
    }

private:
    mdp::FiniteMdp model_;
    mdp::QTable q_star_;
    int horizon_;
    int state_ = 0;
    Rng step_rng_{0xfeedULL};

    Eigen::VectorXd one_hot(int s) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(model_.n_states);
        v[s] = 1.0;
        return v;
    }

    template <typename Probs>
    static int pick(Rng& rng, const Probs& probs) {
        const double u = rng.uniform();
        double acc = 0.0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            acc += probs(i);
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size() - 1);
    }
};

}  // namespace

std::unique_ptr<ToyEnv> make_push_env() { return std::make_unique<PushEnv>(); }
std::unique_ptr<ToyEnv> make_reach_env() { return std::make_unique<ReachEnv>(); }

std::unique_ptr<ToyEnv> make_mdp_env(int n_states, int n_actions,
                                     std::uint64_t seed, int horizon) {
    return std::make_unique<MdpEnv>(n_states, n_actions, seed, horizon);
}

const mdp::FiniteMdp& mdp_env_model(const ToyEnv& env) {
    const auto* m = dynamic_cast<const MdpEnv*>(&env);
    if (!m) throw std::invalid_argument("not an mdp-vec environment");
    return m->model();
}

std::unique_ptr<ToyEnv> make_env(const std::string& name, std::uint64_t seed) {
    std::unique_ptr<ToyEnv> env;
    if (name == "push-1d")
        env = make_push_env();
    else if (name == "reach-2d")
        env = make_reach_env();
    else if (name == "mdp-vec")
        env = make_mdp_env(5, 3, seed == 0 ? 7 : seed);
    else
        throw std::invalid_argument("unknown environment: " + name);
    set_references(*env);
    return env;
}

double mean_return(ToyEnv& env, const PolicyFn& policy, int n_episodes,
                   std::uint64_t seed) {
    if (n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");
    double total = 0.0;
    for (int ep = 0; ep < n_episodes; ++ep) {
        Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(ep + 1));
        Eigen::VectorXd s = env.reset(rng);
        double ret = 0.0;
        for (int t = 0; t < env.horizon(); ++t) {
            const auto res = env.step(policy(s, rng));
            ret += res.reward;
            s = res.state;
            if (res.done) break;
        }
        total += ret;
    }
    return total / static_cast<double>(n_episodes);
}

void set_references(ToyEnv& env, int n_episodes, std::uint64_t seed) {
    env.expert_ref = mean_return(
        env,
        [&env](const Eigen::VectorXd& s, Rng&) { return env.expert_action(s); },
        n_episodes, seed);
    env.random_ref = mean_return(
        env,
        [&env](const Eigen::VectorXd&, Rng& rng) {
            Eigen::VectorXd a(env.action_dim());
            for (int i = 0; i < env.action_dim(); ++i) a[i] = rng.uniform(-1.0, 1.0);
            return a;
        },
        n_episodes, seed + 1);
}

}  // namespace underq::env
