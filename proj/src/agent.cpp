#include "underq/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace underq::agent {

void AgentConfig::validate() const {
    const auto check_tau = [](double t) {
        if (!(t > 0.0) || !(t < 1.0))
            throw std::invalid_argument("tau must lie in (0, 1)");
    };
    check_tau(tau_q1);
    check_tau(tau_q2);
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (eta < 0.0 || zeta < 0.0 || (eta == 0.0 && zeta == 0.0))
        throw std::invalid_argument("eta and zeta must not both be zero");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (n_epochs < 1 || iters_per_epoch < 1)
        throw std::invalid_argument("epoch counts must be >= 1");
    if (max_q_backup && k_backup_samples < 1)
        throw std::invalid_argument("k_backup_samples must be >= 1");
    if (!(rho >= 0.0) || rho > 1.0)
        throw std::invalid_argument("rho must lie in [0, 1]");
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1)");
    if (eval_interval_epochs < 1 || eval_episodes < 1)
        throw std::invalid_argument("evaluation settings must be >= 1");
    if (!(eval_noise_scale >= 0.0))
        throw std::invalid_argument("eval_noise_scale must be >= 0");
    if (diffusion_steps < 1)
        throw std::invalid_argument("diffusion_steps must be >= 1");
}

Eigen::VectorXd critic_values(const Critic& critic,
                              const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& actions) {
    Eigen::MatrixXd in(states.rows(), states.cols() + actions.cols());
    in << states, actions;
    return nn::forward(critic.params, critic.spec, in);
}

AgentState make_agent(int state_dim, int action_dim, const AgentConfig& cfg) {
    cfg.validate();
    AgentState ag;
    ag.cfg = cfg;
    ag.state_dim = state_dim;
    ag.action_dim = action_dim;

    nn::MlpSpec qspec;
    qspec.input_dim = state_dim + action_dim;
    qspec.output_dim = 1;
    qspec.hidden = cfg.hidden;
    qspec.activation = cfg.activation;
    ag.q1 = {qspec, nn::init_params(qspec, cfg.seed + 1)};
    ag.q2 = {qspec, nn::init_params(qspec, cfg.seed + 2)};
    ag.q1_target = ag.q1;
    ag.q2_target = ag.q2;

    ag.actor = diffusion::make_policy_net(state_dim, action_dim,
                                          cfg.diffusion_steps, cfg.hidden,
                                          cfg.seed + 3, cfg.activation);
    ag.actor_target = ag.actor;
    ag.schedule = diffusion::make_schedule(cfg.diffusion_steps);

    ag.opt_q1 = nn::make_optim(qspec.param_count(), cfg.lr);
    ag.opt_q2 = nn::make_optim(qspec.param_count(), cfg.lr);
    ag.opt_actor = nn::make_optim(ag.actor.spec.param_count(), cfg.lr);
    return ag;
}

Batch sample_batch(const mdp::OfflineDataset& ds, int batch_size, Rng& rng) {
    if (ds.empty()) throw std::invalid_argument("empty dataset");
    Batch b;
    b.states.resize(batch_size, ds.state_dim);
    b.actions.resize(batch_size, ds.action_dim);
    b.next_states.resize(batch_size, ds.state_dim);
    b.rewards.resize(batch_size);
    b.done.resize(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        const auto& rec = ds.records[rng.index(ds.records.size())];
        b.states.row(i) = rec.state;
        b.actions.row(i) = rec.action;
        b.next_states.row(i) = rec.next_state;
        b.rewards[i] = rec.reward;
        b.done[i] = rec.done ? 1.0 : 0.0;
    }
    return b;
}

Batch dataset_as_batch(const mdp::OfflineDataset& ds) {
    if (ds.empty()) throw std::invalid_argument("empty dataset");
    const auto n = static_cast<int>(ds.records.size());
    Batch b;
    b.states.resize(n, ds.state_dim);
    b.actions.resize(n, ds.action_dim);
    b.next_states.resize(n, ds.state_dim);
    b.rewards.resize(n);
    b.done.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& rec = ds.records[static_cast<std::size_t>(i)];
        b.states.row(i) = rec.state;
        b.actions.row(i) = rec.action;
        b.next_states.row(i) = rec.next_state;
        b.rewards[i] = rec.reward;
        b.done[i] = rec.done ? 1.0 : 0.0;
    }
    return b;
}

namespace {

// min over critics of the per-critic next-state value; per-critic max over
// k sampled next actions when max_q_backup is on.
Eigen::VectorXd next_state_value(AgentState& ag, const Eigen::MatrixXd& s2,
                                 Rng& rng) {
    const int k = ag.cfg.max_q_backup ? ag.cfg.k_backup_samples : 1;
    const auto b = s2.rows();
    Eigen::VectorXd best1, best2;
    for (int j = 0; j < k; ++j) {
        const Eigen::MatrixXd noise = diffusion::draw_chain_noise(
            rng, b, ag.action_dim, ag.schedule.n_steps);
        const Eigen::MatrixXd a2 =
            diffusion::sample_actions(ag.actor_target, ag.schedule, s2, noise);
        const Eigen::VectorXd v1 = critic_values(ag.q1_target, s2, a2);
        const Eigen::VectorXd v2 = critic_values(ag.q2_target, s2, a2);
        if (j == 0) {
            best1 = v1;
            best2 = v2;
        } else {
            best1 = best1.cwiseMax(v1);
            best2 = best2.cwiseMax(v2);
        }
    }
    return best1.cwiseMin(best2);
}

double update_one_critic(Critic& critic, nn::OptimState& opt,
                         const AgentState& ag, const Batch& batch,
                         const Eigen::VectorXd& next_v, double tau) {
    const auto b = batch.states.rows();
    Eigen::MatrixXd in(b, batch.states.cols() + batch.actions.cols());
    in << batch.states, batch.actions;
    const Eigen::VectorXd pred = nn::forward(critic.params, critic.spec, in);

    double loss = 0.0;
    Eigen::MatrixXd upstream(b, 1);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto r = expectile::td_expectile_residual(
            pred[i], batch.rewards[i], (1.0 - batch.done[i]) * next_v[i],
            ag.cfg.gamma, tau, expectile::TdConvention::PredMinusTarget);
        loss += r.loss / static_cast<double>(b);
        upstream(i, 0) = r.grad_wrt_q_pred / static_cast<double>(b);
    }
    auto back = nn::backward(critic.params, critic.spec, in, upstream);
    nn::opt_step(critic.params, std::move(back.param_grad), opt,
                 ag.cfg.grad_norm);
    return loss;
}

}  // namespace

CriticStats critic_update(AgentState& ag, const Batch& batch, Rng& rng) {
    if (batch.states.rows() == 0) throw std::invalid_argument("empty batch");
    const Eigen::VectorXd next_v = next_state_value(ag, batch.next_states, rng);
    CriticStats st;
    st.mean_target =
        (batch.rewards.array() +
         ag.cfg.gamma * (1.0 - batch.done.array()) * next_v.array())
            .mean();
    st.loss_q1 =
        update_one_critic(ag.q1, ag.opt_q1, ag, batch, next_v, ag.cfg.tau_q1);
    st.loss_q2 =
        update_one_critic(ag.q2, ag.opt_q2, ag, batch, next_v, ag.cfg.tau_q2);
    st.mean_pred = 0.5 * (critic_values(ag.q1, batch.states, batch.actions) +
                          critic_values(ag.q2, batch.states, batch.actions))
                             .mean();
    return st;
}

ActorStats actor_update(AgentState& ag, const Batch& batch, Rng& rng) {
    const diffusion::CriticFn critic_min =
        [&ag](const Eigen::MatrixXd& s,
              const Eigen::MatrixXd& a) -> diffusion::CriticEval {
        Eigen::MatrixXd in(s.rows(), s.cols() + a.cols());
        in << s, a;
        const Eigen::VectorXd v1 = nn::forward(ag.q1.params, ag.q1.spec, in);
        const Eigen::VectorXd v2 = nn::forward(ag.q2.params, ag.q2.spec, in);
        Eigen::MatrixXd sel1 = Eigen::MatrixXd::Zero(s.rows(), 1);
        Eigen::MatrixXd sel2 = Eigen::MatrixXd::Zero(s.rows(), 1);
        diffusion::CriticEval ev;
        ev.value.resize(s.rows());
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            if (v1[i] <= v2[i]) {
                ev.value[i] = v1[i];
                sel1(i, 0) = 1.0;
            } else {
                ev.value[i] = v2[i];
                sel2(i, 0) = 1.0;
            }
        }
        const Eigen::MatrixXd g1 =
            nn::backward(ag.q1.params, ag.q1.spec, in, sel1).input_grad;
        const Eigen::MatrixXd g2 =
            nn::backward(ag.q2.params, ag.q2.spec, in, sel2).input_grad;
        ev.action_grad = (g1 + g2).rightCols(a.cols());
        return ev;
    };

    // Scale-free guidance weight: eta is divided by the batch mean |Q| on
    // dataset actions so the guidance term does not outgrow the cloning term
    // as critic values inflate. The normalizer is independent of the actor
    // parameters, so the pathwise gradient stays exact.
    double eta_eff = ag.cfg.eta;
    if (ag.cfg.eta > 0.0) {
        const Eigen::VectorXd v1 =
            critic_values(ag.q1, batch.states, batch.actions);
        const Eigen::VectorXd v2 =
            critic_values(ag.q2, batch.states, batch.actions);
        const double qn = v1.cwiseMin(v2).cwiseAbs().mean();
        eta_eff = ag.cfg.eta / std::max(1.0, qn);
    }
    const auto res = diffusion::actor_loss(
        ag.actor, ag.schedule, critic_min, batch.states, batch.actions,
        {eta_eff, ag.cfg.zeta}, rng);
    nn::opt_step(ag.actor.params, res.grad, ag.opt_actor, ag.cfg.grad_norm);
    return {res.loss};
}

void target_update(AgentState& ag) {
    nn::polyak_update(ag.q1_target.params, ag.q1.params, ag.cfg.rho);
    nn::polyak_update(ag.q2_target.params, ag.q2.params, ag.cfg.rho);
    nn::polyak_update(ag.actor_target.params, ag.actor.params, ag.cfg.rho);
}

EvalReport evaluate(const diffusion::PolicyNet& actor,
                    const diffusion::DiffusionSchedule& schedule,
                    env::ToyEnv& env, int n_episodes, std::uint64_t seed,
                    const AgentState* critics, double noise_scale) {
    if (n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");
    if (!(noise_scale >= 0.0))
        throw std::invalid_argument("noise_scale must be >= 0");
    double total = 0.0;
    double q_sum = 0.0;
    std::int64_t q_count = 0;
    for (int ep = 0; ep < n_episodes; ++ep) {
        Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(ep + 1));
        Eigen::VectorXd s = env.reset(rng);
        double ret = 0.0;
        for (int t = 0; t < env.horizon(); ++t) {
            const Eigen::MatrixXd noise =
                noise_scale * diffusion::draw_chain_noise(
                                  rng, 1, actor.action_dim, schedule.n_steps);
            const Eigen::VectorXd a =
                diffusion::sample_actions(actor, schedule, s.transpose(), noise)
                    .row(0);
            if (critics) {
                const Eigen::VectorXd q1 =
                    critic_values(critics->q1, s.transpose(), a.transpose());
                const Eigen::VectorXd q2 =
                    critic_values(critics->q2, s.transpose(), a.transpose());
                q_sum += std::min(q1[0], q2[0]);
                ++q_count;
            }
            const auto res = env.step(a);
            ret += res.reward;
            s = res.state;
            if (res.done) break;
        }
        total += ret;
    }
    EvalReport rep;
    rep.mean_return = total / static_cast<double>(n_episodes);
    rep.normalized_score = env.normalized_score(rep.mean_return);
    rep.mean_q_estimate = q_count > 0 ? q_sum / static_cast<double>(q_count) : 0.0;
    return rep;
}

TrainResult train(const mdp::OfflineDataset& ds, env::ToyEnv& env,
                  const AgentConfig& cfg) {
    cfg.validate();
    if (ds.state_dim != env.state_dim() || ds.action_dim != env.action_dim())
        throw std::invalid_argument("dataset/environment dimension mismatch");

    TrainResult out;
    out.final_state = make_agent(env.state_dim(), env.action_dim(), cfg);
    AgentState& ag = out.final_state;
    Rng rng(cfg.seed + 0x51ed2701ULL);

    out.best_score = -std::numeric_limits<double>::infinity();
    out.best_actor = ag.actor;
    for (int epoch = 1; epoch <= cfg.n_epochs; ++epoch) {
        for (int it = 0; it < cfg.iters_per_epoch; ++it) {
            const Batch batch = sample_batch(ds, cfg.batch_size, rng);
            critic_update(ag, batch, rng);
            actor_update(ag, batch, rng);
            target_update(ag);
        }
        if (epoch % cfg.eval_interval_epochs == 0 || epoch == cfg.n_epochs) {
            EvalReport rep = evaluate(ag.actor, ag.schedule, env,
                                      cfg.eval_episodes, cfg.seed + 0xe7a1ULL,
                                      &ag, cfg.eval_noise_scale);
            rep.epoch = epoch;
            if (rep.normalized_score > out.best_score) {
                out.best_score = rep.normalized_score;
                out.best_actor = ag.actor;
                out.best_epoch = epoch;
                rep.selected_best = true;
            }
            out.reports.push_back(rep);
        }
    }
    return out;
}

ProbeResult overestimation_probe(const AgentState& ag,
                                 const mdp::OfflineDataset& ds,
                                 env::ToyEnv& env, int max_records,
                                 std::uint64_t seed) {
    if (ds.empty()) throw std::invalid_argument("empty dataset");
    const auto n = std::min<std::size_t>(ds.records.size(),
                                         static_cast<std::size_t>(max_records));
    Rng rng(seed);
    double q_sum = 0.0, ret_sum = 0.0, ret_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // Evenly strided subsample keeps the probe deterministic.
        const auto& rec = ds.records[i * ds.records.size() / n];
        const Eigen::VectorXd q1 = critic_values(ag.q1, rec.state.transpose(),
                                                 rec.action.transpose());
        const Eigen::VectorXd q2 = critic_values(ag.q2, rec.state.transpose(),
                                                 rec.action.transpose());
        q_sum += std::min(q1[0], q2[0]);

        // Discounted return of (take the recorded action, then follow the
        // current actor) from the recorded state.
        env.set_state(rec.state);
        auto res = env.step(rec.action);
        double g = res.reward;
        double disc = ag.cfg.gamma;
        Eigen::VectorXd s = res.state;
        // Roll well past the episode length so the discounted tail the critic
        // bootstraps through (truncation is not terminal) is captured too.
        const int rollout = std::max(
            env.horizon(),
            std::min(400, static_cast<int>(std::ceil(
                              std::log(0.01) / std::log(ag.cfg.gamma)))));
        for (int t = 1; t < rollout; ++t) {
            const Eigen::MatrixXd noise = diffusion::draw_chain_noise(
                rng, 1, ag.actor.action_dim, ag.schedule.n_steps);
            const Eigen::VectorXd a =
                diffusion::sample_actions(ag.actor, ag.schedule, s.transpose(),
                                          noise)
                    .row(0);
            res = env.step(a);
            g += disc * res.reward;
            disc *= ag.cfg.gamma;
            s = res.state;
            if (res.done) break;
        }
        ret_sum += g;
        ret_sq += g * g;
    }
    ProbeResult pr;
    const auto dn = static_cast<double>(n);
    pr.mean_q_estimate = q_sum / dn;
    pr.mc_return_estimate = ret_sum / dn;
    pr.gap = pr.mean_q_estimate - pr.mc_return_estimate;
    const double var = (ret_sq - ret_sum * ret_sum / dn) / std::max(1.0, dn - 1);
    pr.mc_standard_error = std::sqrt(std::max(0.0, var) / dn);
    return pr;
}

mdp::OfflineDataset generate_mixed_dataset(env::ToyEnv& env, int n_episodes,
                                           double expert_fraction,
                                           std::uint64_t seed) {
    if (n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");
    if (expert_fraction < 0.0 || expert_fraction > 1.0)
        throw std::invalid_argument("expert_fraction must lie in [0, 1]");
    mdp::OfflineDataset ds;
    ds.state_dim = env.state_dim();
    ds.action_dim = env.action_dim();
    ds.discrete = false;
    ds.seed = seed;
    ds.generator = env.name() + "-mixed";
    const int n_expert =
        static_cast<int>(std::lround(expert_fraction * n_episodes));
    for (int ep = 0; ep < n_episodes; ++ep) {
        const bool expert = ep < n_expert;
        Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(ep + 1));
        Eigen::VectorXd s = env.reset(rng);
        for (int t = 0; t < env.horizon(); ++t) {
            Eigen::VectorXd a;
            if (expert) {
                // Small exploration noise widens expert coverage.
                a = env.expert_action(s);
                for (Eigen::Index i = 0; i < a.size(); ++i)
                    a[i] = std::clamp(a[i] + 0.05 * rng.normal(), -1.0, 1.0);
            } else {
                a.resize(env.action_dim());
                for (Eigen::Index i = 0; i < a.size(); ++i)
                    a[i] = rng.uniform(-1.0, 1.0);
            }
            const auto res = env.step(a);
            mdp::TransitionRecord rec;
            rec.state = s;
            rec.action = a;
            rec.reward = res.reward;
            rec.next_state = res.state;
            // Time-limit truncation is not a terminal event: the critic must
            // keep bootstrapping through it or near-boundary states (where
            // expert episodes end, right at the target) get crushed values.
            rec.done = res.done;
            ds.records.push_back(std::move(rec));
            s = res.state;
            if (res.done) break;
        }
    }
    return ds;
}

}  // namespace underq::agent
