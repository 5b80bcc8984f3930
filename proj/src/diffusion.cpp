#include "underq/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace underq::diffusion {

double DiffusionSchedule::posterior_sigma(int n) const {
    if (n <= 1) return 0.0;  // last reverse step is deterministic
    const double var =
        beta[n - 1] * (1.0 - alpha_bar[n - 1]) / (1.0 - alpha_bar[n]);
    return std::sqrt(var);
}

DiffusionSchedule make_schedule(int n_steps, double beta_min, double beta_max) {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    if (!(beta_min > 0.0) || !(beta_max < 1.0) || beta_max < beta_min)
        throw std::invalid_argument(
            "require 0 < beta_min <= beta_max < 1");
    DiffusionSchedule s;
    s.n_steps = n_steps;
    s.beta.resize(n_steps);
    for (int n = 1; n <= n_steps; ++n) {
        double warp;
        if (n_steps == 1) {
            warp = 1.0;
        } else {
            const double u =
                static_cast<double>(n - 1) / static_cast<double>(n_steps - 1);
            warp = std::sin(0.5 * 3.141592653589793 * u);
        }
        s.beta[n - 1] = beta_min + (beta_max - beta_min) * warp;
    }
    s.alpha_bar.resize(n_steps + 1);
    s.alpha_bar[0] = 1.0;
    for (int n = 1; n <= n_steps; ++n)
        s.alpha_bar[n] = s.alpha_bar[n - 1] * (1.0 - s.beta[n - 1]);
    return s;
}

Eigen::MatrixXd forward_noise(const DiffusionSchedule& schedule,
                              const Eigen::MatrixXd& actions, int n,
                              const Eigen::MatrixXd& eps) {
    if (n < 1 || n > schedule.n_steps)
        throw std::invalid_argument("step index out of range");
    const double ab = schedule.alpha_bar[n];
    return std::sqrt(ab) * actions + std::sqrt(1.0 - ab) * eps;
}

PolicyNet make_policy_net(int state_dim, int action_dim, int n_steps,
                          const std::vector<int>& hidden, std::uint64_t seed,
                          nn::Activation activation) {
    PolicyNet net;
    net.state_dim = state_dim;
    net.action_dim = action_dim;
    net.n_steps = n_steps;
    net.spec.input_dim = action_dim + state_dim + n_steps;
    net.spec.output_dim = action_dim;
    net.spec.hidden = hidden;
    net.spec.activation = activation;
    net.params = nn::init_params(net.spec, seed);
    return net;
}

Eigen::MatrixXd assemble_inputs(const PolicyNet& net,
                                const Eigen::MatrixXd& noisy_actions,
                                const Eigen::MatrixXd& states, int n) {
    if (n < 1 || n > net.n_steps)
        throw std::invalid_argument("step index out of range");
    const Eigen::Index b = states.rows();
    Eigen::MatrixXd in =
        Eigen::MatrixXd::Zero(b, net.action_dim + net.state_dim + net.n_steps);
    in.leftCols(net.action_dim) = noisy_actions;
    in.middleCols(net.action_dim, net.state_dim) = states;
    in.col(net.action_dim + net.state_dim + n - 1).setOnes();
    return in;
}

Eigen::MatrixXd predict_eps(const PolicyNet& net,
                            const Eigen::MatrixXd& noisy_actions,
                            const Eigen::MatrixXd& states, int n) {
    return nn::forward(net.params, net.spec,
                       assemble_inputs(net, noisy_actions, states, n));
}

double denoise_loss_terms(const Eigen::MatrixXd& eps,
                          const Eigen::MatrixXd& eps_pred) {
    return (eps_pred - eps).array().square().rowwise().sum().mean();
}

LossResult denoise_loss_given(const PolicyNet& net,
                              const DiffusionSchedule& schedule,
                              const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& actions,
                              const std::vector<int>& steps,
                              const Eigen::MatrixXd& eps) {
    const Eigen::Index b = states.rows();
    if (actions.rows() != b || eps.rows() != b ||
        steps.size() != static_cast<std::size_t>(b))
        throw std::invalid_argument("batch size mismatch");
    LossResult res;
    res.grad = Eigen::VectorXd::Zero(net.params.flat.size());
    // Group rows by step so the net runs on one step embedding at a time.
    for (int n = 1; n <= schedule.n_steps; ++n) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < b; ++i)
            if (steps[static_cast<std::size_t>(i)] == n) rows.push_back(i);
        if (rows.empty()) continue;
        const auto m = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd a0(m, net.action_dim), s(m, net.state_dim),
            e(m, net.action_dim);
        for (Eigen::Index j = 0; j < m; ++j) {
            a0.row(j) = actions.row(rows[static_cast<std::size_t>(j)]);
            s.row(j) = states.row(rows[static_cast<std::size_t>(j)]);
            e.row(j) = eps.row(rows[static_cast<std::size_t>(j)]);
        }
        const Eigen::MatrixXd noisy = forward_noise(schedule, a0, n, e);
        const Eigen::MatrixXd in = assemble_inputs(net, noisy, s, n);
        const Eigen::MatrixXd pred = nn::forward(net.params, net.spec, in);
        const Eigen::MatrixXd resid = pred - e;
        res.loss += resid.array().square().sum() / static_cast<double>(b);
        const Eigen::MatrixXd upstream = (2.0 / static_cast<double>(b)) * resid;
        res.grad += nn::backward(net.params, net.spec, in, upstream).param_grad;
    }
    return res;
}

LossResult denoise_loss(const PolicyNet& net, const DiffusionSchedule& schedule,
                        const Eigen::MatrixXd& states,
                        const Eigen::MatrixXd& actions, Rng& rng) {
    const Eigen::Index b = states.rows();
    std::vector<int> steps(static_cast<std::size_t>(b));
    Eigen::MatrixXd eps(b, net.action_dim);
    for (Eigen::Index i = 0; i < b; ++i) {
        steps[static_cast<std::size_t>(i)] =
            1 + static_cast<int>(rng.index(static_cast<std::size_t>(schedule.n_steps)));
        for (int d = 0; d < net.action_dim; ++d) eps(i, d) = rng.normal();
    }
    return denoise_loss_given(net, schedule, states, actions, steps, eps);
}

Eigen::MatrixXd draw_chain_noise(Rng& rng, Eigen::Index batch, int action_dim,
                                 int n_steps) {
    Eigen::MatrixXd noise(batch, action_dim * n_steps);
    for (Eigen::Index i = 0; i < batch; ++i)
        for (Eigen::Index j = 0; j < noise.cols(); ++j)
            noise(i, j) = rng.normal();
    return noise;
}

Eigen::MatrixXd sample_actions(const PolicyNet& net,
                               const DiffusionSchedule& schedule,
                               const Eigen::MatrixXd& states,
                               const Eigen::MatrixXd& noise,
                               ChainTape* tape) {
    const Eigen::Index b = states.rows();
    const int ad = net.action_dim;
    const int n_steps = schedule.n_steps;
    if (noise.rows() != b || noise.cols() != ad * n_steps)
        throw std::invalid_argument("chain noise shape mismatch");
    if (tape) {
        tape->noisy_actions.clear();
        tape->noisy_actions.reserve(static_cast<std::size_t>(n_steps));
    }
    Eigen::MatrixXd a = noise.leftCols(ad);  // a_N ~ N(0, I)
    for (int n = n_steps; n >= 1; --n) {
        if (tape) tape->noisy_actions.push_back(a);
        const Eigen::MatrixXd eps_hat = predict_eps(net, a, states, n);
        const double c1 = 1.0 / std::sqrt(schedule.alpha(n));
        const double c2 = schedule.beta[n - 1] /
                          (std::sqrt(1.0 - schedule.alpha_bar[n]) *
                           std::sqrt(schedule.alpha(n)));
        Eigen::MatrixXd mean = c1 * a - c2 * eps_hat;
        const double sigma = schedule.posterior_sigma(n);
        if (sigma > 0.0) {
            // Noise block for step n lives at column offset (N - n + 1) * ad.
            mean += sigma * noise.middleCols((n_steps - n + 1) * ad, ad);
        }
        a = std::move(mean);
    }
    Eigen::MatrixXd clamped = a.cwiseMax(-1.0).cwiseMin(1.0);
    if (tape) {
        tape->raw_output = std::move(a);
        tape->actions = clamped;
    }
    return clamped;
}

Eigen::VectorXd sample_action(const PolicyNet& net,
                              const DiffusionSchedule& schedule,
                              const Eigen::VectorXd& state,
                              std::uint64_t seed) {
    Rng rng(seed);
    const Eigen::MatrixXd noise =
        draw_chain_noise(rng, 1, net.action_dim, schedule.n_steps);
    return sample_actions(net, schedule, state.transpose(), noise).row(0);
}

Eigen::VectorXd chain_backward(const PolicyNet& net,
                               const DiffusionSchedule& schedule,
                               const Eigen::MatrixXd& states,
                               const ChainTape& tape,
                               const Eigen::MatrixXd& upstream) {
    const int n_steps = schedule.n_steps;
    if (tape.noisy_actions.size() != static_cast<std::size_t>(n_steps))
        throw std::invalid_argument("tape does not match schedule");
    Eigen::MatrixXd d = upstream;
    // Clamped coordinates pass no gradient.
    d.array() *= (tape.raw_output.array().abs() <= 1.0).cast<double>();
    Eigen::VectorXd param_grad = Eigen::VectorXd::Zero(net.params.flat.size());
    for (int n = 1; n <= n_steps; ++n) {
        const Eigen::MatrixXd& a =
            tape.noisy_actions[static_cast<std::size_t>(n_steps - n)];
        const double c1 = 1.0 / std::sqrt(schedule.alpha(n));
        const double c2 = schedule.beta[n - 1] /
                          (std::sqrt(1.0 - schedule.alpha_bar[n]) *
                           std::sqrt(schedule.alpha(n)));
        const Eigen::MatrixXd in = assemble_inputs(net, a, states, n);
        const auto back = nn::backward(net.params, net.spec, in, -c2 * d);
        param_grad += back.param_grad;
        d = c1 * d + back.input_grad.leftCols(net.action_dim);
    }
    return param_grad;
}

LossResult actor_loss(const PolicyNet& net, const DiffusionSchedule& schedule,
                      const CriticFn& critic, const Eigen::MatrixXd& states,
                      const Eigen::MatrixXd& dataset_actions,
                      const ActorLossWeights& weights, Rng& rng) {
    if (weights.eta < 0.0 || weights.zeta < 0.0 ||
        (weights.eta == 0.0 && weights.zeta == 0.0))
        throw std::invalid_argument("actor loss weights must not both be zero");
    LossResult res;
    res.grad = Eigen::VectorXd::Zero(net.params.flat.size());
    const Eigen::Index b = states.rows();

    if (weights.eta > 0.0) {
        const Eigen::MatrixXd noise =
            draw_chain_noise(rng, b, net.action_dim, schedule.n_steps);
        ChainTape tape;
        const Eigen::MatrixXd actions =
            sample_actions(net, schedule, states, noise, &tape);
        const CriticEval ev = critic(states, actions);
        res.loss += -weights.eta * ev.value.mean();
        const Eigen::MatrixXd upstream =
            (-weights.eta / static_cast<double>(b)) * ev.action_grad;
        res.grad += chain_backward(net, schedule, states, tape, upstream);
    }
    if (weights.zeta > 0.0) {
        const LossResult d =
            denoise_loss(net, schedule, states, dataset_actions, rng);
        res.loss += weights.zeta * d.loss;
        res.grad += weights.zeta * d.grad;
    }
    return res;
}

}  // namespace underq::diffusion
