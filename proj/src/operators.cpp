#include "underq/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "underq/expectile.hpp"
#include "underq/rng.hpp"

namespace underq::ops {

void UnderestimateConfig::validate() const {
    if (!(iota > 0.0) || iota > 1.0)
        throw std::domain_error("iota must lie in (0, 1]");
    if (noise_scale < 0.0) throw std::domain_error("noise_scale must be >= 0");
    if (interpretation == Interpretation::Expectile &&
        (!(tau > 0.0) || !(tau < 1.0)))
        throw std::domain_error("tau must lie in (0, 1)");
    if (interpretation != Interpretation::Scaling && noise_draws < 2)
        throw std::domain_error("noise_draws must be >= 2");
}

namespace {

// max over allowed actions of Q(s', .), zero for terminal states.
Eigen::VectorXd next_values(const mdp::FiniteMdp& m, const mdp::QTable& q,
                            const std::optional<Eigen::MatrixXd>& mask) {
    Eigen::VectorXd v(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        if (m.terminal_mask[static_cast<std::size_t>(s)]) {
            v[s] = 0.0;
            continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < m.n_actions; ++a) {
            if (mask && (*mask)(s, a) == 0.0) continue;
            best = std::max(best, q(s, a));
        }
        if (!std::isfinite(best))
            throw std::invalid_argument("policy mask leaves a state actionless");
        v[s] = best;
    }
    return v;
}

mdp::QTable expected_backup(const mdp::FiniteMdp& m,
                            const Eigen::VectorXd& next_v) {
    mdp::QTable out(m.n_states, m.n_actions);
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a)
            out(s, a) = m.reward(s, a) +
                        m.discount * m.transition.row(m.row(s, a)).dot(next_v);
    return out;
}

}  // namespace

double linear_quantile(Eigen::VectorXd samples, double iota) {
    if (samples.size() == 0) throw std::invalid_argument("empty sample set");
    if (!(iota >= 0.0) || iota > 1.0)
        throw std::domain_error("quantile level must lie in [0, 1]");
    std::sort(samples.data(), samples.data() + samples.size());
    const double pos = iota * static_cast<double>(samples.size() - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    const auto hi = std::min(lo + 1, samples.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return (1.0 - frac) * samples[lo] + frac * samples[hi];
}

mdp::QTable optimal_backup(const mdp::FiniteMdp& m, const mdp::QTable& q) {
    return expected_backup(m, next_values(m, q, std::nullopt));
}

mdp::QTable underestimated_backup(const mdp::FiniteMdp& m, const mdp::QTable& q,
                                  const UnderestimateConfig& cfg) {
    cfg.validate();
    if (cfg.interpretation == Interpretation::Scaling)
        return cfg.iota * expected_backup(m, next_values(m, q, cfg.policy_mask));

    if (cfg.noise_scale == 0.0) {
        // Point-mass target: any quantile or expectile is the point itself.
        return expected_backup(m, next_values(m, q, cfg.policy_mask));
    }

    // One noise tensor per sweep, shared across every (s, a) cell, so paired
    // Q inputs see common random numbers.
    const int draws = cfg.noise_draws;
    Rng rng(cfg.noise_seed);
    Eigen::MatrixXd noise(draws, m.n_states * m.n_actions);
    for (Eigen::Index i = 0; i < noise.size(); ++i)
        noise.data()[i] =
            -cfg.noise_scale * std::log(-std::log(rng.uniform_open()));

    // Per-draw noisy next-state values.
    Eigen::MatrixXd noisy_v(draws, m.n_states);
    for (int j = 0; j < draws; ++j) {
        for (int s = 0; s < m.n_states; ++s) {
            if (m.terminal_mask[static_cast<std::size_t>(s)]) {
                noisy_v(j, s) = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < m.n_actions; ++a) {
                if (cfg.policy_mask && (*cfg.policy_mask)(s, a) == 0.0) continue;
                best = std::max(best, q(s, a) + noise(j, s * m.n_actions + a));
            }
            if (!std::isfinite(best))
                throw std::invalid_argument("policy mask leaves a state actionless");
            noisy_v(j, s) = best;
        }
    }

    mdp::QTable out(m.n_states, m.n_actions);
    Eigen::VectorXd targets(draws);
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            targets = m.reward(s, a) * Eigen::VectorXd::Ones(draws) +
                      m.discount * (noisy_v * m.transition.row(m.row(s, a)).transpose());
            out(s, a) = cfg.interpretation == Interpretation::NoisyQuantile
                            ? linear_quantile(targets, cfg.iota)
                            : expectile::solve_expectile(targets, cfg.tau);
        }
    return out;
}

ContractionReport verify_contraction(const mdp::FiniteMdp& m,
                                     const UnderestimateConfig& cfg,
                                     int n_pairs, double q_range,
                                     std::uint64_t seed) {
    cfg.validate();
    if (n_pairs < 1) throw std::invalid_argument("n_pairs must be >= 1");
    if (!(q_range > 0.0)) throw std::invalid_argument("q_range must be positive");

    Rng rng(seed);
    const auto random_q = [&] {
        mdp::QTable q(m.n_states, m.n_actions);
        for (Eigen::Index i = 0; i < q.size(); ++i)
            q.data()[i] = rng.uniform(-q_range, q_range);
        return q;
    };

    ContractionReport rep;
    rep.bound = cfg.interpretation == Interpretation::Scaling
                    ? cfg.iota * m.discount
                    : m.discount;
    for (int p = 0; p < n_pairs; ++p) {
        const mdp::QTable q1 = random_q();
        // The final pair is a constant shift, which attains the modulus.
        const mdp::QTable q2 =
            (p == n_pairs - 1)
                ? mdp::QTable(q1.array() + 0.5 * q_range)
                : random_q();
        const double dist = (q1 - q2).cwiseAbs().maxCoeff();
        if (dist < 1e-12) continue;
        const double out_dist = (underestimated_backup(m, q1, cfg) -
                                 underestimated_backup(m, q2, cfg))
                                    .cwiseAbs()
                                    .maxCoeff();
        rep.max_ratio = std::max(rep.max_ratio, out_dist / dist);
        ++rep.pairs_tested;
    }
    rep.passed = rep.max_ratio <= rep.bound + 1e-9;
    return rep;
}

FixedPointResult fixed_point(const mdp::FiniteMdp& m,
                             const UnderestimateConfig& cfg, double tol,
                             int max_iters, const mdp::QTable* init) {
    cfg.validate();
    FixedPointResult res;
    res.q = init ? *init : mdp::QTable::Zero(m.n_states, m.n_actions);
    for (int it = 1; it <= max_iters; ++it) {
        mdp::QTable next = underestimated_backup(m, res.q, cfg);
        res.final_residual = (next - res.q).cwiseAbs().maxCoeff();
        res.q = std::move(next);
        res.iterations = it;
        if (res.final_residual < tol) return res;
    }
    throw std::runtime_error("fixed-point iteration exceeded max_iters");
}

mdp::QTable underestimation_gap(const mdp::FiniteMdp& m,
                                const UnderestimateConfig& cfg, double tol) {
    UnderestimateConfig base;
    base.iota = 1.0;
    base.interpretation = Interpretation::Scaling;
    const auto star = fixed_point(m, base, tol);
    const auto under = fixed_point(m, cfg, tol);
    return star.q - under.q;
}

}  // namespace underq::ops
