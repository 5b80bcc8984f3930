#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "underq/gumbel.hpp"

namespace g = underq::gumbel;

namespace {

// Independent reference for the log-sum-exp operator using long double
// accumulation without max subtraction (safe for small magnitudes).
long double naive_soft_max(const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                           double beta) {
    long double s = 0.0L;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        s += static_cast<long double>(w[i]) *
             std::exp(static_cast<long double>(v[i]) / beta);
    return static_cast<long double>(beta) * std::log(s);
}

}  // namespace

TEST_CASE("gumbel samples match analytic mean and variance") {
    const double pi = 3.141592653589793;
    for (const auto [mu, beta] : {std::pair{0.0, 1.0}, {2.5, 0.3}, {-1.0, 2.0}}) {
        const std::int64_t n = 200000;
        const auto x = g::sample_gumbel({mu, beta}, n, 42);
        const double mean = x.mean();
        const double var = (x.array() - mean).square().sum() / double(n - 1);
        const double true_mean = mu + g::kEulerMascheroni * beta;
        const double true_var = pi * pi * beta * beta / 6.0;
        const double se_mean = std::sqrt(true_var / double(n));
        CHECK(std::abs(mean - true_mean) < 5.0 * se_mean);
        CHECK(std::abs(var - true_var) < 0.02 * true_var);
    }
}

TEST_CASE("gumbel sampling is deterministic per seed") {
    const auto a = g::sample_gumbel({0.0, 1.0}, 100, 7);
    const auto b = g::sample_gumbel({0.0, 1.0}, 100, 7);
    const auto c = g::sample_gumbel({0.0, 1.0}, 100, 8);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("soft-max operator matches a naive long-double reference") {
    Eigen::VectorXd v(4), w(4);
    v << 0.3, -1.2, 0.8, 0.1;
    w << 0.1, 0.2, 0.3, 0.4;
    for (double beta : {0.1, 1.0, 5.0}) {
        const double got = g::soft_max_operator(v, w, beta);
        const double want = static_cast<double>(naive_soft_max(v, w, beta));
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("soft-max operator properties") {
    Eigen::VectorXd v(3), w(3);
    v << 10.0, -3.0, 2.0;
    w << 0.25, 0.25, 0.5;

    SUBCASE("shift equivariance") {
        const double base = g::soft_max_operator(v, w, 0.7);
        const double shifted =
            g::soft_max_operator(Eigen::VectorXd(v.array() + 5.0), w, 0.7);
        CHECK(shifted == doctest::Approx(base + 5.0).epsilon(1e-12));
    }
    SUBCASE("small beta approaches the max up to beta log w") {
        const double got = g::soft_max_operator(v, w, 1e-3);
        CHECK(got == doctest::Approx(10.0 + 1e-3 * std::log(0.25)).epsilon(1e-9));
        CHECK(g::soft_max_operator(v, w, 1e-9) ==
              doctest::Approx(10.0).epsilon(1e-7));
    }
    SUBCASE("identical values give the value back") {
        const Eigen::VectorXd c = Eigen::VectorXd::Constant(3, 4.2);
        CHECK(g::soft_max_operator(c, w, 2.0) == doctest::Approx(4.2));
    }
    SUBCASE("huge values do not overflow") {
        const Eigen::VectorXd big = Eigen::VectorXd::Constant(3, 1e5);
        CHECK(std::isfinite(g::soft_max_operator(big, w, 0.5)));
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(g::soft_max_operator(v, w, 0.0), std::invalid_argument);
        Eigen::VectorXd bad_w(3);
        bad_w << 0.5, 0.5, 0.5;
        CHECK_THROWS_AS(g::soft_max_operator(v, bad_w, 1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("closed-form overestimation bounds") {
    // Direct coefficient * gamma-power * scale structure.
    CHECK(g::q_bias_bound(5, 5, 0.9, 2.0) ==
          doctest::Approx(g::kEulerMascheroni * 2.0).epsilon(1e-15));
    CHECK(g::q_bias_bound(5, 3, 0.9, 2.0) ==
          doctest::Approx(3.0 * g::kEulerMascheroni * 0.81 * 2.0).epsilon(1e-15));
    // The state-value bound has one extra bias unit at the same scale.
    for (int T : {1, 4, 9})
        for (int t = 1; t <= T; ++t) {
            const double q = g::q_bias_bound(T, t, 0.95, 1.5);
            const double v = g::v_bias_bound(T, t, 0.95, 1.5);
            const double extra =
                g::kEulerMascheroni * std::pow(0.95, T - t) * 1.5;
            CHECK(v == doctest::Approx(q + extra).epsilon(1e-13));
        }
    CHECK_THROWS_AS(g::q_bias_bound(3, 4, 0.9, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(g::q_bias_bound(3, 2, 1.2, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(g::v_bias_bound(3, 2, 0.9, -1.0), std::invalid_argument);
}

TEST_CASE("chain optimal value is the discounted reward sum") {
    g::NestedChainSpec spec;
    spec.horizon = 4;
    spec.discount = 0.9;
    spec.rewards = {1.0, 0.5, -0.25, 2.0};
    spec.actions_per_state = 3;
    // With identical per-action values the soft-max is exact, so the optimal
    // value reduces to the plain discounted sum.
    for (int t = 1; t <= 4; ++t) {
        double want = 0.0;
        for (int k = spec.horizon; k >= t; --k)
            want = spec.rewards[static_cast<std::size_t>(k - 1)] +
                   spec.discount * want;
        CHECK(g::chain_optimal_q(spec, t) == doctest::Approx(want).epsilon(1e-13));
    }
}

TEST_CASE("nested simulation reproduces the closed-form bias") {
    g::NestedChainSpec spec;
    spec.horizon = 4;
    spec.discount = 0.9;
    spec.terminal_scale = 1.0;
    spec.mc_samples = 200000;
    spec.rewards = {0.3, 0.1, 0.7, 0.2};
    for (int t : {1, 2, 4}) {
        const double want = g::q_bias_bound(spec.horizon, t, spec.discount,
                                              spec.terminal_scale);
        const auto fast = g::simulate_nested_error(spec, t, 11);
        CHECK(fast.standard_error > 0.0);
        CHECK(std::abs(fast.value - want) < 4.0 * fast.standard_error);
        const auto slow = g::simulate_nested_error(spec, t, 12, true);
        CHECK(std::abs(slow.value - want) < 4.0 * slow.standard_error);
        // The two estimators agree within combined uncertainty.
        const double comb = std::hypot(fast.standard_error, slow.standard_error);
        CHECK(std::abs(fast.value - slow.value) < 5.0 * comb);
    }
}

TEST_CASE("nested simulation is deterministic and validates input") {
    g::NestedChainSpec spec;
    spec.horizon = 2;
    spec.mc_samples = 10000;
    const auto a = g::simulate_nested_error(spec, 1, 3);
    const auto b = g::simulate_nested_error(spec, 1, 3);
    CHECK(a.value == b.value);
    CHECK(a.standard_error == b.standard_error);
    spec.mc_samples = 100;
    CHECK_THROWS_AS(g::simulate_nested_error(spec, 1, 3), std::invalid_argument);
    spec.mc_samples = 10000;
    CHECK_THROWS_AS(g::simulate_nested_error(spec, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(g::simulate_nested_error(spec, 3, 3), std::invalid_argument);
}

TEST_CASE("one-step backup consistency of the inflated values") {
    for (double gamma : {0.5, 0.9, 0.99})
        for (int T : {1, 3, 7})
            for (int t = 1; t <= T; ++t) {
                g::NestedChainSpec spec;
                spec.horizon = T;
                spec.discount = gamma;
                spec.terminal_scale = 1.3;
                CHECK(g::backup_identity_residual(spec, t) < 1e-9);
            }
}

TEST_CASE("error curve shape") {
    SUBCASE("values") {
        // f(x) = C x gamma^(x-b)
        g::ErrorCurveParams p{2.0, 0.9, 1, 3.0};
        CHECK(g::error_curve(p) ==
              doctest::Approx(2.0 * 3.0 * std::pow(0.9, 2.0)).epsilon(1e-14));
        p.offset = 2;
        CHECK(g::error_curve(p) ==
              doctest::Approx(2.0 * 3.0 * std::pow(0.9, 1.0)).epsilon(1e-14));
    }
    SUBCASE("argmax formula and unimodality") {
        for (double gamma : {0.7, 0.9, 0.99}) {
            const double xm = g::error_curve_argmax(gamma);
            CHECK(xm == doctest::Approx(-1.0 / std::log(gamma)).epsilon(1e-15));
            const auto f = [&](double x) {
                return g::error_curve({1.0, gamma, 1, x});
            };
            CHECK(f(xm) > f(xm - 0.5));
            CHECK(f(xm) > f(xm + 0.5));
            // Strictly increasing then decreasing on a coarse scan.
            bool rising = true;
            double prev = f(0.0);
            for (double x = 0.25; x < 5.0 * xm; x += 0.25) {
                const double cur = f(x);
                if (rising && cur < prev) rising = false;
                else if (!rising) CHECK(cur <= prev + 1e-15);
                prev = cur;
            }
        }
    }
    SUBCASE("undiscounted curve has no interior maximum") {
        CHECK_THROWS_AS(g::error_curve_argmax(1.0), std::domain_error);
        // The curve itself is still defined at gamma = 1 (it is linear).
        CHECK(g::error_curve({1.0, 1.0, 1, 4.0}) == doctest::Approx(4.0));
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(g::error_curve({1.0, 0.9, 3, 1.0}),
                        std::invalid_argument);
        CHECK_THROWS_AS(g::error_curve({1.0, 0.9, 1, -1.0}),
                        std::invalid_argument);
    }
}
