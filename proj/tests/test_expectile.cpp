#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "underq/expectile.hpp"
#include "underq/rng.hpp"

namespace ex = underq::expectile;

TEST_CASE("asymmetric squared loss values") {
    CHECK(ex::loss(0.5, 2.0) == doctest::Approx(0.5 * 4.0));
    CHECK(ex::loss(0.5, -2.0) == doctest::Approx(0.5 * 4.0));
    CHECK(ex::loss(0.9, 1.0) == doctest::Approx(0.9));
    CHECK(ex::loss(0.9, -1.0) == doctest::Approx(0.1));
    CHECK(ex::loss(0.9, 0.0) == 0.0);
    CHECK_THROWS_AS(ex::loss(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ex::loss(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("loss gradient matches finite differences") {
    underq::Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const double tau = rng.uniform(0.05, 0.95);
        double u = rng.uniform(-3.0, 3.0);
        if (std::abs(u) < 1e-3) u = 0.5;  // keep clear of the kink
        const double h = 1e-6;
        const double fd = (ex::loss(tau, u + h) - ex::loss(tau, u - h)) / (2 * h);
        const double an = ex::loss_grad(tau, u);
        CHECK(std::abs(fd - an) < 1e-6 * std::max(1.0, std::abs(an)));
    }
    // Tie at zero residual takes the positive branch: gradient zero.
    CHECK(ex::loss_grad(0.8, 0.0) == 0.0);
}

TEST_CASE("expectile of a two-point sample solves the balance equation") {
    Eigen::VectorXd x(2);
    x << 0.0, 1.0;
    // tau (1 - e) = (1 - tau) e  =>  e = tau.
    CHECK(std::abs(ex::solve_expectile(x, 0.9) - 0.9) < 1e-9);
    CHECK(std::abs(ex::solve_expectile(x, 0.5) - 0.5) < 1e-9);
    CHECK(std::abs(ex::solve_expectile(x, 0.1) - 0.1) < 1e-9);
}

TEST_CASE("expectile solver properties") {
    underq::Rng rng(17);
    Eigen::VectorXd x(9);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(-4.0, 4.0);

    SUBCASE("tau = 0.5 is the mean") {
        CHECK(ex::solve_expectile(x, 0.5) ==
              doctest::Approx(x.mean()).epsilon(1e-8));
    }
    SUBCASE("monotone in tau and inside the sample range") {
        double prev = x.minCoeff();
        for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double e = ex::solve_expectile(x, tau);
            CHECK(e >= prev - 1e-9);
            CHECK(e <= x.maxCoeff() + 1e-9);
            prev = e;
        }
    }
    SUBCASE("first-order condition holds at the solution") {
        const double tau = 0.8;
        const double e = ex::solve_expectile(x, tau);
        double g = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double d = x[i] - e;
            g += (d >= 0 ? tau : (1.0 - tau)) * d / double(x.size());
        }
        CHECK(std::abs(g) < 1e-9);
    }
    SUBCASE("duplicating a sample equals doubling its weight") {
        Eigen::VectorXd dup(x.size() + 1);
        dup << x, x[0];
        Eigen::VectorXd w = Eigen::VectorXd::Constant(
            x.size(), 1.0 / double(x.size() + 1));
        w[0] = 2.0 / double(x.size() + 1);
        CHECK(ex::solve_expectile(dup, 0.7) ==
              doctest::Approx(ex::solve_expectile(x, w, 0.7)).epsilon(1e-8));
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(ex::solve_expectile(Eigen::VectorXd(), 0.5),
                        std::invalid_argument);
        Eigen::VectorXd bad_w = Eigen::VectorXd::Constant(9, 0.2);
        CHECK_THROWS_AS(ex::solve_expectile(x, bad_w, 0.5),
                        std::invalid_argument);
    }
}

TEST_CASE("the two TD residual conventions define the same loss surface") {
    underq::Rng rng(23);
    for (int i = 0; i < 500; ++i) {
        const double q = rng.uniform(-5.0, 5.0);
        const double r = rng.uniform(-1.0, 1.0);
        const double qn = rng.uniform(-5.0, 5.0);
        const double tau = rng.uniform(0.05, 0.95);
        const auto a = ex::td_expectile_residual(
            q, r, qn, 0.99, tau, ex::TdConvention::PredMinusTarget);
        const auto b = ex::td_expectile_residual(
            q, r, qn, 0.99, tau, ex::TdConvention::TargetMinusPred);
        CHECK(std::abs(a.loss - b.loss) < 1e-12);
        CHECK(std::abs(a.grad_wrt_q_pred - b.grad_wrt_q_pred) < 1e-12);
    }
}

TEST_CASE("TD residual weights over-prediction by tau") {
    // q above the target: weight tau; below: weight 1 - tau.
    const auto over = ex::td_expectile_residual(
        2.0, 1.0, 0.0, 0.99, 0.9, ex::TdConvention::PredMinusTarget);
    CHECK(over.loss == doctest::Approx(0.9 * 1.0));
    CHECK(over.grad_wrt_q_pred == doctest::Approx(2.0 * 0.9 * 1.0));
    const auto under = ex::td_expectile_residual(
        0.0, 1.0, 0.0, 0.99, 0.9, ex::TdConvention::PredMinusTarget);
    CHECK(under.loss == doctest::Approx(0.1 * 1.0));
    CHECK(under.grad_wrt_q_pred == doctest::Approx(-2.0 * 0.1 * 1.0));
}
