#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>
#include <stdexcept>

#include "underq/dataset_io.hpp"
#include "underq/finite_mdp.hpp"
#include "underq/rng.hpp"

namespace m = underq::mdp;

TEST_CASE("random MDPs are valid, deterministic, and sparse on request") {
    const auto a = m::random_mdp(8, 3, 5);
    const auto b = m::random_mdp(8, 3, 5);
    const auto c = m::random_mdp(8, 3, 6);
    CHECK(a.transition == b.transition);
    CHECK(a.reward == b.reward);
    CHECK(a.transition != c.transition);
    CHECK_NOTHROW(a.validate());
    CHECK(a.reward.minCoeff() >= 0.0);
    CHECK(a.reward.maxCoeff() <= 1.0);

    const auto sparse = m::random_mdp(10, 2, 5, 0.3);
    for (int i = 0; i < sparse.transition.rows(); ++i) {
        const int nonzero =
            (sparse.transition.row(i).array() > 0.0).cast<int>().sum();
        CHECK(nonzero <= 3);
        CHECK(nonzero >= 1);
    }
    CHECK_THROWS_AS(m::random_mdp(0, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(m::random_mdp(2, 2, 1, 1.5), std::invalid_argument);
}

TEST_CASE("policy tables are row-stochastic") {
    const auto mdp = m::random_mdp(6, 4, 9);
    const auto uni = m::uniform_policy(mdp);
    CHECK(uni.rowwise().sum().isApproxToConstant(1.0));
    m::QTable q = Eigen::MatrixXd::Random(6, 4);
    const auto greedy = m::greedy_policy(mdp, q);
    for (int s = 0; s < 6; ++s) {
        CHECK(greedy.row(s).sum() == doctest::Approx(1.0));
        Eigen::Index best;
        q.row(s).maxCoeff(&best);
        CHECK(greedy(s, best) == 1.0);
    }
}

TEST_CASE("policy evaluation matches the direct linear solve") {
    const auto mdp = m::random_mdp(7, 3, 21, 1.0, 0.9);
    const auto pi = m::uniform_policy(mdp);

    // Oracle: V = (I - gamma P_pi)^-1 r_pi, then Q = r + gamma P V.
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(7, 7);
    Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(7);
    for (int s = 0; s < 7; ++s)
        for (int a = 0; a < 3; ++a) {
            p_pi.row(s) += pi(s, a) * mdp.transition.row(mdp.row(s, a));
            r_pi[s] += pi(s, a) * mdp.reward(s, a);
        }
    const Eigen::VectorXd v =
        (Eigen::MatrixXd::Identity(7, 7) - mdp.discount * p_pi)
            .fullPivLu()
            .solve(r_pi);
    m::QTable want(7, 3);
    for (int s = 0; s < 7; ++s)
        for (int a = 0; a < 3; ++a)
            want(s, a) = mdp.reward(s, a) +
                         mdp.discount * mdp.transition.row(mdp.row(s, a)).dot(v);

    const auto got = m::policy_evaluation(mdp, pi, 1e-12);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rollouts are deterministic and respect the model") {
    const auto mdp = m::random_mdp(5, 2, 3);
    const auto pi = m::uniform_policy(mdp);
    const auto a = m::rollout(mdp, pi, 10, 4, 77);
    const auto b = m::rollout(mdp, pi, 10, 4, 77);
    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.records.size() == 40);  // no terminal states: full episodes
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].state == b.records[i].state);
        CHECK(a.records[i].action == b.records[i].action);
        const int s = static_cast<int>(a.records[i].state[0]);
        const int act = static_cast<int>(a.records[i].action[0]);
        CHECK(s >= 0);
        CHECK(s < 5);
        CHECK(a.records[i].reward == mdp.reward(s, act));
    }
    // Episodes end with a truncation marker every `horizon` records.
    for (std::size_t i = 0; i < a.records.size(); ++i)
        CHECK(a.records[i].done == (i % 10 == 9));
}

TEST_CASE("real formatting survives a parse round trip") {
    underq::Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double x = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-30.0, 30.0));
        CHECK(std::stod(m::format_real(x)) == x);
    }
    CHECK(std::stod(m::format_real(0.1)) == 0.1);
    CHECK(m::format_real(0.0) == "0");
}

TEST_CASE("dataset serialization round trip is bit-exact") {
    const auto mdp = m::random_mdp(4, 3, 13);
    auto ds = m::rollout(mdp, m::uniform_policy(mdp), 6, 3, 5);
    ds.generator = "unit-test";

    std::stringstream first;
    m::save_dataset(ds, first);
    auto loaded = m::load_dataset(first);

    CHECK(loaded.state_dim == ds.state_dim);
    CHECK(loaded.action_dim == ds.action_dim);
    CHECK(loaded.discrete == ds.discrete);
    CHECK(loaded.seed == ds.seed);
    REQUIRE(loaded.records.size() == ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(loaded.records[i].state == ds.records[i].state);
        CHECK(loaded.records[i].action == ds.records[i].action);
        CHECK(loaded.records[i].reward == ds.records[i].reward);
        CHECK(loaded.records[i].next_state == ds.records[i].next_state);
        CHECK(loaded.records[i].done == ds.records[i].done);
    }

    std::stringstream second;
    m::save_dataset(loaded, second);
    CHECK(first.str() == second.str());
}

TEST_CASE("dataset loader rejects malformed input") {
    std::stringstream bad("not-a-dataset v1, 1, 1, 0, 0, 0\n");
    CHECK_THROWS(m::load_dataset(bad));
    std::stringstream truncated("underq-dataset v1, 1, 1, 0, 5, 0\n");
    CHECK_THROWS(m::load_dataset(truncated));
}
