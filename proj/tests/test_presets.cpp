#include <doctest.h>

#include <stdexcept>

#include "underq/presets.hpp"

namespace pr = underq::presets;

TEST_CASE("preset lookup") {
    CHECK(pr::has_preset("push-toy"));
    CHECK(pr::has_preset("halfcheetah-medium-v2"));
    CHECK(!pr::has_preset("nope"));
    CHECK_THROWS_AS(pr::get_preset("nope"), std::invalid_argument);
    CHECK(pr::all_presets().size() >= 19);
}

TEST_CASE("published rows keep their recorded hyperparameters") {
    const auto& hc = pr::get_preset("halfcheetah-medium-v2");
    CHECK(hc.tau_q1_raw == 0.1);
    CHECK(hc.tau_q2_raw == 0.2);
    CHECK(hc.lr == 3e-4);
    CHECK(hc.eta == 1.0);
    CHECK(hc.zeta == 0.005);
    CHECK(hc.grad_norm == 100.0);
    CHECK(hc.n_epochs == 2000);
    CHECK(!hc.max_q_backup);

    const auto& am = pr::get_preset("antmaze-umaze-diverse-v0");
    CHECK(am.tau_q1_raw == 0.2);
    CHECK(am.tau_q2_raw == 0.3);
    CHECK(am.eta == 2.0);
    CHECK(am.max_q_backup);

    const auto& pen = pr::get_preset("pen-cloned-v1");
    CHECK(pen.lr == 3e-5);
    CHECK(pen.eta == 0.01);
    CHECK(pen.grad_norm == 0.0);  // clipping disabled
}

TEST_CASE("config mapping flips the tau convention and loop sizes") {
    const auto cfg = pr::to_agent_config(pr::get_preset("push-toy"));
    CHECK(cfg.tau_q1 == doctest::Approx(0.9));
    CHECK(cfg.tau_q2 == doctest::Approx(0.8));
    CHECK(cfg.grad_norm.enabled);
    CHECK(cfg.grad_norm.max_norm == 10.0);
    CHECK(cfg.iters_per_epoch == 200);
    CHECK(cfg.hidden == std::vector<int>{64, 64});

    const auto pen = pr::to_agent_config(pr::get_preset("pen-cloned-v1"));
    CHECK(!pen.grad_norm.enabled);
    CHECK(pen.hidden == std::vector<int>{256, 256, 256});
    CHECK(pen.iters_per_epoch == 1000);
}
