#include "underq/presets.hpp"

#include <stdexcept>

namespace underq::presets {

const std::vector<Preset>& all_presets() {
    static const std::vector<Preset> table = {
        // Published rows (no shipped environment; kept for documentation and
        // config fidelity).
        {"halfcheetah-medium-v2", 0.1, 0.2, 3e-4, 1.0, 0.005, 100.0, 2000, false, 256, ""},
        {"hopper-medium-v2", 0.1, 0.2, 3e-4, 1.0, 0.5, 100.0, 2000, false, 256, ""},
        {"walker2d-medium-v2", 0.1, 0.2, 3e-4, 1.0, 0.2, 100.0, 2000, false, 256, ""},
        {"halfcheetah-medium-replay-v2", 0.1, 0.2, 3e-4, 1.0, 0.005, 2.0, 2000, false, 256, ""},
        {"hopper-medium-replay-v2", 0.1, 0.2, 3e-4, 1.0, 0.1, 10.0, 2000, false, 256, ""},
        {"walker2d-medium-replay-v2", 0.1, 0.2, 3e-4, 1.0, 0.1, 4.0, 2000, false, 256, ""},
        {"halfcheetah-medium-expert-v2", 0.1, 0.2, 3e-4, 1.0, 1.0, 7.0, 2000, false, 256, ""},
        {"hopper-medium-expert-v2", 0.1, 0.2, 3e-4, 1.0, 1.0, 100.0, 2000, false, 256, ""},
        {"walker2d-medium-expert-v2", 0.1, 0.2, 3e-4, 1.0, 1.0, 5.0, 2000, false, 256, ""},
        {"antmaze-umaze-v0", 0.2, 0.3, 3e-4, 0.5, 1.0, 10.0, 1000, true, 256, ""},
        {"antmaze-umaze-diverse-v0", 0.2, 0.3, 3e-4, 2.0, 1.0, 3.0, 1000, true, 256, ""},
        {"pen-human-v1", 0.2, 0.3, 6e-5, 0.1, 1.0, 50.0, 1000, true, 256, ""},
        {"pen-cloned-v1", 0.2, 0.3, 3e-5, 0.01, 1.0, 0.0, 1000, true, 256, ""},
        {"kitchen-complete-v0", 0.2, 0.3, 3e-4, 0.005, 1.0, 9.0, 1000, false, 256, ""},
        {"kitchen-partial-v0", 0.2, 0.3, 3e-4, 0.005, 1.0, 100.0, 1000, false, 256, ""},
        {"kitchen-mixed-v0", 0.2, 0.3, 3e-4, 0.005, 1.0, 100.0, 1000, false, 256, ""},
        // Desk-scale toy presets with shipped environments.
        {"push-toy", 0.1, 0.2, 3e-4, 2.0, 1.0, 10.0, 60, false, 128, "push-1d"},
        {"reach-toy", 0.1, 0.2, 3e-4, 1.0, 1.0, 10.0, 60, false, 128, "reach-2d"},
        {"mdp-toy", 0.1, 0.2, 3e-4, 1.0, 1.0, 10.0, 40, false, 128, "mdp-vec"},
    };
    return table;
}

bool has_preset(const std::string& name) {
    for (const auto& p : all_presets())
        if (p.name == name) return true;
    return false;
}

const Preset& get_preset(const std::string& name) {
    for (const auto& p : all_presets())
        if (p.name == name) return p;
    throw std::invalid_argument("unknown preset: " + name);
}

agent::AgentConfig to_agent_config(const Preset& p) {
    agent::AgentConfig cfg;
    cfg.tau_q1 = 1.0 - p.tau_q1_raw;
    cfg.tau_q2 = 1.0 - p.tau_q2_raw;
    cfg.lr = p.lr;
    cfg.eta = p.eta;
    cfg.zeta = p.zeta;
    cfg.grad_norm = p.grad_norm > 0.0 ? nn::GradClip::by_norm(p.grad_norm)
                                      : nn::GradClip::none();
    cfg.n_epochs = p.n_epochs;
    cfg.max_q_backup = p.max_q_backup;
    cfg.batch_size = p.batch_size;
    if (!p.env_name.empty()) {
        // Desk-scale loop sizes for the toy environments. The short-horizon
        // tasks use a matched discount and noise-free evaluation chains
        // (the deterministic reverse process picks the guided mode).
        cfg.iters_per_epoch = 200;
        cfg.eval_interval_epochs = 5;
        cfg.eval_episodes = 20;
        cfg.hidden = {64, 64};
        cfg.gamma = 0.95;
        cfg.eval_noise_scale = 0.0;
    } else {
        cfg.iters_per_epoch = 1000;
        cfg.eval_interval_epochs = 50;
        cfg.eval_episodes = 10;
        cfg.hidden = {256, 256, 256};
    }
    return cfg;
}

}  // namespace underq::presets
