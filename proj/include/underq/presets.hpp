#pragma once

#include <string>
#include <vector>

#include "underq/agent.hpp"

namespace underq::presets {

// Published hyperparameter rows plus the shipped toy-task presets. The raw
// tau values follow the complementary (under-prediction-weight) convention;
// to_agent_config maps them to the over-prediction weights the agent uses
// and keeps both on record.
struct Preset {
    std::string name;
    double tau_q1_raw = 0.1;
    double tau_q2_raw = 0.2;
    double lr = 3e-4;
    double eta = 1.0;
    double zeta = 1.0;
    double grad_norm = 100.0;  // 0 disables clipping
    int n_epochs = 2000;
    bool max_q_backup = false;
    int batch_size = 256;
    std::string env_name;  // empty when no shipped environment matches
};

const std::vector<Preset>& all_presets();
const Preset& get_preset(const std::string& name);
bool has_preset(const std::string& name);

agent::AgentConfig to_agent_config(const Preset& p);

}  // namespace underq::presets
