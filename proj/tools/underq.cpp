#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "underq/agent.hpp"
#include "underq/dataset_io.hpp"
#include "underq/envs.hpp"
#include "underq/gumbel.hpp"
#include "underq/operators.hpp"
#include "underq/presets.hpp"

namespace {

using underq::mdp::format_real;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumericalFailure = 3;

// Resolved-config snapshot next to the primary output; timestamps go to a
// sidecar log only so primary outputs stay byte-identical across reruns.
void write_run_metadata(const std::string& out_path,
                        const std::map<std::string, std::string>& resolved) {
    if (out_path.empty()) return;
    {
        std::ofstream cfg(out_path + ".config", std::ios::binary);
        for (const auto& [k, v] : resolved) cfg << k << "=" << v << "\n";
    }
    std::ofstream log(out_path + ".log", std::ios::app);
    const auto now = std::chrono::system_clock::now();
    log << "run at epoch-ms "
        << std::chrono::duration_cast<std::chrono::milliseconds>(
               now.time_since_epoch())
               .count()
        << "\n";
}

std::ostream& open_output(std::ofstream& file, const std::string& out_path) {
    if (out_path.empty()) return std::cout;
    file.open(out_path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open " + out_path);
    return file;
}

struct CommonArgs {
    std::uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--seed", args.seed, "global random seed");
    cmd->add_option("--out", args.out, "output file (default stdout)");
}

int cmd_simulate_error(const CommonArgs& common, int horizon, double gamma,
                       double beta, std::int64_t samples) {
    std::ofstream file;
    auto& out = open_output(file, common.out);
    out << "t, closed_form_q_bias, closed_form_v_bias, mc_bias, mc_se\n";
    for (int t = 1; t <= horizon; ++t) {
        underq::gumbel::NestedChainSpec spec;
        spec.horizon = horizon;
        spec.discount = gamma;
        spec.terminal_scale = beta;
        spec.mc_samples = samples;
        const auto est = underq::gumbel::simulate_nested_error(
            spec, t, common.seed + static_cast<std::uint64_t>(t));
        out << t << ", "
            << format_real(underq::gumbel::q_bias_bound(horizon, t, gamma, beta))
            << ", "
            << format_real(underq::gumbel::v_bias_bound(horizon, t, gamma, beta))
            << ", " << format_real(est.value) << ", "
            << format_real(est.standard_error) << "\n";
    }
    write_run_metadata(common.out,
                       {{"command", "simulate-error"},
                        {"horizon", std::to_string(horizon)},
                        {"gamma", format_real(gamma)},
                        {"beta", format_real(beta)},
                        {"samples", std::to_string(samples)},
                        {"seed", std::to_string(common.seed)}});
    return kExitOk;
}

int cmd_error_curve(const CommonArgs& common, double gamma, double coefficient,
                    int offset, double x_max, double x_step) {
    std::ofstream file;
    auto& out = open_output(file, common.out);
    out << "x, f\n";
    for (double x = 0.0; x <= x_max + 1e-12; x += x_step) {
        underq::gumbel::ErrorCurveParams p{coefficient, gamma, offset, x};
        out << format_real(x) << ", " << format_real(underq::gumbel::error_curve(p))
            << "\n";
    }
    out << "# argmax = " << format_real(underq::gumbel::error_curve_argmax(gamma))
        << "\n";
    write_run_metadata(common.out, {{"command", "error-curve"},
                                    {"gamma", format_real(gamma)},
                                    {"coefficient", format_real(coefficient)},
                                    {"offset", std::to_string(offset)}});
    return kExitOk;
}

underq::ops::Interpretation parse_interp(const std::string& s) {
    if (s == "scaling") return underq::ops::Interpretation::Scaling;
    if (s == "quantile") return underq::ops::Interpretation::NoisyQuantile;
    if (s == "expectile") return underq::ops::Interpretation::Expectile;
    throw CLI::ValidationError("--interp", "unknown interpretation " + s);
}

int cmd_verify_contraction(const CommonArgs& common, int states, int actions,
                           double iota, double gamma, const std::string& interp,
                           double noise_scale, double tau, int pairs,
                           double q_range) {
    auto m = underq::mdp::random_mdp(states, actions, common.seed + 1, 1.0, gamma);
    underq::ops::UnderestimateConfig cfg;
    cfg.iota = iota;
    cfg.interpretation = parse_interp(interp);
    cfg.noise_scale = noise_scale;
    cfg.tau = tau;
    cfg.noise_seed = common.seed + 2;
    const auto rep =
        underq::ops::verify_contraction(m, cfg, pairs, q_range, common.seed + 3);
    std::ofstream file;
    auto& out = open_output(file, common.out);
    out << "pairs_tested, max_ratio, bound, passed\n";
    out << rep.pairs_tested << ", " << format_real(rep.max_ratio) << ", "
        << format_real(rep.bound) << ", " << (rep.passed ? 1 : 0) << "\n";
    write_run_metadata(common.out, {{"command", "verify-contraction"},
                                    {"states", std::to_string(states)},
                                    {"actions", std::to_string(actions)},
                                    {"iota", format_real(iota)},
                                    {"gamma", format_real(gamma)},
                                    {"interp", interp},
                                    {"pairs", std::to_string(pairs)},
                                    {"seed", std::to_string(common.seed)}});
    return rep.passed ? kExitOk : kExitNumericalFailure;
}

int cmd_fixed_point(const CommonArgs& common, int states, int actions,
                    double iota, double gamma, const std::string& interp,
                    double noise_scale, double tau, double tol) {
    auto m = underq::mdp::random_mdp(states, actions, common.seed + 1, 1.0, gamma);
    underq::ops::UnderestimateConfig cfg;
    cfg.iota = iota;
    cfg.interpretation = parse_interp(interp);
    cfg.noise_scale = noise_scale;
    cfg.tau = tau;
    cfg.noise_seed = common.seed + 2;
    const auto res = underq::ops::fixed_point(m, cfg, tol);
    const auto gap = underq::ops::underestimation_gap(m, cfg, tol);
    std::ofstream file;
    auto& out = open_output(file, common.out);
    out << "iterations, final_residual, q_min, q_max, mean_gap_to_qstar\n";
    out << res.iterations << ", " << format_real(res.final_residual) << ", "
        << format_real(res.q.minCoeff()) << ", " << format_real(res.q.maxCoeff())
        << ", " << format_real(gap.mean()) << "\n";
    write_run_metadata(common.out, {{"command", "fixed-point"},
                                    {"states", std::to_string(states)},
                                    {"actions", std::to_string(actions)},
                                    {"iota", format_real(iota)},
                                    {"gamma", format_real(gamma)},
                                    {"interp", interp},
                                    {"seed", std::to_string(common.seed)}});
    return kExitOk;
}

int cmd_gen_dataset(const CommonArgs& common, const std::string& env_name,
                    int episodes, double expert_frac) {
    if (common.out.empty())
        throw CLI::ValidationError("--out", "gen-dataset requires --out");
    auto env = underq::env::make_env(env_name, common.seed);
    const auto ds = underq::agent::generate_mixed_dataset(*env, episodes,
                                                          expert_frac, common.seed);
    underq::mdp::save_dataset(ds, common.out);
    write_run_metadata(common.out,
                       {{"command", "gen-dataset"},
                        {"env", env_name},
                        {"episodes", std::to_string(episodes)},
                        {"expert_frac", format_real(expert_frac)},
                        {"expert_ref", format_real(env->expert_ref)},
                        {"random_ref", format_real(env->random_ref)},
                        {"seed", std::to_string(common.seed)}});
    return kExitOk;
}

underq::agent::AgentConfig resolve_train_config(const std::string& preset_name,
                                                std::uint64_t seed, int epochs,
                                                std::string* env_name) {
    const auto& preset = underq::presets::get_preset(preset_name);
    auto cfg = underq::presets::to_agent_config(preset);
    if (preset.env_name.empty())
        throw std::invalid_argument("preset " + preset_name +
                                    " has no shipped environment");
    *env_name = preset.env_name;
    cfg.seed = seed;
    if (epochs > 0) cfg.n_epochs = epochs;
    return cfg;
}

int cmd_train(const CommonArgs& common, const std::string& preset_name,
              const std::string& data_path, int epochs) {
    std::string env_name;
    auto cfg = resolve_train_config(preset_name, common.seed, epochs, &env_name);
    auto env = underq::env::make_env(env_name, common.seed);
    underq::mdp::OfflineDataset ds =
        data_path.empty()
            ? underq::agent::generate_mixed_dataset(*env, 200, 0.5, common.seed)
            : underq::mdp::load_dataset(data_path);
    const auto result = underq::agent::train(ds, *env, cfg);

    std::ofstream file;
    auto& out = open_output(file, common.out);
    out << "epoch, mean_return, normalized_score, mean_q_estimate, selected_best\n";
    for (const auto& rep : result.reports)
        out << rep.epoch << ", " << format_real(rep.mean_return) << ", "
            << format_real(rep.normalized_score) << ", "
            << format_real(rep.mean_q_estimate) << ", "
            << (rep.selected_best ? 1 : 0) << "\n";
    out << "# best_epoch = " << result.best_epoch
        << ", best_score = " << format_real(result.best_score) << "\n";
    if (!common.out.empty()) {
        underq::nn::Checkpoint ck{result.best_actor.spec, common.seed,
                                  result.best_epoch,
                                  result.best_actor.params};
        underq::nn::save_checkpoint(ck, common.out + ".ckpt");
    }
    write_run_metadata(common.out,
                       {{"command", "train"},
                        {"preset", preset_name},
                        {"env", env_name},
                        {"epochs", std::to_string(cfg.n_epochs)},
                        {"tau_q1", format_real(cfg.tau_q1)},
                        {"tau_q2", format_real(cfg.tau_q2)},
                        {"tau_q1_raw", format_real(1.0 - cfg.tau_q1)},
                        {"tau_q2_raw", format_real(1.0 - cfg.tau_q2)},
                        {"eta", format_real(cfg.eta)},
                        {"zeta", format_real(cfg.zeta)},
                        {"lr", format_real(cfg.lr)},
                        {"data", data_path.empty() ? "generated" : data_path},
                        {"seed", std::to_string(common.seed)}});
    return kExitOk;
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint_path,
             const std::string& env_name, int episodes, double noise_scale) {
    std::ifstream ck_file(checkpoint_path, std::ios::binary);
    if (!ck_file)
        throw std::invalid_argument("checkpoint not found: " + checkpoint_path);
    const auto ck = underq::nn::load_checkpoint(ck_file);
    auto env = underq::env::make_env(env_name, common.seed);

    underq::diffusion::PolicyNet actor;
    actor.spec = ck.spec;
    actor.params = ck.params;
    actor.state_dim = env->state_dim();
    actor.action_dim = env->action_dim();
    actor.n_steps = ck.spec.input_dim - env->state_dim() - env->action_dim();
    const auto schedule = underq::diffusion::make_schedule(actor.n_steps);
    const auto rep = underq::agent::evaluate(actor, schedule, *env, episodes,
                                             common.seed, nullptr, noise_scale);
    std::ofstream file;
    auto& out = open_output(file, common.out);
    out << "mean_return, normalized_score\n";
    out << format_real(rep.mean_return) << ", "
        << format_real(rep.normalized_score) << "\n";
    write_run_metadata(common.out, {{"command", "eval"},
                                    {"checkpoint", checkpoint_path},
                                    {"env", env_name},
                                    {"episodes", std::to_string(episodes)},
                                    {"noise_scale", format_real(noise_scale)},
                                    {"seed", std::to_string(common.seed)}});
    return kExitOk;
}

int cmd_probe_overestimation(const CommonArgs& common,
                             const std::string& preset_name,
                             const std::string& data_path, int epochs,
                             int max_records) {
    std::string env_name;
    auto cfg = resolve_train_config(preset_name, common.seed, epochs, &env_name);
    auto env = underq::env::make_env(env_name, common.seed);
    underq::mdp::OfflineDataset ds =
        data_path.empty()
            ? underq::agent::generate_mixed_dataset(*env, 200, 0.5, common.seed)
            : underq::mdp::load_dataset(data_path);

    std::ofstream file;
    auto& out = open_output(file, common.out);
    out << "variant, mean_q, mc_return, gap, mc_se\n";
    const auto run_variant = [&](const std::string& label,
                                 const underq::agent::AgentConfig& vcfg) {
        auto r = underq::agent::train(ds, *env, vcfg);
        const auto probe = underq::agent::overestimation_probe(
            r.final_state, ds, *env, max_records, common.seed + 99);
        out << label << ", " << format_real(probe.mean_q_estimate) << ", "
            << format_real(probe.mc_return_estimate) << ", "
            << format_real(probe.gap) << ", "
            << format_real(probe.mc_standard_error) << "\n";
    };
    auto mse_cfg = cfg;
    mse_cfg.tau_q1 = 0.5;
    mse_cfg.tau_q2 = 0.5;
    run_variant("mse", mse_cfg);
    run_variant("underestimate", cfg);
    write_run_metadata(common.out, {{"command", "probe-overestimation"},
                                    {"preset", preset_name},
                                    {"env", env_name},
                                    {"epochs", std::to_string(cfg.n_epochs)},
                                    {"seed", std::to_string(common.seed)}});
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"underq: underestimated-operator offline RL laboratory"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);
    app.allow_config_extras(false);

    CommonArgs common;

    auto* sim = app.add_subcommand("simulate-error",
                                   "Monte-Carlo check of the nested "
                                   "overestimation bounds");
    int sim_horizon = 5;
    double sim_gamma = 0.99, sim_beta = 1.0;
    std::int64_t sim_samples = 1000000;
    add_common(sim, common);
    sim->add_option("--horizon", sim_horizon)->check(CLI::Range(1, 64));
    sim->add_option("--gamma", sim_gamma)
        ->check(CLI::Range(1e-9, 1.0));
    sim->add_option("--beta", sim_beta)->check(CLI::PositiveNumber);
    sim->add_option("--samples", sim_samples)->check(CLI::Range(static_cast<std::int64_t>(10000), static_cast<std::int64_t>(1000000000)));

    auto* curve = app.add_subcommand("error-curve",
                                     "Tabulates the overestimation error curve");
    double curve_gamma = 0.99, curve_c = 1.0, curve_xmax = 300.0,
           curve_xstep = 1.0;
    int curve_b = 1;
    add_common(curve, common);
    curve->add_option("--gamma", curve_gamma)->check(CLI::Range(1e-9, 0.999999999));
    curve->add_option("--coefficient", curve_c);
    curve->add_option("--offset", curve_b)->check(CLI::Range(1, 2));
    curve->add_option("--xmax", curve_xmax)->check(CLI::PositiveNumber);
    curve->add_option("--xstep", curve_xstep)->check(CLI::PositiveNumber);

    auto* contract = app.add_subcommand(
        "verify-contraction", "Measures the operator's contraction modulus");
    int c_states = 10, c_actions = 4, c_pairs = 200;
    double c_iota = 0.8, c_gamma = 0.9, c_noise = 0.5, c_tau = 0.7,
           c_range = 10.0;
    std::string c_interp = "scaling";
    add_common(contract, common);
    contract->add_option("--states", c_states)->check(CLI::Range(1, 1000));
    contract->add_option("--actions", c_actions)->check(CLI::Range(1, 100));
    contract->add_option("--iota", c_iota)->check(CLI::Range(1e-9, 1.0));
    contract->add_option("--gamma", c_gamma)->check(CLI::Range(1e-9, 0.999999999));
    contract->add_option("--interp", c_interp);
    contract->add_option("--noise-scale", c_noise)->check(CLI::NonNegativeNumber);
    contract->add_option("--tau", c_tau)->check(CLI::Range(1e-9, 0.999999999));
    contract->add_option("--pairs", c_pairs)->check(CLI::Range(1, 1000000));
    contract->add_option("--q-range", c_range)->check(CLI::PositiveNumber);

    auto* fp = app.add_subcommand("fixed-point",
                                  "Iterates the operator to its fixed point");
    int f_states = 10, f_actions = 4;
    double f_iota = 0.8, f_gamma = 0.9, f_noise = 0.5, f_tau = 0.7,
           f_tol = 1e-10;
    std::string f_interp = "scaling";
    add_common(fp, common);
    fp->add_option("--states", f_states)->check(CLI::Range(1, 1000));
    fp->add_option("--actions", f_actions)->check(CLI::Range(1, 100));
    fp->add_option("--iota", f_iota)->check(CLI::Range(1e-9, 1.0));
    fp->add_option("--gamma", f_gamma)->check(CLI::Range(1e-9, 0.999999999));
    fp->add_option("--interp", f_interp);
    fp->add_option("--noise-scale", f_noise)->check(CLI::NonNegativeNumber);
    fp->add_option("--tau", f_tau)->check(CLI::Range(1e-9, 0.999999999));
    fp->add_option("--tol", f_tol)->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("gen-dataset",
                                   "Generates a mixed-quality offline dataset");
    std::string g_env = "push-1d";
    int g_episodes = 200;
    double g_expert = 0.5;
    add_common(gen, common);
    gen->add_option("--env", g_env);
    gen->add_option("--episodes", g_episodes)->check(CLI::Range(1, 1000000));
    gen->add_option("--expert-frac", g_expert)->check(CLI::Range(0.0, 1.0));

    auto* train = app.add_subcommand("train", "Trains the full agent");
    std::string t_preset = "push-toy", t_data;
    int t_epochs = 0;
    add_common(train, common);
    train->add_option("--preset", t_preset);
    train->add_option("--data", t_data);
    train->add_option("--epochs", t_epochs, "override preset epoch count");

    auto* eval = app.add_subcommand("eval", "Evaluates a saved actor");
    std::string e_ckpt, e_env = "push-1d";
    int e_episodes = 20;
    double e_noise = 0.0;
    add_common(eval, common);
    eval->add_option("--checkpoint", e_ckpt)->required();
    eval->add_option("--env", e_env);
    eval->add_option("--episodes", e_episodes)->check(CLI::Range(1, 100000));
    eval->add_option("--noise-scale", e_noise,
                     "chain-noise multiplier for evaluation rollouts")
        ->check(CLI::Range(0.0, 10.0));

    auto* probe = app.add_subcommand(
        "probe-overestimation",
        "Compares critic values against Monte-Carlo returns");
    std::string p_preset = "push-toy", p_data;
    int p_epochs = 10, p_records = 100;
    add_common(probe, common);
    probe->add_option("--preset", p_preset);
    probe->add_option("--data", p_data);
    probe->add_option("--epochs", p_epochs)->check(CLI::Range(1, 100000));
    probe->add_option("--records", p_records)->check(CLI::Range(1, 1000000));

    try {
        app.parse(argc, argv);
        if (sim->parsed())
            return cmd_simulate_error(common, sim_horizon, sim_gamma, sim_beta,
                                      sim_samples);
        if (curve->parsed())
            return cmd_error_curve(common, curve_gamma, curve_c, curve_b,
                                   curve_xmax, curve_xstep);
        if (contract->parsed())
            return cmd_verify_contraction(common, c_states, c_actions, c_iota,
                                          c_gamma, c_interp, c_noise, c_tau,
                                          c_pairs, c_range);
        if (fp->parsed())
            return cmd_fixed_point(common, f_states, f_actions, f_iota, f_gamma,
                                   f_interp, f_noise, f_tau, f_tol);
        if (gen->parsed())
            return cmd_gen_dataset(common, g_env, g_episodes, g_expert);
        if (train->parsed())
            return cmd_train(common, t_preset, t_data, t_epochs);
        if (eval->parsed())
            return cmd_eval(common, e_ckpt, e_env, e_episodes, e_noise);
        if (probe->parsed())
            return cmd_probe_overestimation(common, p_preset, p_data, p_epochs,
                                            p_records);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalFailure;
    }
    return kExitOk;
}
