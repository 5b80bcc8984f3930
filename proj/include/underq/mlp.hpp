#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace underq::nn {

enum class Activation { Mish, ReLU };

double mish(double x);

// Fixed-topology dense net: affine layers with the activation after every
// hidden layer and a linear output.
struct MlpSpec {
    int input_dim = 1;
    int output_dim = 1;
    std::vector<int> hidden{64, 64, 64};
    Activation activation = Activation::Mish;

    std::vector<int> layer_dims() const;  // input, hidden..., output
    int param_count() const;
    void validate() const;
};

struct ParamSet {
    Eigen::VectorXd flat;
};

// Uniform fan-in initialization, deterministic per seed.
ParamSet init_params(const MlpSpec& spec, std::uint64_t seed);

// X is batch x input_dim; returns batch x output_dim.
Eigen::MatrixXd forward(const ParamSet& params, const MlpSpec& spec,
                        const Eigen::MatrixXd& x);

struct BackwardResult {
    Eigen::VectorXd param_grad;
    Eigen::MatrixXd input_grad;  // batch x input_dim
};

// Reverse-mode gradients of sum(upstream .* output) w.r.t. parameters and
// inputs.
BackwardResult backward(const ParamSet& params, const MlpSpec& spec,
                        const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& upstream);

struct GradClip {
    bool enabled = false;
    double max_norm = 0.0;

    static GradClip none() { return {}; }
    static GradClip by_norm(double max_norm);
};

// Scales the gradient so its global L2 norm is at most max_norm.
void clip_gradient(Eigen::VectorXd& grad, const GradClip& clip);

// Adaptive-moment gradient descent state.
struct OptimState {
    std::int64_t step = 0;
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

OptimState make_optim(int param_count, double learning_rate);

void opt_step(ParamSet& params, Eigen::VectorXd grad, OptimState& state,
              const GradClip& clip = GradClip::none());

// target <- rho * target + (1 - rho) * online, elementwise.
void polyak_update(ParamSet& target, const ParamSet& online, double rho);

// Checkpoint: header (spec, seed, step) plus the flat parameter vector in
// 17-significant-digit decimals; reload is bit-exact.
struct Checkpoint {
    MlpSpec spec;
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    ParamSet params;
};

void save_checkpoint(const Checkpoint& ck, std::ostream& out);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace underq::nn
