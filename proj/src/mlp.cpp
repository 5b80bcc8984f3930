#include "underq/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "underq/dataset_io.hpp"
#include "underq/rng.hpp"

namespace underq::nn {

namespace {

// tanh(softplus(x)) rewritten through p = e^x:
//   tanh(log(1 + p)) = p (p + 2) / (p (p + 2) + 2),
// which needs a single exp (vectorized for doubles, unlike tanh) and stays
// accurate for small p because the cancellation-prone (1+p)^2 - 1 is expanded
// analytically. x is clamped at 300 so p^2 cannot overflow; the expression is
// exactly 1.0 well before that.
double mish_inner(double x) {
    const double p = std::exp(std::min(x, 300.0));
    return p * (p + 2.0) / (p * (p + 2.0) + 2.0);
}

Eigen::MatrixXd act_matrix(Activation a, const Eigen::MatrixXd& z) {
    if (a == Activation::ReLU) return z.cwiseMax(0.0);
    const Eigen::ArrayXXd x = z.array();
    const Eigen::ArrayXXd p = x.min(300.0).exp();
    const Eigen::ArrayXXd pp2 = p * (p + 2.0);
    return (x * pp2 / (pp2 + 2.0)).matrix();
}

Eigen::MatrixXd act_grad_matrix(Activation a, const Eigen::MatrixXd& z) {
    if (a == Activation::ReLU)
        return (z.array() > 0.0).cast<double>().matrix();
    const Eigen::ArrayXXd x = z.array();
    const Eigen::ArrayXXd p = x.min(300.0).exp();
    const Eigen::ArrayXXd t = p * (p + 2.0) / (p * (p + 2.0) + 2.0);
    const Eigen::ArrayXXd sig = p / (1.0 + p);
    return (t + x * (1.0 - t.square()) * sig).matrix();
}

}  // namespace

double mish(double x) { return x * mish_inner(x); }

std::vector<int> MlpSpec::layer_dims() const {
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output_dim);
    return dims;
}

int MlpSpec::param_count() const {
    const auto dims = layer_dims();
    int n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        n += dims[l] * dims[l + 1] + dims[l + 1];
    return n;
}

void MlpSpec::validate() const {
    if (input_dim < 1 || output_dim < 1)
        throw std::invalid_argument("layer dims must be >= 1");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("layer dims must be >= 1");
}

ParamSet init_params(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ParamSet p;
    p.flat.resize(spec.param_count());
    const auto dims = spec.layer_dims();
    int off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        const int n = dims[l] * dims[l + 1];
        for (int i = 0; i < n; ++i) p.flat[off + i] = rng.uniform(-bound, bound);
        off += n;
        for (int i = 0; i < dims[l + 1]; ++i)
            p.flat[off + i] = rng.uniform(-bound, bound);
        off += dims[l + 1];
    }
    return p;
}

Eigen::MatrixXd forward(const ParamSet& params, const MlpSpec& spec,
                        const Eigen::MatrixXd& x) {
    if (x.cols() != spec.input_dim)
        throw std::invalid_argument("input dimensionality mismatch");
    if (params.flat.size() != spec.param_count())
        throw std::invalid_argument("parameter count mismatch");
    const auto dims = spec.layer_dims();
    Eigen::MatrixXd h = x;
    int off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const Eigen::Map<const Eigen::MatrixXd> w(params.flat.data() + off,
                                                  dims[l], dims[l + 1]);
        off += dims[l] * dims[l + 1];
        const Eigen::Map<const Eigen::VectorXd> b(params.flat.data() + off,
                                                  dims[l + 1]);
        off += dims[l + 1];
        Eigen::MatrixXd z = (h * w).rowwise() + b.transpose();
        if (l + 2 < dims.size())
            h = act_matrix(spec.activation, z);
        else
            h = std::move(z);
    }
    return h;
}

BackwardResult backward(const ParamSet& params, const MlpSpec& spec,
                        const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& upstream) {
    if (x.cols() != spec.input_dim || upstream.cols() != spec.output_dim ||
        x.rows() != upstream.rows())
        throw std::invalid_argument("shape mismatch in backward");
    if (params.flat.size() != spec.param_count())
        throw std::invalid_argument("parameter count mismatch");
    const auto dims = spec.layer_dims();
    const std::size_t n_layers = dims.size() - 1;

    // Forward pass caching per-layer inputs and pre-activations.
    std::vector<Eigen::MatrixXd> inputs(n_layers);
    std::vector<Eigen::MatrixXd> preact(n_layers);
    std::vector<int> w_off(n_layers), b_off(n_layers);
    Eigen::MatrixXd h = x;
    int off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        inputs[l] = h;
        w_off[l] = off;
        const Eigen::Map<const Eigen::MatrixXd> w(params.flat.data() + off,
                                                  dims[l], dims[l + 1]);
        off += dims[l] * dims[l + 1];
        b_off[l] = off;
        const Eigen::Map<const Eigen::VectorXd> b(params.flat.data() + off,
                                                  dims[l + 1]);
        off += dims[l + 1];
        preact[l] = (h * w).rowwise() + b.transpose();
        if (l + 1 < n_layers) h = act_matrix(spec.activation, preact[l]);
    }

    BackwardResult res;
    res.param_grad = Eigen::VectorXd::Zero(params.flat.size());
    Eigen::MatrixXd delta = upstream;  // gradient w.r.t. layer pre-activation
    for (std::size_t li = n_layers; li-- > 0;) {
        if (li + 1 < n_layers) {
            // delta currently holds the gradient w.r.t. this layer's output.
            delta.array() *= act_grad_matrix(spec.activation, preact[li]).array();
        }
        const Eigen::Map<const Eigen::MatrixXd> w(params.flat.data() + w_off[li],
                                                  dims[li], dims[li + 1]);
        Eigen::Map<Eigen::MatrixXd> gw(res.param_grad.data() + w_off[li],
                                       dims[li], dims[li + 1]);
        Eigen::Map<Eigen::VectorXd> gb(res.param_grad.data() + b_off[li],
                                       dims[li + 1]);
        gw = inputs[li].transpose() * delta;
        gb = delta.colwise().sum();
        delta = (delta * w.transpose()).eval();
    }
    res.input_grad = std::move(delta);
    return res;
}

GradClip GradClip::by_norm(double max_norm) {
    if (!(max_norm > 0.0))
        throw std::invalid_argument("max_norm must be positive");
    return {true, max_norm};
}

void clip_gradient(Eigen::VectorXd& grad, const GradClip& clip) {
    if (!clip.enabled) return;
    const double norm = grad.norm();
    if (norm > clip.max_norm) grad *= clip.max_norm / norm;
}

OptimState make_optim(int param_count, double learning_rate) {
    OptimState st;
    st.first_moment = Eigen::VectorXd::Zero(param_count);
    st.second_moment = Eigen::VectorXd::Zero(param_count);
    st.learning_rate = learning_rate;
    return st;
}

void opt_step(ParamSet& params, Eigen::VectorXd grad, OptimState& state,
              const GradClip& clip) {
    if (grad.size() != params.flat.size() ||
        state.first_moment.size() != grad.size())
        throw std::invalid_argument("optimizer shape mismatch");
    clip_gradient(grad, clip);
    state.step += 1;
    state.first_moment =
        state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
    state.second_moment = state.beta2 * state.second_moment.array() +
                          (1.0 - state.beta2) * grad.array().square();
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    params.flat.array() -=
        state.learning_rate * (state.first_moment.array() / c1) /
        ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

void polyak_update(ParamSet& target, const ParamSet& online, double rho) {
    if (target.flat.size() != online.flat.size())
        throw std::invalid_argument("polyak shape mismatch");
    if (!(rho >= 0.0) || rho > 1.0)
        throw std::invalid_argument("rho must lie in [0, 1]");
    target.flat = rho * target.flat + (1.0 - rho) * online.flat;
}

void save_checkpoint(const Checkpoint& ck, std::ostream& out) {
    out << "underq-checkpoint v1, " << ck.spec.input_dim << ", "
        << ck.spec.output_dim << ", "
        << (ck.spec.activation == Activation::Mish ? "mish" : "relu") << ", "
        << ck.spec.hidden.size();
    for (int h : ck.spec.hidden) out << ", " << h;
    out << ", " << ck.seed << ", " << ck.step << ", " << ck.params.flat.size()
        << "\n";
    for (Eigen::Index i = 0; i < ck.params.flat.size(); ++i)
        out << mdp::format_real(ck.params.flat[i]) << "\n";
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    save_checkpoint(ck, f);
}

Checkpoint load_checkpoint(std::istream& in) {
    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("missing checkpoint header");
    std::stringstream ss(header);
    std::string tag;
    std::getline(ss, tag, ',');
    if (tag != "underq-checkpoint v1")
        throw std::runtime_error("unrecognized checkpoint header");
    const auto next_field = [&] {
        std::string tok;
        if (!std::getline(ss, tok, ','))
            throw std::runtime_error("truncated checkpoint header");
        return tok;
    };
    Checkpoint ck;
    ck.spec.input_dim = std::stoi(next_field());
    ck.spec.output_dim = std::stoi(next_field());
    std::string a = next_field();
    a.erase(0, a.find_first_not_of(' '));
    ck.spec.activation = a == "mish" ? Activation::Mish : Activation::ReLU;
    const int n_hidden = std::stoi(next_field());
    ck.spec.hidden.clear();
    for (int i = 0; i < n_hidden; ++i) ck.spec.hidden.push_back(std::stoi(next_field()));
    ck.seed = std::stoull(next_field());
    ck.step = std::stoll(next_field());
    const int n_params = std::stoi(next_field());
    if (n_params != ck.spec.param_count())
        throw std::runtime_error("checkpoint parameter count mismatch");
    ck.params.flat.resize(n_params);
    std::string line;
    for (int i = 0; i < n_params; ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("truncated checkpoint body");
        ck.params.flat[i] = std::stod(line);
    }
    return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return load_checkpoint(f);
}

}  // namespace underq::nn
