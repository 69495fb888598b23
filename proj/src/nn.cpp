#include "bikc/nn.hpp"

#include <cmath>

namespace bikc::nn {

void ParamStore::add(const std::string& name, MatrixXd value) {
    if (has(name)) throw ConfigError("duplicate parameter entry: " + name);
    entries_.emplace_back(name, std::move(value));
}

bool ParamStore::has(const std::string& name) const {
    for (const auto& [n, v] : entries_)
        if (n == name) return true;
    return false;
}

MatrixXd& ParamStore::at(const std::string& name) {
    for (auto& [n, v] : entries_)
        if (n == name) return v;
    throw ConfigError("missing parameter entry: " + name);
}

const MatrixXd& ParamStore::at(const std::string& name) const {
    for (const auto& [n, v] : entries_)
        if (n == name) return v;
    throw ConfigError("missing parameter entry: " + name);
}

std::size_t ParamStore::total_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : entries_) n += static_cast<std::size_t>(v.size());
    return n;
}

bool ParamStore::same_shapes(const ParamStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].first != other.entries_[i].first) return false;
        if (entries_[i].second.rows() != other.entries_[i].second.rows()) return false;
        if (entries_[i].second.cols() != other.entries_[i].second.cols()) return false;
    }
    return true;
}

void ParamStore::check_finite(const std::string& context) const {
    for (const auto& [name, v] : entries_)
        if (!v.allFinite())
            throw NumericalError("non-finite values in " + context + ": " + name);
}

void ParamStore::set_zero() {
    for (auto& [name, v] : entries_) v.setZero();
}

ParamStore ParamStore::zeros_like(const ParamStore& other) {
    ParamStore out;
    for (const auto& [name, v] : other)
        out.add(name, MatrixXd::Zero(v.rows(), v.cols()));
    return out;
}

Activation activation_from_name(const std::string& name) {
    if (name == "silu") return Activation::Silu;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation: " + name);
}

std::string activation_name(Activation act) {
    return act == Activation::Silu ? "silu" : "tanh";
}

void MlpSpec::validate() const {
    if (input_dim < 1 || output_dim < 1)
        throw ConfigError("mlp dims must be >= 1");
    for (int w : hidden_widths)
        if (w < 1) throw ConfigError("mlp hidden width must be >= 1");
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd apply_activation(const MatrixXd& z, Activation act) {
    if (act == Activation::Tanh) return z.array().tanh();
    return z.array() * (1.0 / (1.0 + (-z.array()).exp()));  // silu
}

MatrixXd activation_grad(const MatrixXd& z, Activation act) {
    if (act == Activation::Tanh) {
        MatrixXd t = z.array().tanh();
        return 1.0 - t.array().square();
    }
    // d/dx silu(x) = s(x) * (1 + x * (1 - s(x)))
    Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
    return s * (1.0 + z.array() * (1.0 - s));
}

std::string layer_name(const std::string& prefix, int l, const char* kind) {
    return prefix + "layer" + std::to_string(l) + "." + kind;
}

std::vector<std::pair<int, int>> layer_dims(const MlpSpec& spec) {
    std::vector<std::pair<int, int>> dims;  // (in, out) per layer
    int in = spec.input_dim;
    for (int w : spec.hidden_widths) {
        dims.emplace_back(in, w);
        in = w;
    }
    dims.emplace_back(in, spec.output_dim);
    return dims;
}

}  // namespace

void mlp_init(ParamStore& params, const MlpSpec& spec, Rng& rng,
              const std::string& prefix) {
    spec.validate();
    auto dims = layer_dims(spec);
    for (int l = 0; l < static_cast<int>(dims.size()); ++l) {
        auto [fan_in, fan_out] = dims[l];
        double a = std::sqrt(6.0 / (fan_in + fan_out));
        MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c)
                w(r, c) = rng.uniform(-a, a);
        params.add(layer_name(prefix, l, "W"), std::move(w));
        params.add(layer_name(prefix, l, "b"), MatrixXd::Zero(fan_out, 1));
    }
}

MatrixXd mlp_forward_batch(const ParamStore& params, const MlpSpec& spec,
                           const MatrixXd& input, MlpTape* tape,
                           const std::string& prefix) {
    if (input.cols() != spec.input_dim)
        throw ConfigError("mlp input width " + std::to_string(input.cols()) +
                          " != spec input_dim " + std::to_string(spec.input_dim));
    int n_layers = spec.layer_count();
    if (tape) {
        tape->acts.clear();
        tape->pre.clear();
        tape->acts.push_back(input);
    }
    MatrixXd h = input;
    for (int l = 0; l < n_layers; ++l) {
        const MatrixXd& w = params.at(layer_name(prefix, l, "W"));
        const MatrixXd& b = params.at(layer_name(prefix, l, "b"));
        if (w.cols() != h.cols())
            throw ConfigError("mlp shape mismatch at " + layer_name(prefix, l, "W"));
        MatrixXd z = h * w.transpose();
        z.rowwise() += b.col(0).transpose();
        if (l + 1 < n_layers) {
            if (tape) tape->pre.push_back(z);
            h = apply_activation(z, spec.activation);
            if (tape) tape->acts.push_back(h);
        } else {
            h = std::move(z);  // linear readout
        }
    }
    if (!h.allFinite())
        throw NumericalError("non-finite mlp output (" + prefix + "readout)");
    return h;
}

VectorXd mlp_forward(const ParamStore& params, const MlpSpec& spec,
                     const VectorXd& input, const std::string& prefix) {
    MatrixXd row = input.transpose();
    return mlp_forward_batch(params, spec, row, nullptr, prefix).row(0).transpose();
}

MatrixXd mlp_backward(const ParamStore& params, const MlpSpec& spec,
                      const MlpTape& tape, const MatrixXd& grad_output,
                      ParamStore& grads, const std::string& prefix) {
    int n_layers = spec.layer_count();
    MatrixXd d = grad_output;  // dL/dz of current layer (readout is linear)
    for (int l = n_layers - 1; l >= 0; --l) {
        const MatrixXd& w = params.at(layer_name(prefix, l, "W"));
        const MatrixXd& a_in = tape.acts[l];
        grads.at(layer_name(prefix, l, "W")) += d.transpose() * a_in;
        grads.at(layer_name(prefix, l, "b")) += d.colwise().sum().transpose();
        d = d * w;  // dL/d(a_in)
        if (l > 0) d = d.array() * activation_grad(tape.pre[l - 1], spec.activation).array();
    }
    return d;
}

OptimState OptimState::like(const ParamStore& params) {
    OptimState st;
    st.m = ParamStore::zeros_like(params);
    st.v = ParamStore::zeros_like(params);
    return st;
}

void adamw_step(ParamStore& params, const ParamStore& grads, OptimState& state,
                double lr) {
    if (lr < 0) throw ContractError("adamw: lr must be >= 0");
    if (!params.same_shapes(grads) || !params.same_shapes(state.m))
        throw ConfigError("adamw: shape mismatch between params, grads and moments");
    grads.check_finite("gradients");
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params.entry(i).second;
        const auto& g = grads.entry(i).second;
        auto& m = state.m.entry(i).second;
        auto& v = state.v.entry(i).second;
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.array().square().matrix();
        p *= (1.0 - lr * state.weight_decay);
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps_opt);
    }
}

double cosine_lr(long step, long total_steps, double lr0) {
    if (total_steps < 1) throw ContractError("cosine_lr: total_steps must be >= 1");
    if (step < 0 || step > total_steps)
        throw ContractError("cosine_lr: step out of [0, total_steps]");
    if (step == total_steps) return 0.0;
    return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                       static_cast<double>(total_steps)));
}

}  // namespace bikc::nn
