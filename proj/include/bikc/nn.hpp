#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "bikc/common.hpp"

namespace bikc::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Flat named collection of parameter arrays. Iteration order is insertion
// order and stays fixed; shapes are fixed once an entry is added.
class ParamStore {
public:
    void add(const std::string& name, MatrixXd value);
    bool has(const std::string& name) const;
    MatrixXd& at(const std::string& name);
    const MatrixXd& at(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    std::size_t total_count() const;
    bool same_shapes(const ParamStore& other) const;
    void check_finite(const std::string& context) const;
    void set_zero();

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }
    std::pair<std::string, MatrixXd>& entry(std::size_t i) { return entries_[i]; }
    const std::pair<std::string, MatrixXd>& entry(std::size_t i) const { return entries_[i]; }

    // zero-filled clone with identical names/shapes
    static ParamStore zeros_like(const ParamStore& other);

private:
    std::vector<std::pair<std::string, MatrixXd>> entries_;
};

enum class Activation { Silu, Tanh };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation act);

struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden_widths;
    int output_dim = 0;
    Activation activation = Activation::Silu;

    void validate() const;
    int layer_count() const { return static_cast<int>(hidden_widths.size()) + 1; }
};

// Parameters live under "<prefix>layer<i>.W" / "<prefix>layer<i>.b";
// W is out x in, b is out x 1. Hidden layers apply the activation, the
// readout is linear. Weights are uniform in [-a, a] with
// a = sqrt(6 / (fan_in + fan_out)), biases zero.
void mlp_init(ParamStore& params, const MlpSpec& spec, Rng& rng,
              const std::string& prefix = "");

// Per-layer pre-activations and activations kept for the backward pass.
struct MlpTape {
    std::vector<MatrixXd> acts;  // acts[0] = input, acts[l] = output of layer l-1
    std::vector<MatrixXd> pre;   // pre-activation of each hidden layer
};

// Batched forward: input is B x input_dim, result is B x output_dim.
MatrixXd mlp_forward_batch(const ParamStore& params, const MlpSpec& spec,
                           const MatrixXd& input, MlpTape* tape = nullptr,
                           const std::string& prefix = "");

// Convenience single-sample forward.
VectorXd mlp_forward(const ParamStore& params, const MlpSpec& spec,
                     const VectorXd& input, const std::string& prefix = "");

// Backward pass for dL/d(output) of shape B x output_dim. Accumulates layer
// gradients into `grads` (created by zeros_like) and returns dL/d(input).
MatrixXd mlp_backward(const ParamStore& params, const MlpSpec& spec,
                      const MlpTape& tape, const MatrixXd& grad_output,
                      ParamStore& grads, const std::string& prefix = "");

struct OptimState {
    ParamStore m;  // first moments
    ParamStore v;  // second moments
    long step = 0;
    double lr0 = 1e-4;
    double weight_decay = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_opt = 1e-8;

    static OptimState like(const ParamStore& params);
};

// Decoupled-weight-decay Adam update. Increments state.step.
void adamw_step(ParamStore& params, const ParamStore& grads, OptimState& state,
                double lr);

// lr0 * 0.5 * (1 + cos(pi * step / total_steps))
double cosine_lr(long step, long total_steps, double lr0);

}  // namespace bikc::nn
