#pragma once

#include "bikc/nn.hpp"
#include "bikc/schedule.hpp"

namespace bikc::policy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Flat-MLP backbone over the concatenation of [flattened chunk, sinusoidal
// noise features, flattened observation history, learned keypose embedding].
// The keypose embedding is an affine map stored under "kemb.W" / "kemb.b";
// the trunk layers follow the nn-core naming.
struct NetConfig {
    int obs_dim = 0;
    int action_dim = 0;
    int keypose_dim = 0;
    int obs_horizon = 2;
    int action_horizon = 8;
    int noise_emb_dim = 128;
    int keypose_emb_dim = 128;
    bool use_keypose = true;
    std::vector<int> hidden{256, 256, 256};

    int chunk_elems() const { return action_horizon * action_dim; }
    int obs_elems() const { return obs_horizon * obs_dim; }
    int trunk_input_dim() const {
        return chunk_elems() + noise_emb_dim + obs_elems() +
               (use_keypose ? keypose_emb_dim : 0);
    }
    void validate() const;
};

struct Net {
    NetConfig cfg;
    nn::MlpSpec trunk;

    static Net make(const NetConfig& cfg);
    nn::ParamStore init_params(uint64_t seed) const;
};

struct NetTape {
    MatrixXd keyposes;  // B x keypose_dim (empty when keypose off)
    nn::MlpTape trunk_tape;
};

// chunks: B x (H_a*A) normalized-space rows; emb_args: per-row scalar fed to
// the sinusoidal embedder; obs: B x (H_o*O); keyposes: B x keypose_dim.
// Returns B x (H_a*A). Increments *nfe when given (one unit per call).
MatrixXd net_forward(const Net& net, const nn::ParamStore& params,
                     const MatrixXd& chunks, const VectorXd& emb_args,
                     const MatrixXd& obs, const MatrixXd& keyposes,
                     NetTape* tape = nullptr, long* nfe = nullptr);

// Backward for dL/d(output); returns parameter gradients shaped like params.
nn::ParamStore net_backward(const Net& net, const nn::ParamStore& params,
                            const NetTape& tape, const MatrixXd& grad_output);

}  // namespace bikc::policy
