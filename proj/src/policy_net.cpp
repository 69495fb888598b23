#include "bikc/policy_net.hpp"

namespace bikc::policy {

void NetConfig::validate() const {
    if (obs_dim < 1 || action_dim < 1) throw ConfigError("net: obs_dim and action_dim must be >= 1");
    if (obs_horizon < 1 || action_horizon < 1) throw ConfigError("net: horizons must be >= 1");
    if (use_keypose && keypose_dim < 1) throw ConfigError("net: keypose_dim must be >= 1 when conditioning on keyposes");
}

Net Net::make(const NetConfig& cfg) {
    cfg.validate();
    Net net;
    net.cfg = cfg;
    net.trunk.input_dim = cfg.trunk_input_dim();
    net.trunk.hidden_widths = cfg.hidden;
    net.trunk.output_dim = cfg.chunk_elems();
    net.trunk.activation = nn::Activation::Silu;
    return net;
}

nn::ParamStore Net::init_params(uint64_t seed) const {
    Rng rng(seed);
    nn::ParamStore params;
    if (cfg.use_keypose) {
        double a = std::sqrt(6.0 / (cfg.keypose_dim + cfg.keypose_emb_dim));
        MatrixXd w(cfg.keypose_emb_dim, cfg.keypose_dim);
        for (int r = 0; r < cfg.keypose_emb_dim; ++r)
            for (int c = 0; c < cfg.keypose_dim; ++c)
                w(r, c) = rng.uniform(-a, a);
        params.add("kemb.W", std::move(w));
        params.add("kemb.b", MatrixXd::Zero(cfg.keypose_emb_dim, 1));
    }
    nn::mlp_init(params, trunk, rng);
    return params;
}

MatrixXd net_forward(const Net& net, const nn::ParamStore& params,
                     const MatrixXd& chunks, const VectorXd& emb_args,
                     const MatrixXd& obs, const MatrixXd& keyposes,
                     NetTape* tape, long* nfe) {
    const NetConfig& cfg = net.cfg;
    Eigen::Index b = chunks.rows();
    if (chunks.cols() != cfg.chunk_elems() || obs.cols() != cfg.obs_elems() ||
        obs.rows() != b || emb_args.size() != b)
        throw ConfigError("net_forward: conditioning shape mismatch");
    if (cfg.use_keypose && (keyposes.rows() != b || keyposes.cols() != cfg.keypose_dim))
        throw ConfigError("net_forward: keypose shape mismatch");

    MatrixXd input(b, cfg.trunk_input_dim());
    input.leftCols(cfg.chunk_elems()) = chunks;
    for (Eigen::Index r = 0; r < b; ++r)
        input.block(r, cfg.chunk_elems(), 1, cfg.noise_emb_dim) =
            cm::sinusoidal_features(emb_args[r], cfg.noise_emb_dim).transpose();
    input.block(0, cfg.chunk_elems() + cfg.noise_emb_dim, b, cfg.obs_elems()) = obs;
    if (cfg.use_keypose) {
        MatrixXd emb = keyposes * params.at("kemb.W").transpose();
        emb.rowwise() += params.at("kemb.b").col(0).transpose();
        input.rightCols(cfg.keypose_emb_dim) = emb;
    }

    if (tape) tape->keyposes = cfg.use_keypose ? keyposes : MatrixXd();
    if (nfe) *nfe += 1;
    return nn::mlp_forward_batch(params, net.trunk, input, tape ? &tape->trunk_tape : nullptr);
}

nn::ParamStore net_backward(const Net& net, const nn::ParamStore& params,
                            const NetTape& tape, const MatrixXd& grad_output) {
    nn::ParamStore grads = nn::ParamStore::zeros_like(params);
    MatrixXd d_input = nn::mlp_backward(params, net.trunk, tape.trunk_tape, grad_output, grads);
    if (net.cfg.use_keypose) {
        MatrixXd d_emb = d_input.rightCols(net.cfg.keypose_emb_dim);
        grads.at("kemb.W") += d_emb.transpose() * tape.keyposes;
        grads.at("kemb.b") += d_emb.colwise().sum().transpose();
    }
    return grads;
}

}  // namespace bikc::policy
