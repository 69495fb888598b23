#include "bikc/ddpm.hpp"

#include <cmath>

#include "bikc/checkpoint.hpp"
#include "bikc/json_util.hpp"

namespace bikc::ddpm {

void DdpmConfig::validate() const {
    if (train_steps < 1) throw ConfigError("ddpm: train_steps must be >= 1");
    if (eval_steps < 1 || eval_steps > train_steps)
        throw ConfigError("ddpm: need 1 <= eval_steps <= train_steps");
    if (beta_schedule != "squaredcos")
        throw ConfigError("ddpm: unknown beta schedule " + beta_schedule);
    if (chunk_len < action_horizon) throw ConfigError("ddpm: chunk_len must be >= action_horizon");
}

std::vector<double> alpha_bars(const DdpmConfig& cfg) {
    cfg.validate();
    int T = cfg.train_steps;
    const double s = 0.008;
    auto f = [&](double t) {
        double v = std::cos((t / T + s) / (1.0 + s) * M_PI / 2.0);
        return v * v;
    };
    std::vector<double> abar(static_cast<std::size_t>(T));
    double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
        double target = f(static_cast<double>(t)) / f0;
        double beta = 1.0 - target / prev;
        if (beta > 0.999) beta = 0.999;
        if (beta < 0.0) beta = 0.0;
        double cur = prev * (1.0 - beta);
        abar[static_cast<std::size_t>(t - 1)] = cur;
        prev = cur;
    }
    return abar;
}

DdpmPolicy ddpm_init(const DdpmConfig& cfg, int obs_dim, int action_dim,
                     int keypose_dim, bool use_keypose, uint64_t seed) {
    cfg.validate();
    policy::NetConfig nc;
    nc.obs_dim = obs_dim;
    nc.action_dim = action_dim;
    nc.keypose_dim = keypose_dim;
    nc.obs_horizon = cfg.obs_horizon;
    nc.action_horizon = cfg.action_horizon;
    nc.noise_emb_dim = cfg.noise_emb_dim;
    nc.keypose_emb_dim = cfg.keypose_emb_dim;
    nc.use_keypose = use_keypose;
    nc.hidden = cfg.hidden;

    DdpmPolicy p;
    p.net = policy::Net::make(nc);
    p.params = p.net.init_params(seed);
    p.ema_params = p.params;
    p.cfg = cfg;
    p.abar = alpha_bars(cfg);
    p.seed = seed;
    return p;
}

namespace {

Eigen::RowVectorXd flatten(const MatrixXd& m) {
    Eigen::RowVectorXd out(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[k++] = m(r, c);
    return out;
}

double step_emb_arg(int t, int train_steps) {
    return static_cast<double>(t) / static_cast<double>(train_steps);
}

}  // namespace

DdpmLossResult ddpm_loss(const DdpmPolicy& policy, const std::vector<ChunkSample>& batch,
                         Rng& rng) {
    if (batch.empty()) throw ContractError("ddpm_loss: empty batch");
    const auto& nc = policy.net.cfg;
    Eigen::Index b = static_cast<Eigen::Index>(batch.size());
    int elems = nc.chunk_elems();

    MatrixXd x_t(b, elems), noise(b, elems), obs(b, nc.obs_elems());
    MatrixXd keyposes(b, nc.use_keypose ? nc.keypose_dim : 0);
    VectorXd emb_args(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const ChunkSample& s = batch[static_cast<std::size_t>(i)];
        if (s.chunk.rows() < nc.action_horizon || s.chunk.cols() != nc.action_dim)
            throw ContractError("ddpm_loss: chunk shorter than action horizon");
        int t = static_cast<int>(rng.uniform_int(1, policy.cfg.train_steps));
        double ab = policy.abar[static_cast<std::size_t>(t - 1)];
        Eigen::RowVectorXd a = flatten(s.chunk.topRows(nc.action_horizon));
        Eigen::RowVectorXd z(elems);
        for (int e = 0; e < elems; ++e) z[e] = rng.normal();
        x_t.row(i) = std::sqrt(ab) * a + std::sqrt(1.0 - ab) * z;
        noise.row(i) = z;
        obs.row(i) = flatten(s.obs_history);
        if (nc.use_keypose) keyposes.row(i) = s.target_keypose.transpose();
        emb_args[i] = step_emb_arg(t, policy.cfg.train_steps);
    }

    policy::NetTape tape;
    MatrixXd pred = net_forward(policy.net, policy.params, x_t, emb_args, obs, keyposes, &tape, nullptr);
    MatrixXd resid = pred - noise;
    double denom = static_cast<double>(b) * static_cast<double>(elems);
    DdpmLossResult res;
    res.loss = resid.array().square().sum() / denom;
    MatrixXd d_out = (2.0 / denom) * resid;
    res.grads = net_backward(policy.net, policy.params, tape, d_out);
    return res;
}

Eigen::RowVectorXd ddim_sample_impl(const DenoiseFn& denoise, const DdpmConfig& cfg,
                                    const std::vector<double>& abar,
                                    const Eigen::RowVectorXd& x_init, long* nfe) {
    cfg.validate();
    // evenly strided timesteps, descending: t_i = round((i+1) * T / S)
    std::vector<int> taus;
    for (int i = 0; i < cfg.eval_steps; ++i) {
        int t = static_cast<int>(std::lround(static_cast<double>(i + 1) * cfg.train_steps /
                                             cfg.eval_steps));
        if (t < 1) t = 1;
        if (taus.empty() || t != taus.back()) taus.push_back(t);
    }

    Eigen::RowVectorXd x = x_init;
    for (int i = static_cast<int>(taus.size()) - 1; i >= 0; --i) {
        int t = taus[static_cast<std::size_t>(i)];
        double ab_t = abar[static_cast<std::size_t>(t - 1)];
        double ab_prev = i > 0 ? abar[static_cast<std::size_t>(taus[static_cast<std::size_t>(i - 1)] - 1)] : 1.0;
        Eigen::RowVectorXd eps = denoise(x, t);
        if (nfe) *nfe += 1;
        Eigen::RowVectorXd x0 = (x - std::sqrt(1.0 - ab_t) * eps) / std::sqrt(ab_t);
        // clip the clean estimate to the normalized data range; early steps
        // divide by a tiny sqrt(alpha_bar) and would amplify model error
        x0 = x0.cwiseMax(-1.0).cwiseMin(1.0);
        x = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps;
    }
    return x;
}

MatrixXd ddim_sample(const DdpmPolicy& policy, const std::deque<VectorXd>& obs_history,
                     const VectorXd* keypose, Rng& rng, long* nfe) {
    const auto& nc = policy.net.cfg;
    if (!policy.stats.fitted) throw ConfigError("ddim_sample: missing normalization stats");
    if (obs_history.empty()) throw ContractError("ddim_sample: empty observation history");
    if (nc.use_keypose && keypose == nullptr)
        throw ConfigError("ddim_sample: policy expects a keypose condition");

    MatrixXd obs(nc.obs_horizon, nc.obs_dim);
    for (int h = 0; h < nc.obs_horizon; ++h) {
        int idx = static_cast<int>(obs_history.size()) - nc.obs_horizon + h;
        if (idx < 0) idx = 0;
        obs.row(h) = data::normalize(policy.stats, obs_history[static_cast<std::size_t>(idx)], "obs").transpose();
    }
    MatrixXd obs_row = flatten(obs);
    MatrixXd kp_row(1, nc.use_keypose ? nc.keypose_dim : 0);
    if (nc.use_keypose)
        kp_row.row(0) = data::normalize(policy.stats, *keypose, "keypose").transpose();

    int elems = nc.chunk_elems();
    Eigen::RowVectorXd x(elems);
    for (int e = 0; e < elems; ++e) x[e] = rng.normal();

    DenoiseFn denoise = [&](const Eigen::RowVectorXd& xt, int t) {
        VectorXd emb = VectorXd::Constant(1, step_emb_arg(t, policy.cfg.train_steps));
        MatrixXd pred = net_forward(policy.net, policy.ema_params, MatrixXd(xt), emb,
                                    obs_row, kp_row, nullptr, nullptr);
        return Eigen::RowVectorXd(pred.row(0));
    };
    Eigen::RowVectorXd out = ddim_sample_impl(denoise, policy.cfg, policy.abar, x, nfe);

    MatrixXd chunk(nc.action_horizon, nc.action_dim);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < chunk.rows(); ++r) {
        VectorXd row(nc.action_dim);
        for (Eigen::Index c = 0; c < chunk.cols(); ++c) row[c] = out[k++];
        chunk.row(r) = data::unnormalize(policy.stats, row, "action").transpose();
    }
    return chunk;
}

DdpmTrainResult train_ddpm(const std::vector<ChunkSample>& dataset, const NormStats& stats,
                           const DdpmConfig& cfg, int obs_dim, int action_dim,
                           int keypose_dim, bool use_keypose, uint64_t seed) {
    if (dataset.empty()) throw ContractError("train_ddpm: empty dataset");
    if (!stats.fitted) throw ConfigError("train_ddpm: stats not fitted");

    DdpmTrainResult res;
    res.policy = ddpm_init(cfg, obs_dim, action_dim, keypose_dim, use_keypose, seed);
    res.policy.stats = stats;

    std::vector<ChunkSample> normed;
    normed.reserve(dataset.size());
    for (const auto& s : dataset) {
        ChunkSample n;
        n.obs_history.resize(s.obs_history.rows(), s.obs_history.cols());
        for (Eigen::Index r = 0; r < s.obs_history.rows(); ++r)
            n.obs_history.row(r) = data::normalize(stats, s.obs_history.row(r).transpose(), "obs").transpose();
        n.target_keypose = data::normalize(stats, s.target_keypose, "keypose");
        n.chunk.resize(s.chunk.rows(), s.chunk.cols());
        for (Eigen::Index r = 0; r < s.chunk.rows(); ++r)
            n.chunk.row(r) = data::normalize(stats, s.chunk.row(r).transpose(), "action").transpose();
        normed.push_back(std::move(n));
    }

    nn::OptimState opt = nn::OptimState::like(res.policy.params);
    opt.lr0 = cfg.lr0;
    opt.weight_decay = cfg.weight_decay;
    Rng rng(Rng::derive(seed, 2));

    std::vector<ChunkSample> batch;
    for (long k = 0; k < cfg.total_iters; ++k) {
        batch.clear();
        for (int i = 0; i < cfg.batch_size; ++i)
            batch.push_back(normed[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<long>(normed.size()) - 1))]);

        nn::ParamStore before = res.policy.params;
        DdpmLossResult step;
        try {
            step = ddpm_loss(res.policy, batch, rng);
        } catch (const NumericalError&) {
            res.aborted = true;
            break;
        }
        if (!std::isfinite(step.loss)) {
            res.aborted = true;
            break;
        }
        double lr = nn::cosine_lr(k, cfg.total_iters, cfg.lr0);
        try {
            nn::adamw_step(res.policy.params, step.grads, opt, lr);
        } catch (const NumericalError&) {
            res.policy.params = before;
            res.aborted = true;
            break;
        }
        for (std::size_t i = 0; i < res.policy.params.size(); ++i) {
            auto& ema = res.policy.ema_params.entry(i).second;
            const auto& cur = res.policy.params.entry(i).second;
            ema = cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * cur;
        }
        res.policy.train_step = k + 1;
        res.curve.push_back({k, step.loss, lr, cfg.train_steps});
    }
    return res;
}

void save_ddpm(const std::string& path, const DdpmPolicy& policy) {
    nlohmann::ordered_json h;
    h["format"] = "bikc-checkpoint-v1";
    h["kind"] = "ddpm";
    h["seed"] = policy.seed;
    h["train_step"] = policy.train_step;
    nlohmann::ordered_json nc;
    nc["obs_dim"] = policy.net.cfg.obs_dim;
    nc["action_dim"] = policy.net.cfg.action_dim;
    nc["keypose_dim"] = policy.net.cfg.keypose_dim;
    nc["obs_horizon"] = policy.net.cfg.obs_horizon;
    nc["action_horizon"] = policy.net.cfg.action_horizon;
    nc["noise_emb_dim"] = policy.net.cfg.noise_emb_dim;
    nc["keypose_emb_dim"] = policy.net.cfg.keypose_emb_dim;
    nc["use_keypose"] = policy.net.cfg.use_keypose;
    nc["hidden"] = policy.net.cfg.hidden;
    h["net"] = nc;
    nlohmann::ordered_json dd;
    dd["train_steps"] = policy.cfg.train_steps;
    dd["eval_steps"] = policy.cfg.eval_steps;
    dd["beta_schedule"] = policy.cfg.beta_schedule;
    dd["ema_decay"] = policy.cfg.ema_decay;
    h["ddpm"] = dd;
    h["norm"] = norm_to_json(policy.stats);

    // raw weights then EMA weights, distinguished by prefix
    nn::ParamStore both;
    for (const auto& [name, v] : policy.params) both.add("raw." + name, v);
    for (const auto& [name, v] : policy.ema_params) both.add("ema." + name, v);
    save_checkpoint(path, h, both);
}

DdpmPolicy load_ddpm(const std::string& path) {
    nlohmann::ordered_json h;
    nn::ParamStore both = load_checkpoint(path, h);
    if (h.value("kind", "") != std::string("ddpm"))
        throw ConfigError("not a ddpm checkpoint: " + path);
    DdpmPolicy p;
    const auto& nc = h.at("net");
    policy::NetConfig cfg_net;
    cfg_net.obs_dim = nc.at("obs_dim").get<int>();
    cfg_net.action_dim = nc.at("action_dim").get<int>();
    cfg_net.keypose_dim = nc.at("keypose_dim").get<int>();
    cfg_net.obs_horizon = nc.at("obs_horizon").get<int>();
    cfg_net.action_horizon = nc.at("action_horizon").get<int>();
    cfg_net.noise_emb_dim = nc.at("noise_emb_dim").get<int>();
    cfg_net.keypose_emb_dim = nc.at("keypose_emb_dim").get<int>();
    cfg_net.use_keypose = nc.at("use_keypose").get<bool>();
    cfg_net.hidden = nc.at("hidden").get<std::vector<int>>();
    const auto& dd = h.at("ddpm");
    p.cfg.train_steps = dd.at("train_steps").get<int>();
    p.cfg.eval_steps = dd.at("eval_steps").get<int>();
    p.cfg.beta_schedule = dd.at("beta_schedule").get<std::string>();
    p.cfg.ema_decay = dd.at("ema_decay").get<double>();
    p.cfg.obs_horizon = cfg_net.obs_horizon;
    p.cfg.action_horizon = cfg_net.action_horizon;
    p.cfg.noise_emb_dim = cfg_net.noise_emb_dim;
    p.cfg.keypose_emb_dim = cfg_net.keypose_emb_dim;
    p.cfg.hidden = cfg_net.hidden;
    p.net = policy::Net::make(cfg_net);
    for (const auto& [name, v] : both) {
        if (name.rfind("raw.", 0) == 0) p.params.add(name.substr(4), v);
        else if (name.rfind("ema.", 0) == 0) p.ema_params.add(name.substr(4), v);
    }
    p.abar = alpha_bars(p.cfg);
    p.stats = norm_from_json(h.at("norm"));
    p.seed = h.at("seed").get<uint64_t>();
    p.train_step = h.at("train_step").get<long>();
    return p;
}

}  // namespace bikc::ddpm
