#include "bikc/cm_policy.hpp"

#include <cmath>
#include <fstream>

#include "bikc/checkpoint.hpp"
#include "bikc/json_util.hpp"

namespace bikc::cm {

void CtConfig::validate() const {
    if (s1 < s0) throw ConfigError("ct: s1 must be >= s0");
    if (obs_horizon < 1 || action_horizon < 1) throw ConfigError("ct: horizons must be >= 1");
    if (chunk_len < action_horizon) throw ConfigError("ct: chunk_len must be >= action_horizon");
    if (!(huber_c > 0.0)) throw ConfigError("ct: huber_c must be > 0");
}

namespace {

Eigen::RowVectorXd flatten(const MatrixXd& m) {
    Eigen::RowVectorXd out(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[k++] = m(r, c);
    return out;
}

MatrixXd unflatten(const Eigen::RowVectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    MatrixXd out(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = v[k++];
    return out;
}

double sigma_emb_arg(double sigma) { return 0.25 * std::log(sigma); }

}  // namespace

CmPolicy cm_init(const CtConfig& cfg, int obs_dim, int action_dim,
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

    CmPolicy p;
    p.net = policy::Net::make(nc);
    p.params = p.net.init_params(seed);
    p.target_params = p.params;
    p.cfg = cfg;
    p.seed = seed;
    return p;
}

namespace {

// Batched f over per-row sigmas; rows of chunks are flattened H_a x A.
MatrixXd consistency_batch(const policy::Net& net, const nn::ParamStore& params,
                           const CtConfig& cfg, const MatrixXd& chunks,
                           const VectorXd& sigmas, const MatrixXd& obs,
                           const MatrixXd& keyposes, policy::NetTape* tape,
                           VectorXd* c_outs, long* nfe) {
    Eigen::Index b = chunks.rows();
    VectorXd emb_args(b);
    for (Eigen::Index r = 0; r < b; ++r) emb_args[r] = sigma_emb_arg(sigmas[r]);
    MatrixXd f = net_forward(net, params, chunks, emb_args, obs, keyposes, tape, nfe);
    if (c_outs) c_outs->resize(b);
    for (Eigen::Index r = 0; r < b; ++r) {
        auto [c_skip, c_out] = boundary_scalings(sigmas[r], cfg.eps, cfg.sigma_data);
        f.row(r) = c_skip * chunks.row(r) + c_out * f.row(r);
        if (c_outs) (*c_outs)[r] = c_out;
    }
    return f;
}

}  // namespace

MatrixXd consistency_fn(const CmPolicy& policy, const MatrixXd& noisy_chunk,
                        double sigma, const MatrixXd& obs_history,
                        const VectorXd& keypose, long* nfe) {
    const auto& nc = policy.net.cfg;
    if (sigma < policy.cfg.eps || sigma > policy.cfg.sigma_max)
        throw ContractError("consistency_fn: sigma outside [eps, sigma_max]");
    if (noisy_chunk.rows() != nc.action_horizon || noisy_chunk.cols() != nc.action_dim)
        throw ConfigError("consistency_fn: chunk shape mismatch");

    MatrixXd chunks = flatten(noisy_chunk);
    VectorXd sigmas = VectorXd::Constant(1, sigma);
    MatrixXd obs = flatten(obs_history);
    MatrixXd kp = nc.use_keypose ? MatrixXd(keypose.transpose()) : MatrixXd(1, 0);
    MatrixXd f = consistency_batch(policy.net, policy.params, policy.cfg, chunks,
                                   sigmas, obs, kp, nullptr, nullptr, nfe);
    return unflatten(f.row(0), nc.action_horizon, nc.action_dim);
}

CtLossResult ct_loss(const CmPolicy& policy, const std::vector<ChunkSample>& batch,
                     long k, Rng& rng) {
    if (batch.empty()) throw ContractError("ct_loss: empty batch");
    const CtConfig& cfg = policy.cfg;
    const auto& nc = policy.net.cfg;
    int n_levels = curriculum_n(k, cfg.total_iters, cfg.s0, cfg.s1);
    NoiseSchedule sched = karras_sigmas(n_levels, cfg.eps, cfg.sigma_max, cfg.rho);

    Eigen::Index b = static_cast<Eigen::Index>(batch.size());
    int elems = nc.chunk_elems();
    MatrixXd x_hi(b, elems), x_lo(b, elems), obs(b, nc.obs_elems());
    MatrixXd keyposes(b, nc.use_keypose ? nc.keypose_dim : 0);
    VectorXd sig_hi(b), sig_lo(b), lambda(b);

    for (Eigen::Index i = 0; i < b; ++i) {
        const ChunkSample& s = batch[static_cast<std::size_t>(i)];
        if (s.chunk.rows() < nc.action_horizon || s.chunk.cols() != nc.action_dim)
            throw ContractError("ct_loss: chunk shorter than action horizon");
        long n = rng.uniform_int(1, n_levels - 1);
        double lo = sched.sigmas[static_cast<std::size_t>(n - 1)];
        double hi = sched.sigmas[static_cast<std::size_t>(n)];
        sig_lo[i] = lo;
        sig_hi[i] = hi;
        lambda[i] = 1.0 / (hi - lo);

        Eigen::RowVectorXd a = flatten(s.chunk.topRows(nc.action_horizon));
        Eigen::RowVectorXd z(elems);
        for (int e = 0; e < elems; ++e) z[e] = rng.normal();
        x_hi.row(i) = a + hi * z;
        x_lo.row(i) = a + lo * z;
        obs.row(i) = flatten(s.obs_history);
        if (nc.use_keypose) keyposes.row(i) = s.target_keypose.transpose();
    }

    policy::NetTape tape;
    VectorXd c_out_hi;
    MatrixXd f_hi = consistency_batch(policy.net, policy.params, cfg, x_hi, sig_hi,
                                      obs, keyposes, &tape, &c_out_hi, nullptr);
    MatrixXd f_lo = consistency_batch(policy.net, policy.target_params, cfg, x_lo,
                                      sig_lo, obs, keyposes, nullptr, nullptr, nullptr);

    double loss = 0.0;
    MatrixXd d_out(b, elems);
    double c2 = cfg.huber_c * cfg.huber_c;
    double inv_b = 1.0 / static_cast<double>(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::RowVectorXd u = f_hi.row(i) - f_lo.row(i);
        double root = std::sqrt(u.squaredNorm() + c2);
        loss += lambda[i] * (root - cfg.huber_c) * inv_b;
        d_out.row(i) = (lambda[i] * inv_b / root) * c_out_hi[i] * u;
    }

    CtLossResult res;
    res.loss = loss;
    res.grads = net_backward(policy.net, policy.params, tape, d_out);
    res.n_levels = n_levels;
    return res;
}

MatrixXd sample_onestep(const CmPolicy& policy,
                        const std::deque<VectorXd>& obs_history,
                        const VectorXd* keypose, Rng& rng, long* nfe) {
    const auto& nc = policy.net.cfg;
    if (!policy.stats.fitted)
        throw ConfigError("sample_onestep: missing normalization stats");
    if (obs_history.empty()) throw ContractError("sample_onestep: empty observation history");
    if (nc.use_keypose && keypose == nullptr)
        throw ConfigError("sample_onestep: policy expects a keypose condition");

    MatrixXd obs(nc.obs_horizon, nc.obs_dim);
    for (int h = 0; h < nc.obs_horizon; ++h) {
        int idx = static_cast<int>(obs_history.size()) - nc.obs_horizon + h;
        if (idx < 0) idx = 0;  // front-pad with the earliest observation
        obs.row(h) = data::normalize(policy.stats, obs_history[static_cast<std::size_t>(idx)], "obs").transpose();
    }
    VectorXd kp;
    if (nc.use_keypose) kp = data::normalize(policy.stats, *keypose, "keypose");

    MatrixXd x_hat(nc.action_horizon, nc.action_dim);
    for (Eigen::Index r = 0; r < x_hat.rows(); ++r)
        for (Eigen::Index c = 0; c < x_hat.cols(); ++c)
            x_hat(r, c) = policy.cfg.sigma_max * rng.normal();

    MatrixXd f = consistency_fn(policy, x_hat, policy.cfg.sigma_max, obs, kp, nfe);
    MatrixXd out(f.rows(), f.cols());
    for (Eigen::Index r = 0; r < f.rows(); ++r)
        out.row(r) = data::unnormalize(policy.stats, f.row(r).transpose(), "action").transpose();
    return out;
}

namespace {

std::vector<ChunkSample> normalize_dataset(const std::vector<ChunkSample>& dataset,
                                           const NormStats& stats) {
    std::vector<ChunkSample> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset) {
        ChunkSample n;
        n.obs_history.resize(s.obs_history.rows(), s.obs_history.cols());
        for (Eigen::Index r = 0; r < s.obs_history.rows(); ++r)
            n.obs_history.row(r) = data::normalize(stats, s.obs_history.row(r).transpose(), "obs").transpose();
        n.target_keypose = data::normalize(stats, s.target_keypose, "keypose");
        n.chunk.resize(s.chunk.rows(), s.chunk.cols());
        for (Eigen::Index r = 0; r < s.chunk.rows(); ++r)
            n.chunk.row(r) = data::normalize(stats, s.chunk.row(r).transpose(), "action").transpose();
        out.push_back(std::move(n));
    }
    return out;
}

}  // namespace

CmTrainResult train_cm(const std::vector<ChunkSample>& dataset, const NormStats& stats,
                       const CtConfig& cfg, int obs_dim, int action_dim,
                       int keypose_dim, bool use_keypose, uint64_t seed) {
    if (dataset.empty()) throw ContractError("train_cm: empty dataset");
    if (!stats.fitted) throw ConfigError("train_cm: stats not fitted");

    CmTrainResult res;
    res.policy = cm_init(cfg, obs_dim, action_dim, keypose_dim, use_keypose, seed);
    res.policy.stats = stats;

    std::vector<ChunkSample> normed = normalize_dataset(dataset, stats);
    nn::OptimState opt = nn::OptimState::like(res.policy.params);
    opt.lr0 = cfg.lr0;
    opt.weight_decay = cfg.weight_decay;
    Rng rng(Rng::derive(seed, 1));

    std::vector<ChunkSample> batch;
    for (long k = 0; k < cfg.total_iters; ++k) {
        batch.clear();
        for (int i = 0; i < cfg.batch_size; ++i)
            batch.push_back(normed[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<long>(normed.size()) - 1))]);

        nn::ParamStore before = res.policy.params;
        CtLossResult step;
        try {
            step = ct_loss(res.policy, batch, k, rng);
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
        // mu = 0: target is the detached copy of the fresh parameters
        for (std::size_t i = 0; i < res.policy.params.size(); ++i) {
            auto& tgt = res.policy.target_params.entry(i).second;
            const auto& cur = res.policy.params.entry(i).second;
            tgt = cfg.ema_mu * tgt + (1.0 - cfg.ema_mu) * cur;
        }
        res.policy.train_step = k + 1;
        res.curve.push_back({k, step.loss, lr, step.n_levels});
    }
    return res;
}

namespace {

nlohmann::ordered_json net_config_json(const policy::NetConfig& nc) {
    nlohmann::ordered_json j;
    j["obs_dim"] = nc.obs_dim;
    j["action_dim"] = nc.action_dim;
    j["keypose_dim"] = nc.keypose_dim;
    j["obs_horizon"] = nc.obs_horizon;
    j["action_horizon"] = nc.action_horizon;
    j["noise_emb_dim"] = nc.noise_emb_dim;
    j["keypose_emb_dim"] = nc.keypose_emb_dim;
    j["use_keypose"] = nc.use_keypose;
    j["hidden"] = nc.hidden;
    return j;
}

policy::NetConfig net_config_from_json(const nlohmann::ordered_json& j) {
    policy::NetConfig nc;
    nc.obs_dim = j.at("obs_dim").get<int>();
    nc.action_dim = j.at("action_dim").get<int>();
    nc.keypose_dim = j.at("keypose_dim").get<int>();
    nc.obs_horizon = j.at("obs_horizon").get<int>();
    nc.action_horizon = j.at("action_horizon").get<int>();
    nc.noise_emb_dim = j.at("noise_emb_dim").get<int>();
    nc.keypose_emb_dim = j.at("keypose_emb_dim").get<int>();
    nc.use_keypose = j.at("use_keypose").get<bool>();
    nc.hidden = j.at("hidden").get<std::vector<int>>();
    return nc;
}

}  // namespace

void save_cm(const std::string& path, const CmPolicy& policy) {
    nlohmann::ordered_json h;
    h["format"] = "bikc-checkpoint-v1";
    h["kind"] = "cm";
    h["seed"] = policy.seed;
    h["train_step"] = policy.train_step;
    h["net"] = net_config_json(policy.net.cfg);
    nlohmann::ordered_json sched;
    sched["eps"] = policy.cfg.eps;
    sched["sigma_max"] = policy.cfg.sigma_max;
    sched["rho"] = policy.cfg.rho;
    sched["sigma_data"] = policy.cfg.sigma_data;
    sched["huber_c"] = policy.cfg.huber_c;
    sched["s0"] = policy.cfg.s0;
    sched["s1"] = policy.cfg.s1;
    sched["K"] = policy.cfg.total_iters;
    h["schedule"] = sched;
    h["norm"] = norm_to_json(policy.stats);
    save_checkpoint(path, h, policy.params);
}

CmPolicy load_cm(const std::string& path) {
    nlohmann::ordered_json h;
    nn::ParamStore params = load_checkpoint(path, h);
    if (h.value("kind", "") != std::string("cm"))
        throw ConfigError("not a cm checkpoint: " + path);
    CmPolicy p;
    policy::NetConfig nc = net_config_from_json(h.at("net"));
    const auto& sched = h.at("schedule");
    p.cfg.eps = sched.at("eps").get<double>();
    p.cfg.sigma_max = sched.at("sigma_max").get<double>();
    p.cfg.rho = sched.at("rho").get<double>();
    p.cfg.sigma_data = sched.at("sigma_data").get<double>();
    p.cfg.huber_c = sched.at("huber_c").get<double>();
    p.cfg.s0 = sched.at("s0").get<int>();
    p.cfg.s1 = sched.at("s1").get<int>();
    p.cfg.total_iters = sched.at("K").get<long>();
    p.cfg.obs_horizon = nc.obs_horizon;
    p.cfg.action_horizon = nc.action_horizon;
    p.cfg.noise_emb_dim = nc.noise_emb_dim;
    p.cfg.keypose_emb_dim = nc.keypose_emb_dim;
    p.cfg.hidden = nc.hidden;
    p.net = policy::Net::make(nc);
    p.params = std::move(params);
    p.target_params = p.params;
    p.stats = norm_from_json(h.at("norm"));
    p.seed = h.at("seed").get<uint64_t>();
    p.train_step = h.at("train_step").get<long>();
    return p;
}

void write_loss_csv(const std::string& path, const std::vector<TrainRow>& curve) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write: " + path);
    out << "iter,loss,lr,N_k\n";
    char buf[160];
    for (const auto& r : curve) {
        std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%d\n", r.iter, r.loss, r.lr, r.n_k);
        out << buf;
    }
}

}  // namespace bikc::cm
