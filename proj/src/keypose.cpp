#include "bikc/keypose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "bikc/checkpoint.hpp"
#include "bikc/json_util.hpp"

namespace bikc::kp {

void KeyposeRules::validate() const {
    if (!(gripper_open_close_delta > 0.0) || !(stall_speed_thresh > 0.0))
        throw ConfigError("keypose rules: thresholds must be > 0");
    for (const auto& r : case_rules)
        if (!(r.threshold > 0.0)) throw ConfigError("keypose rule " + r.name + ": threshold must be > 0");
}

namespace {

// obs layout: [left x, left y, left g, right x, right y, right g, ...]
int arm_offset(Arm arm) { return arm == Arm::Left ? 0 : 3; }

bool case_rule_holds(const KeyposeRules::CaseRule& rule, const VectorXd& obs, int off) {
    if (rule.name == "gripper_distance") {
        double dx = obs[0] - obs[3];
        double dy = obs[1] - obs[4];
        return std::sqrt(dx * dx + dy * dy) < rule.threshold;
    }
    if (rule.name == "gripper_height") {
        return obs[off + 1] < rule.threshold;
    }
    throw ConfigError("unknown case rule: " + rule.name);
}

}  // namespace

std::vector<int> detect_arm_keyposes(const Trajectory& traj, Arm arm,
                                     const KeyposeRules& rules) {
    rules.validate();
    int T = traj.length();
    if (T == 0) throw ContractError("detect_arm_keyposes: empty trajectory");
    if (T < 2) throw ContractError("detect_arm_keyposes: trajectory length must be >= 2");
    int off = arm_offset(arm);

    std::vector<int> hits;
    bool ever_moved = false;
    double prev_delta = 0.0;
    for (int t = 1; t < T; ++t) {
        const VectorXd& cur = traj.obs[static_cast<std::size_t>(t)];
        const VectorXd& prev = traj.obs[static_cast<std::size_t>(t - 1)];

        // (a) aperture begins to open or close (onset or direction flip)
        double delta = cur[off + 2] - prev[off + 2];
        bool moving = std::abs(delta) >= rules.gripper_open_close_delta;
        bool was_moving = std::abs(prev_delta) >= rules.gripper_open_close_delta;
        if (moving && (!was_moving || delta * prev_delta < 0.0)) hits.push_back(t);
        prev_delta = delta;

        // (b) stall onset after having exceeded the speed threshold
        double dx = cur[off] - prev[off];
        double dy = cur[off + 1] - prev[off + 1];
        double speed = std::sqrt(dx * dx + dy * dy);
        if (speed >= rules.stall_speed_thresh) {
            ever_moved = true;
        } else if (ever_moved && t >= 2) {
            const VectorXd& prev2 = traj.obs[static_cast<std::size_t>(t - 2)];
            double pdx = prev[off] - prev2[off];
            double pdy = prev[off + 1] - prev2[off + 1];
            if (std::sqrt(pdx * pdx + pdy * pdy) >= rules.stall_speed_thresh)
                hits.push_back(t);
        }

        // (c) case rules on a rising edge
        for (const auto& rule : rules.case_rules)
            if (case_rule_holds(rule, cur, off) && !case_rule_holds(rule, prev, off))
                hits.push_back(t);
    }

    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());

    std::vector<int> out;
    for (int t : hits) {
        if (!out.empty() && t - out.back() < rules.debounce_ticks) continue;
        out.push_back(t);
    }
    return out;
}

std::vector<int> merge_keyposes(const std::vector<int>& left,
                                const std::vector<int>& right, int T) {
    std::set<int> merged;
    for (int t : left) {
        if (t < 0 || t > T) throw ContractError("merge_keyposes: index out of [0, T]");
        merged.insert(t);
    }
    for (int t : right) {
        if (t < 0 || t > T) throw ContractError("merge_keyposes: index out of [0, T]");
        merged.insert(t);
    }
    merged.insert(0);
    merged.insert(T);
    return {merged.begin(), merged.end()};
}

KeyposeSet make_keypose_set(const Trajectory& traj, const std::vector<int>& merged) {
    int T = traj.length();
    KeyposeSet set;
    set.indices = merged;
    for (int t : merged)
        set.poses.push_back(traj.proprio(std::min(t, T - 1)));
    return set;
}

KeyposeSet extract_keyposes(const Trajectory& traj, const KeyposeRules& rules) {
    auto left = detect_arm_keyposes(traj, Arm::Left, rules);
    auto right = detect_arm_keyposes(traj, Arm::Right, rules);
    return make_keypose_set(traj, merge_keyposes(left, right, traj.length()));
}

void save_keypose_set(const std::string& path, const std::string& traj_id,
                      const KeyposeSet& set) {
    nlohmann::ordered_json j;
    j["traj_id"] = traj_id;
    j["indices"] = set.indices;
    nlohmann::ordered_json poses = nlohmann::ordered_json::array();
    for (const auto& p : set.poses) poses.push_back(vec_to_json(p));
    j["poses"] = std::move(poses);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write: " + path);
    out << j.dump() << "\n";
}

KeyposeSet load_keypose_set(const std::string& path, std::string* traj_id) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError("keypose sidecar parse error in " + path + ": " + e.what());
    }
    if (traj_id) *traj_id = j.at("traj_id").get<std::string>();
    KeyposeSet set;
    set.indices = j.at("indices").get<std::vector<int>>();
    for (const auto& p : j.at("poses")) set.poses.push_back(vec_from_json(p));
    return set;
}

std::vector<KeyposeTuple> build_keypose_dataset(const std::vector<Trajectory>& trajs,
                                                const std::vector<KeyposeSet>& keyposes) {
    if (trajs.size() != keyposes.size())
        throw ContractError("build_keypose_dataset: keyposes not aligned to trajectories");
    std::vector<KeyposeTuple> out;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const Trajectory& tr = trajs[i];
        const KeyposeSet& ks = keyposes[i];
        int T = tr.length();
        if (ks.indices.size() < 2 || ks.indices.front() != 0 || ks.indices.back() != T)
            throw ContractError("build_keypose_dataset: keypose indices must span [0, T]");
        if (ks.poses.size() != ks.indices.size())
            throw ContractError("build_keypose_dataset: |poses| != |indices|");
        for (std::size_t j = 0; j + 1 < ks.indices.size(); ++j) {
            for (int t = ks.indices[j]; t < ks.indices[j + 1]; ++t) {
                KeyposeTuple tup;
                tup.obs = tr.obs[static_cast<std::size_t>(t)];
                tup.k_prev = ks.poses[j];
                tup.k_next = ks.poses[j + 1];
                out.push_back(std::move(tup));
            }
        }
    }
    return out;
}

PredictorTrainResult train_keypose_predictor(const std::vector<KeyposeTuple>& dataset,
                                             const NormStats& stats,
                                             const PredictorConfig& cfg, uint64_t seed) {
    if (dataset.empty()) throw ContractError("train_keypose_predictor: empty dataset");
    if (!stats.fitted) throw ConfigError("train_keypose_predictor: stats not fitted");

    int obs_dim = static_cast<int>(dataset[0].obs.size());
    int kp_dim = static_cast<int>(dataset[0].k_prev.size());

    PredictorTrainResult res;
    res.predictor.spec.input_dim = obs_dim + kp_dim;
    res.predictor.spec.hidden_widths = cfg.hidden;
    res.predictor.spec.output_dim = kp_dim;
    res.predictor.obs_dim = obs_dim;
    res.predictor.keypose_dim = kp_dim;
    res.predictor.stats = stats;
    res.predictor.seed = seed;
    Rng init_rng(seed);
    nn::mlp_init(res.predictor.params, res.predictor.spec, init_rng);

    // normalized design matrix; every 1/holdout_fraction-th sample held out
    std::size_t n = dataset.size();
    int holdout_stride = cfg.holdout_fraction > 0.0
                             ? std::max<int>(2, static_cast<int>(std::lround(1.0 / cfg.holdout_fraction)))
                             : 0;
    std::vector<Eigen::VectorXd> in_train, out_train, in_hold, out_hold;
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd x(obs_dim + kp_dim);
        x.head(obs_dim) = data::normalize(stats, dataset[i].obs, "obs");
        x.tail(kp_dim) = data::normalize(stats, dataset[i].k_prev, "keypose");
        Eigen::VectorXd y = data::normalize(stats, dataset[i].k_next, "keypose");
        bool hold = holdout_stride > 0 && (i % static_cast<std::size_t>(holdout_stride)) == 1;
        (hold ? in_hold : in_train).push_back(std::move(x));
        (hold ? out_hold : out_train).push_back(std::move(y));
    }
    if (in_train.empty()) throw ContractError("train_keypose_predictor: no training samples");

    nn::OptimState opt = nn::OptimState::like(res.predictor.params);
    opt.lr0 = cfg.lr0;
    opt.weight_decay = cfg.weight_decay;
    Rng rng(Rng::derive(seed, 3));

    for (long k = 0; k < cfg.total_iters; ++k) {
        Eigen::MatrixXd xb(cfg.batch_size, obs_dim + kp_dim);
        Eigen::MatrixXd yb(cfg.batch_size, kp_dim);
        for (int i = 0; i < cfg.batch_size; ++i) {
            std::size_t idx = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<long>(in_train.size()) - 1));
            xb.row(i) = in_train[idx].transpose();
            yb.row(i) = out_train[idx].transpose();
        }
        nn::MlpTape tape;
        Eigen::MatrixXd pred;
        try {
            pred = nn::mlp_forward_batch(res.predictor.params, res.predictor.spec, xb, &tape);
        } catch (const NumericalError&) {
            res.aborted = true;
            break;
        }
        Eigen::MatrixXd resid = pred - yb;
        double loss = resid.array().square().rowwise().sum().mean();
        if (!std::isfinite(loss)) {
            res.aborted = true;
            break;
        }
        nn::ParamStore grads = nn::ParamStore::zeros_like(res.predictor.params);
        Eigen::MatrixXd d_out = (2.0 / cfg.batch_size) * resid;
        nn::mlp_backward(res.predictor.params, res.predictor.spec, tape, d_out, grads);
        double lr = nn::cosine_lr(k, cfg.total_iters, cfg.lr0);
        nn::adamw_step(res.predictor.params, grads, opt, lr);
        res.predictor.train_step = k + 1;
        res.loss_curve.push_back(loss);
    }

    // held-out per-element MSE in normalized units
    if (!in_hold.empty()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < in_hold.size(); ++i) {
            Eigen::VectorXd pred = nn::mlp_forward(res.predictor.params, res.predictor.spec, in_hold[i]);
            acc += (pred - out_hold[i]).squaredNorm();
        }
        res.holdout_mse = acc / (static_cast<double>(in_hold.size()) * kp_dim);
    }
    return res;
}

VectorXd predict_next_keypose(const KeyposePredictor& pred, const VectorXd& obs,
                              const VectorXd& keypose) {
    if (obs.size() != pred.obs_dim || keypose.size() != pred.keypose_dim)
        throw ConfigError("predict_next_keypose: dimension mismatch");
    Eigen::VectorXd x(pred.obs_dim + pred.keypose_dim);
    x.head(pred.obs_dim) = data::normalize(pred.stats, obs, "obs");
    x.tail(pred.keypose_dim) = data::normalize(pred.stats, keypose, "keypose");
    Eigen::VectorXd y = nn::mlp_forward(pred.params, pred.spec, x);
    return data::unnormalize(pred.stats, y, "keypose");
}

void save_predictor(const std::string& path, const KeyposePredictor& pred) {
    nlohmann::ordered_json h;
    h["format"] = "bikc-checkpoint-v1";
    h["kind"] = "keypose";
    h["seed"] = pred.seed;
    h["train_step"] = pred.train_step;
    h["obs_dim"] = pred.obs_dim;
    h["keypose_dim"] = pred.keypose_dim;
    h["hidden"] = pred.spec.hidden_widths;
    h["activation"] = nn::activation_name(pred.spec.activation);
    h["norm"] = norm_to_json(pred.stats);
    save_checkpoint(path, h, pred.params);
}

KeyposePredictor load_predictor(const std::string& path) {
    nlohmann::ordered_json h;
    nn::ParamStore params = load_checkpoint(path, h);
    if (h.value("kind", "") != std::string("keypose"))
        throw ConfigError("not a keypose checkpoint: " + path);
    KeyposePredictor pred;
    pred.obs_dim = h.at("obs_dim").get<int>();
    pred.keypose_dim = h.at("keypose_dim").get<int>();
    pred.spec.input_dim = pred.obs_dim + pred.keypose_dim;
    pred.spec.hidden_widths = h.at("hidden").get<std::vector<int>>();
    pred.spec.output_dim = pred.keypose_dim;
    pred.spec.activation = nn::activation_from_name(h.at("activation").get<std::string>());
    pred.params = std::move(params);
    pred.stats = norm_from_json(h.at("norm"));
    pred.seed = h.at("seed").get<uint64_t>();
    pred.train_step = h.at("train_step").get<long>();
    return pred;
}

}  // namespace bikc::kp
