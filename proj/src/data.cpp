#include "bikc/data.hpp"

#include <fstream>
#include <limits>

#include <json.hpp>

namespace bikc::data {

using nlohmann::ordered_json;

void Trajectory::validate() const {
    if (obs.size() != actions.size())
        throw ContractError("trajectory " + task + ": |obs| != |actions|");
    for (const auto& o : obs)
        if (!o.allFinite()) throw NumericalError("trajectory " + task + ": non-finite observation");
    for (const auto& a : actions)
        if (!a.allFinite()) throw NumericalError("trajectory " + task + ": non-finite action");
    if (!obs.empty() && obs.front().size() < proprio_dim)
        throw ContractError("trajectory " + task + ": obs shorter than proprio_dim");
}

namespace {

void fold_minmax(const VectorXd& x, VectorXd& lo, VectorXd& hi) {
    if (lo.size() == 0) {
        lo = x;
        hi = x;
        return;
    }
    if (lo.size() != x.size()) throw ContractError("fit_norm: inconsistent vector widths");
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
}

}  // namespace

NormStats fit_norm(const std::vector<Trajectory>& trajs) {
    if (trajs.empty()) throw ContractError("fit_norm: no trajectories");
    NormStats st;
    for (const auto& tr : trajs) {
        tr.validate();
        for (const auto& o : tr.obs) {
            fold_minmax(o, st.obs_min, st.obs_max);
            fold_minmax(o.head(tr.proprio_dim), st.kp_min, st.kp_max);
        }
        for (const auto& a : tr.actions) fold_minmax(a, st.act_min, st.act_max);
    }
    st.fitted = true;
    return st;
}

VectorXd normalize(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
    if (x.size() != lo.size()) throw ConfigError("normalize: dimension mismatch");
    VectorXd out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double span = hi[i] - lo[i];
        out[i] = span < 1e-12 ? 0.0 : 2.0 * (x[i] - lo[i]) / span - 1.0;
    }
    return out;
}

VectorXd unnormalize(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
    if (x.size() != lo.size()) throw ConfigError("unnormalize: dimension mismatch");
    VectorXd out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double span = hi[i] - lo[i];
        out[i] = span < 1e-12 ? lo[i] : lo[i] + (x[i] + 1.0) * 0.5 * span;
    }
    return out;
}

namespace {

const VectorXd& pick_lo(const NormStats& s, const std::string& w) {
    if (!s.fitted) throw ConfigError("normalization stats not fitted");
    if (w == "obs") return s.obs_min;
    if (w == "action") return s.act_min;
    if (w == "keypose") return s.kp_min;
    throw ConfigError("normalize: unknown field " + w);
}

const VectorXd& pick_hi(const NormStats& s, const std::string& w) {
    if (w == "obs") return s.obs_max;
    if (w == "action") return s.act_max;
    return s.kp_max;
}

}  // namespace

VectorXd normalize(const NormStats& stats, const VectorXd& x, const std::string& which) {
    return normalize(x, pick_lo(stats, which), pick_hi(stats, which));
}

VectorXd unnormalize(const NormStats& stats, const VectorXd& x, const std::string& which) {
    pick_lo(stats, which);  // fitted check
    return unnormalize(x, pick_lo(stats, which), pick_hi(stats, which));
}

std::vector<ChunkSample> build_traj_dataset(
    const std::vector<Trajectory>& trajs,
    const std::vector<std::vector<int>>& keypose_indices,
    int obs_horizon, int chunk_len) {
    if (trajs.size() != keypose_indices.size())
        throw ContractError("build_traj_dataset: keyposes not aligned to trajectories");
    if (obs_horizon < 1 || chunk_len < 1)
        throw ContractError("build_traj_dataset: horizons must be >= 1");

    std::vector<ChunkSample> out;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const Trajectory& tr = trajs[i];
        const std::vector<int>& kp = keypose_indices[i];
        int T = tr.length();
        if (T < 1) throw ContractError("build_traj_dataset: empty trajectory");
        if (kp.size() < 2 || kp.front() != 0 || kp.back() != T)
            throw ContractError("build_traj_dataset: keypose indices must span [0, T]");
        int obs_dim = static_cast<int>(tr.obs[0].size());
        int act_dim = static_cast<int>(tr.actions[0].size());

        for (std::size_t j = 0; j + 1 < kp.size(); ++j) {
            int t_next = kp[j + 1];
            // final keypose sits at index T; its pose is the final state
            VectorXd k_next = tr.proprio(std::min(t_next, T - 1));
            for (int t = kp[j]; t < t_next; ++t) {
                ChunkSample s;
                s.obs_history.resize(obs_horizon, obs_dim);
                for (int h = 0; h < obs_horizon; ++h) {
                    int idx = std::max(0, t - obs_horizon + 1 + h);
                    s.obs_history.row(h) = tr.obs[static_cast<std::size_t>(idx)].transpose();
                }
                s.target_keypose = k_next;
                s.chunk.resize(chunk_len, act_dim);
                for (int r = 0; r < chunk_len; ++r) {
                    int idx = t + r;
                    if (idx >= t_next) idx = t_next - 1;  // hold at the keypose
                    s.chunk.row(r) = tr.actions[static_cast<std::size_t>(idx)].transpose();
                }
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

namespace {

ordered_json vec_to_json(const VectorXd& v) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

VectorXd json_to_vec(const ordered_json& arr) {
    VectorXd v(arr.size());
    Eigen::Index i = 0;
    for (const auto& x : arr) v[i++] = x.get<double>();
    return v;
}

}  // namespace

void save_trajs(const std::string& path, const std::vector<Trajectory>& trajs) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write: " + path);
    for (const auto& tr : trajs) {
        ordered_json j;
        j["task"] = tr.task;
        j["seed"] = tr.seed;
        j["proprio_dim"] = tr.proprio_dim;
        ordered_json obs = ordered_json::array();
        for (const auto& o : tr.obs) obs.push_back(vec_to_json(o));
        j["obs"] = std::move(obs);
        ordered_json acts = ordered_json::array();
        for (const auto& a : tr.actions) acts.push_back(vec_to_json(a));
        j["actions"] = std::move(acts);
        ordered_json ev = ordered_json::object();
        for (const auto& [name, tick] : tr.events) ev[name] = tick;
        j["events"] = std::move(ev);
        out << j.dump() << "\n";
    }
}

std::vector<Trajectory> load_trajs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read: " + path);
    std::vector<Trajectory> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
            Trajectory tr;
            tr.task = j.at("task").get<std::string>();
            tr.seed = j.at("seed").get<uint64_t>();
            tr.proprio_dim = j.at("proprio_dim").get<int>();
            for (const auto& o : j.at("obs")) tr.obs.push_back(json_to_vec(o));
            for (const auto& a : j.at("actions")) tr.actions.push_back(json_to_vec(a));
            for (const auto& [name, tick] : j.at("events").items())
                tr.events[name] = tick.get<int>();
            tr.validate();
            out.push_back(std::move(tr));
        } catch (const nlohmann::json::exception& e) {
            throw ContractError("parse error at line " + std::to_string(line_no) + " of " +
                                path + ": " + e.what());
        }
    }
    return out;
}

}  // namespace bikc::data
