#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "bikc/common.hpp"

namespace bikc::data {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One recorded episode. Observations start with the proprioceptive block
// (both arms' x, y, aperture) followed by object state; actions are target
// proprio values. Event ticks come from scripted demonstrators and serve
// as keypose ground truth.
struct Trajectory {
    std::string task;
    uint64_t seed = 0;
    int proprio_dim = 6;
    std::vector<VectorXd> obs;
    std::vector<VectorXd> actions;
    std::map<std::string, int> events;

    int length() const { return static_cast<int>(obs.size()); }
    VectorXd proprio(int t) const { return obs.at(static_cast<std::size_t>(t)).head(proprio_dim); }
    void validate() const;
};

// Per-element min/max for linear [-1, 1] normalization. Keyposes get their
// own stats (fitted on the proprio slice) separate from obs and actions.
struct NormStats {
    VectorXd obs_min, obs_max;
    VectorXd act_min, act_max;
    VectorXd kp_min, kp_max;
    bool fitted = false;
};

NormStats fit_norm(const std::vector<Trajectory>& trajs);

VectorXd normalize(const VectorXd& x, const VectorXd& lo, const VectorXd& hi);
VectorXd unnormalize(const VectorXd& x, const VectorXd& lo, const VectorXd& hi);

// which: "obs" | "action" | "keypose"
VectorXd normalize(const NormStats& stats, const VectorXd& x, const std::string& which);
VectorXd unnormalize(const NormStats& stats, const VectorXd& x, const std::string& which);

// One trajectory-generator training tuple. obs_history rows are the H_o
// observations ending at t (front-padded with obs[0] near the episode
// start); chunk rows are chunk_len actions from t with rows at or beyond
// the target keypose tick frozen at the action just before it.
struct ChunkSample {
    MatrixXd obs_history;     // H_o x obs_dim
    VectorXd target_keypose;  // k_{j+1}
    MatrixXd chunk;           // chunk_len x action_dim
};

std::vector<ChunkSample> build_traj_dataset(
    const std::vector<Trajectory>& trajs,
    const std::vector<std::vector<int>>& keypose_indices,
    int obs_horizon, int chunk_len);

// JSON-Lines persistence, one trajectory per line, canonical key order.
void save_trajs(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> load_trajs(const std::string& path);

}  // namespace bikc::data
