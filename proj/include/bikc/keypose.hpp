#pragma once

#include <string>
#include <vector>

#include "bikc/data.hpp"
#include "bikc/nn.hpp"

namespace bikc::kp {

using data::NormStats;
using data::Trajectory;
using Eigen::VectorXd;

enum class Arm { Left, Right };

// Heuristic thresholds for keypose identification: aperture-change onset
// (contact-mode change), end-effector stall onset, and named case rules
// over the bimanual state.
struct KeyposeRules {
    double gripper_open_close_delta = 0.04;  // aperture change per tick
    double stall_speed_thresh = 0.004;       // workspace units per tick
    int debounce_ticks = 5;

    struct CaseRule {
        std::string name;  // "gripper_distance" | "gripper_height"
        double threshold;
    };
    std::vector<CaseRule> case_rules{{"gripper_distance", 0.08},
                                     {"gripper_height", 0.05}};

    void validate() const;
};

// Interior keypose candidates for one arm (0 and T are added by merging).
std::vector<int> detect_arm_keyposes(const Trajectory& traj, Arm arm,
                                     const KeyposeRules& rules);

// Sorted deduplicated union of both arms' indices with 0 and T inserted.
std::vector<int> merge_keyposes(const std::vector<int>& left,
                                const std::vector<int>& right, int T);

struct KeyposeSet {
    std::vector<int> indices;     // includes 0 and T, strictly increasing
    std::vector<VectorXd> poses;  // proprio at each index (pose at T = final state)
};

KeyposeSet make_keypose_set(const Trajectory& traj, const std::vector<int>& merged);

KeyposeSet extract_keyposes(const Trajectory& traj, const KeyposeRules& rules);

// Sidecar persistence: {"traj_id": ..., "indices": [...], "poses": [[...]]}
void save_keypose_set(const std::string& path, const std::string& traj_id,
                      const KeyposeSet& set);
KeyposeSet load_keypose_set(const std::string& path, std::string* traj_id = nullptr);

// One predictor training tuple: observation inside segment j with the
// bracketing keyposes.
struct KeyposeTuple {
    VectorXd obs;
    VectorXd k_prev;
    VectorXd k_next;
};

std::vector<KeyposeTuple> build_keypose_dataset(const std::vector<Trajectory>& trajs,
                                                const std::vector<KeyposeSet>& keyposes);

struct PredictorConfig {
    std::vector<int> hidden{256, 256};
    long total_iters = 3000;
    int batch_size = 64;
    double lr0 = 1e-4;
    double weight_decay = 1e-6;
    double holdout_fraction = 0.1;
};

struct KeyposePredictor {
    nn::MlpSpec spec;
    nn::ParamStore params;
    NormStats stats;
    int obs_dim = 0;
    int keypose_dim = 0;
    long train_step = 0;
    uint64_t seed = 0;
};

struct PredictorTrainResult {
    KeyposePredictor predictor;
    std::vector<double> loss_curve;
    double holdout_mse = 0.0;  // per-element, normalized units
    bool aborted = false;
};

PredictorTrainResult train_keypose_predictor(const std::vector<KeyposeTuple>& dataset,
                                             const NormStats& stats,
                                             const PredictorConfig& cfg, uint64_t seed);

// Single forward pass; normalizes inputs and unnormalizes the prediction.
VectorXd predict_next_keypose(const KeyposePredictor& pred, const VectorXd& obs,
                              const VectorXd& keypose);

void save_predictor(const std::string& path, const KeyposePredictor& pred);
KeyposePredictor load_predictor(const std::string& path);

}  // namespace bikc::kp
