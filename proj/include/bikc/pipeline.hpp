#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bikc/keypose.hpp"
#include "bikc/runtime.hpp"

namespace bikc::pipe {

// Generates n demonstrations starting at seed0, skipping (and logging to
// stderr) seeds the script cannot complete. style_mode: a concrete style,
// or "mixed" to alternate through the task's styles.
std::vector<data::Trajectory> generate_demos(const sim::TaskSpec& task, int n, uint64_t seed0,
                                             const std::string& style_mode);

std::vector<kp::KeyposeSet> extract_all(const std::vector<data::Trajectory>& trajs,
                                        const kp::KeyposeRules& rules);

// Opens a checkpoint, dispatches on its "kind" header field.
std::shared_ptr<rt::ChunkSampler> load_generator(const std::string& ckpt_path);

// Demonstration-driven training pipeline: keypose extraction, dataset
// construction and normalization statistics in one place.
struct TrajTrainingInputs {
    std::vector<data::ChunkSample> dataset;
    data::NormStats stats;
    int obs_dim = 0;
    int action_dim = 0;
    int keypose_dim = 0;
};

TrajTrainingInputs prepare_traj_training(const std::vector<data::Trajectory>& trajs,
                                         const std::vector<kp::KeyposeSet>& keyposes,
                                         int obs_horizon, int chunk_len);

// --- 1-D toy distribution (two-mode) -------------------------------------

std::vector<data::ChunkSample> toy_dataset(const std::vector<double>& modes, int per_mode);
data::NormStats toy_stats(const std::vector<double>& modes);

struct ToyEval {
    std::vector<double> samples;
    std::vector<double> mode_freq;   // fraction of samples nearest each mode
    double frac_within = 0.0;        // fraction within `tol` of the nearest mode
};

ToyEval toy_eval_sampler(rt::ChunkSampler& sampler, const std::vector<double>& modes,
                         int n_samples, uint64_t seed, double tol);

// Direct-sampling oracle: draws from the true generating distribution.
ToyEval toy_eval_oracle(const std::vector<double>& modes, int n_samples, uint64_t seed,
                        double tol);

}  // namespace bikc::pipe
