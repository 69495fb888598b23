#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "bikc/cm_policy.hpp"

namespace bikc::ddpm {

using cm::TrainRow;
using data::ChunkSample;
using data::NormStats;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DdpmConfig {
    int train_steps = 100;
    int eval_steps = 10;
    std::string beta_schedule = "squaredcos";
    double ema_decay = 0.75;
    int obs_horizon = 2;
    int action_horizon = 8;
    int chunk_len = 16;
    int noise_emb_dim = 128;
    int keypose_emb_dim = 128;
    long total_iters = 5000;
    int batch_size = 64;
    double lr0 = 1e-4;
    double weight_decay = 1e-6;
    std::vector<int> hidden{256, 256, 256};

    void validate() const;
};

// alpha_bar_1..alpha_bar_T from the squared-cosine schedule, with per-step
// betas clipped to 0.999 so alpha_bar stays positive.
std::vector<double> alpha_bars(const DdpmConfig& cfg);

struct DdpmPolicy {
    policy::Net net;
    nn::ParamStore params;
    nn::ParamStore ema_params;  // used for sampling
    DdpmConfig cfg;
    NormStats stats;
    std::vector<double> abar;
    long train_step = 0;
    uint64_t seed = 0;
};

DdpmPolicy ddpm_init(const DdpmConfig& cfg, int obs_dim, int action_dim,
                     int keypose_dim, bool use_keypose, uint64_t seed);

struct DdpmLossResult {
    double loss = 0.0;
    nn::ParamStore grads;
};

// Epsilon-prediction objective: corrupt the chunk at a uniform step with the
// closed-form forward marginal and regress the network onto the injected
// noise (mean squared error per coordinate).
DdpmLossResult ddpm_loss(const DdpmPolicy& policy, const std::vector<ChunkSample>& batch,
                         Rng& rng);

// Denoiser hook so tests can drive the sampler with a synthetic oracle.
// Arguments: flattened noisy chunk, discrete step t; returns predicted noise.
using DenoiseFn = std::function<Eigen::RowVectorXd(const Eigen::RowVectorXd&, int)>;

// Deterministic accelerated sampler (eta = 0) over an evenly strided
// sub-sequence of the training steps; exactly cfg.eval_steps denoiser calls.
Eigen::RowVectorXd ddim_sample_impl(const DenoiseFn& denoise, const DdpmConfig& cfg,
                                    const std::vector<double>& abar,
                                    const Eigen::RowVectorXd& x_init, long* nfe);

// Samples an unnormalized H_a x action_dim chunk using the EMA weights.
MatrixXd ddim_sample(const DdpmPolicy& policy, const std::deque<VectorXd>& obs_history,
                     const VectorXd* keypose, Rng& rng, long* nfe);

struct DdpmTrainResult {
    DdpmPolicy policy;
    std::vector<TrainRow> curve;
    bool aborted = false;
};

DdpmTrainResult train_ddpm(const std::vector<ChunkSample>& dataset, const NormStats& stats,
                           const DdpmConfig& cfg, int obs_dim, int action_dim,
                           int keypose_dim, bool use_keypose, uint64_t seed);

void save_ddpm(const std::string& path, const DdpmPolicy& policy);
DdpmPolicy load_ddpm(const std::string& path);

}  // namespace bikc::ddpm
