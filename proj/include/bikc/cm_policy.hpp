#pragma once

#include <deque>
#include <string>
#include <vector>

#include "bikc/data.hpp"
#include "bikc/policy_net.hpp"
#include "bikc/schedule.hpp"

namespace bikc::cm {

using data::ChunkSample;
using data::NormStats;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CtConfig {
    int s0 = 10;
    int s1 = 160;
    long total_iters = 5000;
    double sigma_data = 0.5;
    double huber_c = 0.0064;
    double ema_mu = 0.0;
    double eps = 0.002;
    double sigma_max = 80.0;
    double rho = 7.0;
    int obs_horizon = 2;
    int action_horizon = 8;
    int chunk_len = 16;
    int noise_emb_dim = 128;
    int keypose_emb_dim = 128;
    int batch_size = 64;
    double lr0 = 1e-4;
    double weight_decay = 1e-6;
    std::vector<int> hidden{256, 256, 256};

    void validate() const;
};

// Consistency-model trajectory generator: theta plus the gradient-detached
// target copy theta^- used by the second branch of the training objective.
struct CmPolicy {
    policy::Net net;
    nn::ParamStore params;         // theta
    nn::ParamStore target_params;  // theta^-
    CtConfig cfg;
    NormStats stats;
    long train_step = 0;
    uint64_t seed = 0;
};

CmPolicy cm_init(const CtConfig& cfg, int obs_dim, int action_dim,
                 int keypose_dim, bool use_keypose, uint64_t seed);

// f(x, sigma) = c_skip(sigma) * x + c_out(sigma) * F_theta(x, sigma | cond).
// Exactly one network evaluation; identity at sigma = eps by construction.
// obs_history: H_o x obs_dim, keypose: keypose_dim (both normalized).
MatrixXd consistency_fn(const CmPolicy& policy, const MatrixXd& noisy_chunk,
                        double sigma, const MatrixXd& obs_history,
                        const VectorXd& keypose, long* nfe = nullptr);

struct CtLossResult {
    double loss = 0.0;
    nn::ParamStore grads;  // w.r.t. theta only
    int n_levels = 0;      // N(k) used this iteration
};

// Eq-8-style objective on a normalized batch: per sample draw a noise index
// uniformly and one shared z for both branches, weight by 1/(sigma_{n+1} -
// sigma_n) and measure with the Pseudo-Huber metric. Gradient flows through
// the theta branch only.
CtLossResult ct_loss(const CmPolicy& policy, const std::vector<ChunkSample>& batch,
                     long k, Rng& rng);

// One-step sampling: draw x ~ N(0, sigma_max^2 I) and evaluate f once.
// obs_history holds raw observations (most recent last); keypose raw units.
// Returns an unnormalized H_a x action_dim chunk; increments *nfe by one.
MatrixXd sample_onestep(const CmPolicy& policy,
                        const std::deque<VectorXd>& obs_history,
                        const VectorXd* keypose, Rng& rng, long* nfe);

struct TrainRow {
    long iter;
    double loss;
    double lr;
    int n_k;
};

struct CmTrainResult {
    CmPolicy policy;
    std::vector<TrainRow> curve;
    bool aborted = false;  // loss went non-finite; policy is last good state
};

// Full consistency-training loop: AdamW with cosine-annealed lr, target
// copy refreshed from detached theta after every step (mu = 0).
CmTrainResult train_cm(const std::vector<ChunkSample>& dataset, const NormStats& stats,
                       const CtConfig& cfg, int obs_dim, int action_dim,
                       int keypose_dim, bool use_keypose, uint64_t seed);

void save_cm(const std::string& path, const CmPolicy& policy);
CmPolicy load_cm(const std::string& path);

void write_loss_csv(const std::string& path, const std::vector<TrainRow>& curve);

}  // namespace bikc::cm
