#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bikc/cm_policy.hpp"
#include "bikc/ddpm.hpp"
#include "bikc/keypose.hpp"
#include "bikc/sim.hpp"

namespace bikc::rt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Seam between the episode loop and a trained generator; tests inject
// scripted samplers through it.
class ChunkSampler {
public:
    virtual ~ChunkSampler() = default;
    virtual MatrixXd sample(const std::deque<VectorXd>& obs_history, const VectorXd* keypose,
                            Rng& rng, long* nfe) = 0;
    virtual int action_horizon() const = 0;
    virtual bool needs_keypose() const = 0;
    virtual std::string algo() const = 0;
};

class CmSampler : public ChunkSampler {
public:
    explicit CmSampler(cm::CmPolicy policy) : policy_(std::move(policy)) {}
    MatrixXd sample(const std::deque<VectorXd>& obs_history, const VectorXd* keypose,
                    Rng& rng, long* nfe) override {
        return cm::sample_onestep(policy_, obs_history, keypose, rng, nfe);
    }
    int action_horizon() const override { return policy_.net.cfg.action_horizon; }
    bool needs_keypose() const override { return policy_.net.cfg.use_keypose; }
    std::string algo() const override { return "cm"; }
    const cm::CmPolicy& policy() const { return policy_; }

private:
    cm::CmPolicy policy_;
};

class DdpmSampler : public ChunkSampler {
public:
    explicit DdpmSampler(ddpm::DdpmPolicy policy) : policy_(std::move(policy)) {}
    MatrixXd sample(const std::deque<VectorXd>& obs_history, const VectorXd* keypose,
                    Rng& rng, long* nfe) override {
        return ddpm::ddim_sample(policy_, obs_history, keypose, rng, nfe);
    }
    int action_horizon() const override { return policy_.net.cfg.action_horizon; }
    bool needs_keypose() const override { return policy_.net.cfg.use_keypose; }
    std::string algo() const override { return "ddpm"; }
    const ddpm::DdpmPolicy& policy() const { return policy_; }

private:
    ddpm::DdpmPolicy policy_;
};

// Keypose predictor (absent for the non-keypose ablation) plus trajectory
// generator, with the switching threshold in normalized L-infinity units.
struct PolicyStack {
    std::shared_ptr<kp::KeyposePredictor> predictor;
    std::shared_ptr<ChunkSampler> generator;
    double switch_threshold = 0.05;
    std::vector<int> deviation_mask;  // proprio indices to compare; empty = all
};

struct StageResult {
    std::string name;
    bool success = false;
    long latch_tick = -1;
};

struct EpisodeReport {
    uint64_t seed = 0;
    std::vector<StageResult> stages;
    bool success = false;
    long nfe_total = 0;
    long inference_calls = 0;
    long sim_ticks = 0;
    long control_ticks = 0;
    long charged_ticks = 0;
    std::vector<double> wall_ms;
    long keypose_switches = 0;
    std::string first_close_arm;

    nlohmann::ordered_json to_json() const;
};

struct RunOptions {
    bool early_stop = true;  // stop once every stage has latched
};

EpisodeReport run_episode(const PolicyStack& stack, const sim::TaskSpec& task,
                          uint64_t seed, const sim::LatencyModel& latency,
                          const RunOptions& opts = {});

struct StageAggregate {
    std::string name;
    long attempts = 0;
    long successes = 0;
    std::optional<double> rate;  // nullopt when attempts == 0
};

struct EvalResult {
    std::vector<EpisodeReport> episodes;
    std::vector<StageAggregate> stages;
    double overall_rate = 0.0;
    double nfe_mean = 0.0;
    double latency_ms_p50 = 0.0;
    double duration_ticks_mean = 0.0;
};

// Success accounting: a stage's attempts are the successes of the previous
// stage; the overall rate is the product of defined per-stage rates.
EvalResult aggregate_reports(std::vector<EpisodeReport> episodes,
                             const std::vector<std::string>& stage_names);

EvalResult evaluate(const PolicyStack& stack, const sim::TaskSpec& task, int n_episodes,
                    uint64_t seed0, const sim::LatencyModel& latency, int threads = 1,
                    const RunOptions& opts = {});

void write_metrics_csv(const std::string& path, const std::string& task,
                       const std::string& algo, const EvalResult& result);

}  // namespace bikc::rt
