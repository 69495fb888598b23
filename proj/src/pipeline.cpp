#include "bikc/pipeline.hpp"

#include <cmath>
#include <iostream>

#include "bikc/checkpoint.hpp"

namespace bikc::pipe {

using Eigen::VectorXd;

std::vector<data::Trajectory> generate_demos(const sim::TaskSpec& task, int n, uint64_t seed0,
                                             const std::string& style_mode) {
    std::vector<data::Trajectory> out;
    uint64_t seed = seed0;
    int produced = 0;
    while (produced < n) {
        std::string style = style_mode;
        if (style_mode == "mixed")
            style = task.demo_styles[static_cast<std::size_t>(produced) % task.demo_styles.size()];
        try {
            out.push_back(sim::scripted_demo(task, seed, style));
            ++produced;
        } catch (const sim::GenerationError& e) {
            std::cerr << "demo-gen: rejected seed " << seed << ": " << e.what() << "\n";
        }
        ++seed;
        if (seed - seed0 > static_cast<uint64_t>(10 * n + 100))
            throw sim::GenerationError("demo generation rejected too many seeds for task " +
                                       task.name);
    }
    return out;
}

std::vector<kp::KeyposeSet> extract_all(const std::vector<data::Trajectory>& trajs,
                                        const kp::KeyposeRules& rules) {
    std::vector<kp::KeyposeSet> out;
    out.reserve(trajs.size());
    for (const auto& tr : trajs) out.push_back(kp::extract_keyposes(tr, rules));
    return out;
}

std::shared_ptr<rt::ChunkSampler> load_generator(const std::string& ckpt_path) {
    nlohmann::ordered_json header;
    load_checkpoint(ckpt_path, header);
    std::string kind = header.value("kind", "");
    if (kind == "cm") return std::make_shared<rt::CmSampler>(cm::load_cm(ckpt_path));
    if (kind == "ddpm") return std::make_shared<rt::DdpmSampler>(ddpm::load_ddpm(ckpt_path));
    throw ConfigError("checkpoint " + ckpt_path + " is not a trajectory generator (kind=" +
                      kind + ")");
}

TrajTrainingInputs prepare_traj_training(const std::vector<data::Trajectory>& trajs,
                                         const std::vector<kp::KeyposeSet>& keyposes,
                                         int obs_horizon, int chunk_len) {
    if (trajs.empty()) throw ContractError("prepare_traj_training: no demonstrations");
    TrajTrainingInputs in;
    std::vector<std::vector<int>> indices;
    indices.reserve(keyposes.size());
    for (const auto& ks : keyposes) indices.push_back(ks.indices);
    in.dataset = data::build_traj_dataset(trajs, indices, obs_horizon, chunk_len);
    in.stats = data::fit_norm(trajs);
    in.obs_dim = static_cast<int>(trajs[0].obs[0].size());
    in.action_dim = static_cast<int>(trajs[0].actions[0].size());
    in.keypose_dim = trajs[0].proprio_dim;
    return in;
}

std::vector<data::ChunkSample> toy_dataset(const std::vector<double>& modes, int per_mode) {
    std::vector<data::ChunkSample> out;
    for (double m : modes) {
        for (int i = 0; i < per_mode; ++i) {
            data::ChunkSample s;
            s.obs_history = Eigen::MatrixXd::Zero(2, 1);
            s.target_keypose = VectorXd::Zero(1);
            s.chunk = Eigen::MatrixXd::Constant(1, 1, m);
            out.push_back(std::move(s));
        }
    }
    return out;
}

data::NormStats toy_stats(const std::vector<double>& modes) {
    double lo = modes.front(), hi = modes.front();
    for (double m : modes) {
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    data::NormStats st;
    st.obs_min = VectorXd::Constant(1, -1.0);
    st.obs_max = VectorXd::Constant(1, 1.0);
    st.act_min = VectorXd::Constant(1, lo);
    st.act_max = VectorXd::Constant(1, hi);
    st.kp_min = VectorXd::Constant(1, -1.0);
    st.kp_max = VectorXd::Constant(1, 1.0);
    st.fitted = true;
    return st;
}

namespace {

ToyEval summarize(std::vector<double> samples, const std::vector<double>& modes, double tol) {
    ToyEval ev;
    ev.mode_freq.assign(modes.size(), 0.0);
    int within = 0;
    for (double s : samples) {
        std::size_t best = 0;
        for (std::size_t m = 1; m < modes.size(); ++m)
            if (std::abs(s - modes[m]) < std::abs(s - modes[best])) best = m;
        ev.mode_freq[best] += 1.0;
        if (std::abs(s - modes[best]) < tol) ++within;
    }
    for (double& f : ev.mode_freq) f /= static_cast<double>(samples.size());
    ev.frac_within = static_cast<double>(within) / static_cast<double>(samples.size());
    ev.samples = std::move(samples);
    return ev;
}

}  // namespace

ToyEval toy_eval_sampler(rt::ChunkSampler& sampler, const std::vector<double>& modes,
                         int n_samples, uint64_t seed, double tol) {
    Rng rng(Rng::derive(seed, 21));
    std::deque<VectorXd> hist{VectorXd::Zero(1)};
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i)
        samples.push_back(sampler.sample(hist, nullptr, rng, nullptr)(0, 0));
    return summarize(std::move(samples), modes, tol);
}

ToyEval toy_eval_oracle(const std::vector<double>& modes, int n_samples, uint64_t seed,
                        double tol) {
    Rng rng(Rng::derive(seed, 22));
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i)
        samples.push_back(modes[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<long>(modes.size()) - 1))]);
    return summarize(std::move(samples), modes, tol);
}

}  // namespace bikc::pipe
