#include "bikc/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

namespace bikc::rt {

nlohmann::ordered_json EpisodeReport::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    nlohmann::ordered_json st = nlohmann::ordered_json::array();
    for (const auto& s : stages)
        st.push_back({{"name", s.name}, {"success", s.success}, {"latch_tick", s.latch_tick}});
    j["stages"] = st;
    j["success"] = success;
    j["nfe_total"] = nfe_total;
    j["inference_calls"] = inference_calls;
    j["sim_ticks"] = sim_ticks;
    j["control_ticks"] = control_ticks;
    j["charged_ticks"] = charged_ticks;
    j["wall_ms"] = wall_ms;
    j["keypose_switches"] = keypose_switches;
    j["first_close_arm"] = first_close_arm;
    return j;
}

namespace {

double masked_linf(const VectorXd& a, const VectorXd& b, const std::vector<int>& mask) {
    if (mask.empty()) return (a - b).cwiseAbs().maxCoeff();
    double m = 0.0;
    for (int i : mask) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

EpisodeReport run_episode(const PolicyStack& stack, const sim::TaskSpec& task,
                          uint64_t seed, const sim::LatencyModel& latency,
                          const RunOptions& opts) {
    if (!stack.generator) throw ConfigError("run_episode: policy stack has no generator");
    if (!stack.predictor && stack.generator->needs_keypose())
        throw ConfigError("run_episode: generator conditions on keyposes but no predictor is present");

    sim::Sim env(task);
    env.reset(seed);
    Rng rng(Rng::derive(seed, 7));

    EpisodeReport rep;
    rep.seed = seed;
    std::deque<VectorXd> obs_hist;
    obs_hist.push_back(env.observe());

    VectorXd k_target = env.proprio();
    VectorXd prev_action = env.proprio();  // holding still until the first chunk
    const int horizon = stack.generator->action_horizon();
    MatrixXd chunk;
    int chunk_pos = horizon;
    bool hold = false;
    int terminal_streak = 0;

    auto done = [&]() {
        return env.state().tick >= task.episode_len || (opts.early_stop && env.all_latched());
    };

    while (!done()) {
        VectorXd q = env.proprio();
        if (stack.predictor && !hold) {
            const auto& stats = stack.predictor->stats;
            VectorXd qn = data::normalize(stats, q, "keypose");
            VectorXd kn = data::normalize(stats, k_target, "keypose");
            if (masked_linf(qn, kn, stack.deviation_mask) < stack.switch_threshold) {
                VectorXd k_new = kp::predict_next_keypose(*stack.predictor, obs_hist.back(), k_target);
                rep.keypose_switches += 1;
                VectorXd kn_new = data::normalize(stats, k_new, "keypose");
                if (masked_linf(kn_new, qn, stack.deviation_mask) < stack.switch_threshold)
                    terminal_streak += 1;
                else
                    terminal_streak = 0;
                k_target = k_new;
                if (terminal_streak >= 2) hold = true;  // terminal keypose reached
            }
        }

        VectorXd action;
        if (hold) {
            action = q;
        } else {
            if (chunk_pos >= horizon) {
                auto t0 = std::chrono::steady_clock::now();
                long call_nfe = 0;
                chunk = stack.generator->sample(obs_hist, stack.predictor ? &k_target : nullptr,
                                                rng, &call_nfe);
                double ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
                rep.inference_calls += 1;
                rep.nfe_total += call_nfe;
                rep.wall_ms.push_back(ms);
                long charge = sim::charge_latency(latency, ms, call_nfe);
                while (charge-- > 0 && env.state().tick < task.episode_len) {
                    env.step(prev_action);  // world advances while we "think"
                    obs_hist.push_back(env.observe());
                    rep.charged_ticks += 1;
                }
                chunk_pos = 0;
                if (done()) break;
            }
            action = chunk.row(chunk_pos++).transpose();
        }
        env.step(action);
        prev_action = action;
        obs_hist.push_back(env.observe());
        rep.control_ticks += 1;
    }

    rep.sim_ticks = env.state().tick;
    rep.first_close_arm = env.first_close_arm();
    bool all = true;
    for (std::size_t i = 0; i < task.stages.size(); ++i) {
        StageResult sr;
        sr.name = task.stages[i].name;
        sr.success = env.stage_latched(i);
        sr.latch_tick = env.latch_tick(i);
        all = all && sr.success;
        rep.stages.push_back(std::move(sr));
    }
    rep.success = all;
    return rep;
}

EvalResult aggregate_reports(std::vector<EpisodeReport> episodes,
                             const std::vector<std::string>& stage_names) {
    if (episodes.empty()) throw ContractError("aggregate_reports: no episodes");
    EvalResult res;
    res.episodes = std::move(episodes);
    int n_episodes = static_cast<int>(res.episodes.size());

    long prev_successes = n_episodes;
    for (std::size_t s = 0; s < stage_names.size(); ++s) {
        StageAggregate agg;
        agg.name = stage_names[s];
        agg.attempts = prev_successes;
        for (const auto& ep : res.episodes) {
            bool pipeline = true;
            for (std::size_t j = 0; j <= s; ++j) pipeline = pipeline && ep.stages[j].success;
            if (pipeline) agg.successes += 1;
        }
        if (agg.attempts > 0)
            agg.rate = static_cast<double>(agg.successes) / static_cast<double>(agg.attempts);
        prev_successes = agg.successes;
        res.stages.push_back(agg);
    }
    res.overall_rate = stage_names.empty() ? 0.0
                                           : static_cast<double>(res.stages.back().successes) /
                                                 static_cast<double>(n_episodes);

    double nfe_acc = 0.0, dur_acc = 0.0;
    std::vector<double> all_ms;
    for (const auto& ep : res.episodes) {
        nfe_acc += static_cast<double>(ep.nfe_total);
        dur_acc += static_cast<double>(ep.sim_ticks);
        all_ms.insert(all_ms.end(), ep.wall_ms.begin(), ep.wall_ms.end());
    }
    res.nfe_mean = nfe_acc / n_episodes;
    res.duration_ticks_mean = dur_acc / n_episodes;
    if (!all_ms.empty()) {
        std::sort(all_ms.begin(), all_ms.end());
        res.latency_ms_p50 = all_ms[all_ms.size() / 2];
    }
    return res;
}

EvalResult evaluate(const PolicyStack& stack, const sim::TaskSpec& task, int n_episodes,
                    uint64_t seed0, const sim::LatencyModel& latency, int threads,
                    const RunOptions& opts) {
    if (n_episodes < 1) throw ContractError("evaluate: n_episodes must be >= 1");
    std::vector<EpisodeReport> episodes(static_cast<std::size_t>(n_episodes));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n_episodes) return;
            episodes[static_cast<std::size_t>(i)] =
                run_episode(stack, task, seed0 + static_cast<uint64_t>(i), latency, opts);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<std::string> names;
    for (const auto& s : task.stages) names.push_back(s.name);
    return aggregate_reports(std::move(episodes), names);
}

void write_metrics_csv(const std::string& path, const std::string& task,
                       const std::string& algo, const EvalResult& result) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write: " + path);
    out << "task,algo,stage,attempts,successes,rate,nfe_mean,latency_ms_p50,duration_ticks_mean\n";
    char buf[256];
    auto row = [&](const std::string& stage, long attempts, long successes,
                   const std::optional<double>& rate) {
        std::string rate_s;
        if (rate) {
            std::snprintf(buf, sizeof(buf), "%.17g", *rate);
            rate_s = buf;
        }
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%ld,%ld,%s,%.17g,%.6g,%.17g\n", task.c_str(),
                      algo.c_str(), stage.c_str(), attempts, successes, rate_s.c_str(),
                      result.nfe_mean, result.latency_ms_p50, result.duration_ticks_mean);
        out << buf;
    };
    for (const auto& s : result.stages) row(s.name, s.attempts, s.successes, s.rate);
    row("overall", static_cast<long>(result.episodes.size()),
        result.stages.empty() ? 0 : result.stages.back().successes, result.overall_rate);
}

}  // namespace bikc::rt
