// bikc: demo generation, keypose extraction, training, evaluation and
// latency benchmarking for the bimanual simulator.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "bikc/checkpoint.hpp"
#include "bikc/json_util.hpp"
#include "bikc/pipeline.hpp"
#include "bikc/report.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace bikc;

namespace {

// Binds CLI flags to a JSON config file: flag values win when given on the
// command line, config values fill the rest, unknown config keys are
// rejected. The merged result is the effective config.
class Cfg {
public:
    explicit Cfg(CLI::App* cmd) : cmd_(cmd) {
        cmd->add_option("--config", config_path_, "JSON config file (flags override its values)");
    }

    template <typename T>
    CLI::Option* bind(const std::string& flag, T* var, const std::string& help) {
        CLI::Option* opt = cmd_->add_option(flag, *var, help);
        std::string key = flag.substr(flag.find_last_of('-') + 1);
        key = flag;
        while (!key.empty() && key.front() == '-') key.erase(key.begin());
        for (auto& c : key)
            if (c == '-') c = '_';
        entries_.push_back({key, opt,
                            [var](const ordered_json& j) { *var = j.get<T>(); },
                            [var](ordered_json& j, const std::string& k) { j[k] = *var; }});
        return opt;
    }

    ordered_json finalize(const std::string& command) {
        if (!config_path_.empty()) {
            std::ifstream in(config_path_);
            if (!in) throw ConfigError("config not found: " + config_path_);
            ordered_json file;
            try {
                in >> file;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config parse error in " + config_path_ + ": " + e.what());
            }
            for (const auto& [key, value] : file.items()) {
                bool known = false;
                for (auto& e : entries_) {
                    if (e.key != key) continue;
                    known = true;
                    if (e.opt->count() == 0) e.apply(value);  // flags override config
                }
                if (!known) throw ConfigError("unknown config key: " + key);
            }
        }
        ordered_json effective;
        for (auto& e : entries_) e.dump(effective, e.key);
        std::cout << "[" << command << "] effective config: " << effective.dump() << "\n";
        return effective;
    }

private:
    struct Entry {
        std::string key;
        CLI::Option* opt;
        std::function<void(const ordered_json&)> apply;
        std::function<void(ordered_json&, const std::string&)> dump;
    };
    CLI::App* cmd_;
    std::string config_path_;
    std::vector<Entry> entries_;
};

int env_threads() {
    const char* v = std::getenv("BIKC_THREADS");
    if (!v) return 1;
    int n = std::atoi(v);
    return n < 1 ? 1 : n;
}

kp::KeyposeRules rules_from(double delta, double stall, int debounce, double grip_dist,
                            double grip_height) {
    kp::KeyposeRules rules;
    rules.gripper_open_close_delta = delta;
    rules.stall_speed_thresh = stall;
    rules.debounce_ticks = debounce;
    rules.case_rules = {{"gripper_distance", grip_dist}, {"gripper_height", grip_height}};
    return rules;
}

void write_episodes_jsonl(const std::string& path, const rt::EvalResult& res) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write: " + path);
    for (const auto& ep : res.episodes) out << ep.to_json().dump() << "\n";
}

sim::TaskSpec task_with_overrides(const std::string& name, int episode_len, double belt_speed,
                                  int randomize) {
    sim::TaskSpec task = sim::make_task(name);
    if (episode_len > 0) task.episode_len = episode_len;
    if (belt_speed > 0) task.belt.speed = belt_speed;
    if (randomize >= 0) task.randomize = randomize != 0;
    return task;
}

cm::CtConfig ct_config(long iters, const std::vector<int>& hidden) {
    cm::CtConfig cfg;
    if (iters >= 0) cfg.total_iters = iters;
    if (!hidden.empty()) cfg.hidden = hidden;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale bimanual keypose + consistency policy toolkit"};
    app.require_subcommand(1);

    // --- demo-gen ---------------------------------------------------------
    auto* cmd_demo = app.add_subcommand("demo-gen", "generate scripted demonstrations");
    Cfg cfg_demo(cmd_demo);
    std::string dg_task = "transfer", dg_style = "auto", dg_out;
    int dg_n = 50, dg_len = -1, dg_randomize = -1;
    uint64_t dg_seed = 0;
    double dg_belt = -1;
    cfg_demo.bind("--task", &dg_task, "transfer|conveyor|pick-order");
    cfg_demo.bind("--n", &dg_n, "number of demonstrations");
    cfg_demo.bind("--seed", &dg_seed, "first seed");
    cfg_demo.bind("--style", &dg_style, "demo style; auto = default (mixed for pick-order)");
    cfg_demo.bind("--episode-len", &dg_len, "episode length override");
    cfg_demo.bind("--belt-speed", &dg_belt, "belt speed override");
    cfg_demo.bind("--randomize", &dg_randomize, "0 fixed layout, 1 randomized");
    cmd_demo->add_option("--out", dg_out, "output directory")->required();

    // --- keypose-extract --------------------------------------------------
    auto* cmd_kx = app.add_subcommand("keypose-extract", "detect and merge bimanual keyposes");
    Cfg cfg_kx(cmd_kx);
    std::string kx_data, kx_out;
    double kx_delta = 0.04, kx_stall = 0.004, kx_dist = 0.08, kx_height = 0.05;
    int kx_debounce = 5;
    cfg_kx.bind("--data", &kx_data, "demonstrations JSONL");
    cfg_kx.bind("--gripper-delta", &kx_delta, "aperture-change onset threshold");
    cfg_kx.bind("--stall-thresh", &kx_stall, "stall speed threshold");
    cfg_kx.bind("--debounce", &kx_debounce, "debounce window in ticks");
    cfg_kx.bind("--gripper-distance", &kx_dist, "inter-gripper distance rule threshold");
    cfg_kx.bind("--gripper-height", &kx_height, "gripper height rule threshold");
    cmd_kx->add_option("--out", kx_out, "output directory")->required();

    // --- train-keypose ----------------------------------------------------
    auto* cmd_tk = app.add_subcommand("train-keypose", "train the keypose predictor");
    Cfg cfg_tk(cmd_tk);
    std::string tk_data, tk_keyposes, tk_out;
    long tk_iters = 3000;
    uint64_t tk_seed = 0;
    cfg_tk.bind("--data", &tk_data, "demonstrations JSONL");
    cfg_tk.bind("--keyposes", &tk_keyposes, "keypose sidecar directory");
    cfg_tk.bind("--iters", &tk_iters, "training iterations");
    cfg_tk.bind("--seed", &tk_seed, "training seed");
    cmd_tk->add_option("--out", tk_out, "output directory")->required();

    // --- train-traj -------------------------------------------------------
    auto* cmd_tt = app.add_subcommand("train-traj", "train the trajectory generator");
    Cfg cfg_tt(cmd_tt);
    std::string tt_algo = "cm", tt_keypose = "on", tt_data, tt_keyposes, tt_out;
    long tt_iters = -1;
    int tt_eval_steps = 10;
    uint64_t tt_seed = 0;
    std::vector<int> tt_hidden;
    cfg_tt.bind("--algo", &tt_algo, "cm|ddpm");
    cfg_tt.bind("--keypose", &tt_keypose, "on|off: condition on target keyposes");
    cfg_tt.bind("--data", &tt_data, "demonstrations JSONL");
    cfg_tt.bind("--keyposes", &tt_keyposes, "keypose sidecar directory");
    cfg_tt.bind("--iters", &tt_iters, "training iterations (default 5000)");
    cfg_tt.bind("--eval-steps", &tt_eval_steps, "ddpm evaluation steps");
    cfg_tt.bind("--seed", &tt_seed, "training seed");
    cfg_tt.bind("--hidden", &tt_hidden, "hidden widths");
    cmd_tt->add_option("--out", tt_out, "output directory")->required();

    // --- eval ---------------------------------------------------------------
    auto* cmd_ev = app.add_subcommand("eval", "run seeded evaluation episodes");
    Cfg cfg_ev(cmd_ev);
    std::string ev_task = "transfer", ev_gen, ev_kp, ev_latency = "nfe-cost", ev_label, ev_out;
    int ev_episodes = 20, ev_len = -1, ev_randomize = -1, ev_no_early = 0;
    uint64_t ev_seed = 1000;
    double ev_cost = 0.0, ev_tick = 20.0, ev_belt = -1, ev_switch = 0.05;
    cfg_ev.bind("--task", &ev_task, "transfer|conveyor|pick-order");
    cfg_ev.bind("--gen", &ev_gen, "trajectory generator checkpoint");
    cfg_ev.bind("--keypose-ckpt", &ev_kp, "keypose predictor checkpoint (absent = CP ablation)");
    cfg_ev.bind("--episodes", &ev_episodes, "episode count");
    cfg_ev.bind("--seed", &ev_seed, "first episode seed");
    cfg_ev.bind("--latency-mode", &ev_latency, "nfe-cost|wallclock");
    cfg_ev.bind("--cost-per-nfe", &ev_cost, "ms charged per NFE in nfe-cost mode");
    cfg_ev.bind("--tick-ms", &ev_tick, "simulated tick duration in ms");
    cfg_ev.bind("--switch-threshold", &ev_switch, "keypose switch threshold (normalized)");
    cfg_ev.bind("--episode-len", &ev_len, "episode length override");
    cfg_ev.bind("--belt-speed", &ev_belt, "belt speed override");
    cfg_ev.bind("--randomize", &ev_randomize, "0 fixed layout, 1 randomized");
    cfg_ev.bind("--no-early-stop", &ev_no_early, "1 = run full episodes");
    cfg_ev.bind("--algo-label", &ev_label, "algo column value (defaults to generator kind)");
    cmd_ev->add_option("--out", ev_out, "output directory")->required();

    // --- bench-latency ------------------------------------------------------
    auto* cmd_bl = app.add_subcommand("bench-latency", "wall-clock and NFE comparison");
    Cfg cfg_bl(cmd_bl);
    std::string bl_task = "transfer", bl_cm, bl_ddpm, bl_out;
    int bl_calls = 50, bl_eval_steps = 10;
    uint64_t bl_seed = 0;
    cfg_bl.bind("--task", &bl_task, "task used to size the backbones");
    cfg_bl.bind("--calls", &bl_calls, "sampling calls per algorithm");
    cfg_bl.bind("--eval-steps", &bl_eval_steps, "ddpm evaluation steps");
    cfg_bl.bind("--cm", &bl_cm, "cm checkpoint (default: fresh init)");
    cfg_bl.bind("--ddpm", &bl_ddpm, "ddpm checkpoint (default: fresh init)");
    cfg_bl.bind("--seed", &bl_seed, "sampling seed");
    cmd_bl->add_option("--out", bl_out, "output directory")->required();

    // --- toy-train ----------------------------------------------------------
    auto* cmd_toy = app.add_subcommand("toy-train", "train on a 1-D multi-mode distribution");
    Cfg cfg_toy(cmd_toy);
    std::string toy_algo = "both", toy_out;
    std::vector<double> toy_modes{-0.5, 0.5};
    long toy_iters = 3000;
    int toy_samples = 1000, toy_eval_steps = 10;
    uint64_t toy_seed = 0;
    double toy_tol = 0.15, toy_lr = 1e-4;
    cfg_toy.bind("--algo", &toy_algo, "cm|ddpm|both");
    cfg_toy.bind("--modes", &toy_modes, "mode locations");
    cfg_toy.bind("--lr", &toy_lr, "initial learning rate");
    cfg_toy.bind("--iters", &toy_iters, "training iterations");
    cfg_toy.bind("--samples", &toy_samples, "evaluation sample count");
    cfg_toy.bind("--eval-steps", &toy_eval_steps, "ddpm evaluation steps");
    cfg_toy.bind("--tol", &toy_tol, "mode distance tolerance");
    cfg_toy.bind("--seed", &toy_seed, "training seed");
    cmd_toy->add_option("--out", toy_out, "output directory")->required();

    // --- emit-plot-data -----------------------------------------------------
    auto* cmd_pd = app.add_subcommand("emit-plot-data", "reshape metrics into tidy long CSV");
    Cfg cfg_pd(cmd_pd);
    std::string pd_metrics, pd_out;
    long pd_seed = 0;
    cfg_pd.bind("--metrics", &pd_metrics, "metrics CSV from eval");
    cfg_pd.bind("--seed", &pd_seed, "seed column value");
    cmd_pd->add_option("--out", pd_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);

        if (cmd_demo->parsed()) {
            ordered_json eff = cfg_demo.finalize("demo-gen");
            auto task = task_with_overrides(dg_task, dg_len, dg_belt, dg_randomize);
            std::string style = dg_style;
            if (style == "auto") style = task.demo_styles.size() > 1 ? "mixed" : "default";
            auto demos = pipe::generate_demos(task, dg_n, dg_seed, style);
            fs::create_directories(dg_out);
            data::save_trajs((fs::path(dg_out) / "demos.jsonl").string(), demos);
            report::write_manifest(dg_out, report::make_manifest("demo-gen", eff, dg_seed));
            std::cout << "wrote " << demos.size() << " demos to " << dg_out << "/demos.jsonl\n";
        } else if (cmd_kx->parsed()) {
            ordered_json eff = cfg_kx.finalize("keypose-extract");
            auto trajs = data::load_trajs(kx_data);
            auto rules = rules_from(kx_delta, kx_stall, kx_debounce, kx_dist, kx_height);
            fs::create_directories(kx_out);
            for (std::size_t i = 0; i < trajs.size(); ++i) {
                auto set = kp::extract_keyposes(trajs[i], rules);
                std::string id = trajs[i].task + "_" + std::to_string(trajs[i].seed);
                kp::save_keypose_set(
                    (fs::path(kx_out) / ("keyposes_" + std::to_string(i) + ".json")).string(), id,
                    set);
            }
            report::write_manifest(kx_out, report::make_manifest("keypose-extract", eff, 0));
            std::cout << "wrote " << trajs.size() << " keypose sidecars to " << kx_out << "\n";
        } else if (cmd_tk->parsed()) {
            ordered_json eff = cfg_tk.finalize("train-keypose");
            auto trajs = data::load_trajs(tk_data);
            std::vector<kp::KeyposeSet> sets;
            for (std::size_t i = 0; i < trajs.size(); ++i)
                sets.push_back(kp::load_keypose_set(
                    (fs::path(tk_keyposes) / ("keyposes_" + std::to_string(i) + ".json")).string()));
            auto tuples = kp::build_keypose_dataset(trajs, sets);
            auto stats = data::fit_norm(trajs);
            kp::PredictorConfig pcfg;
            pcfg.total_iters = tk_iters;
            auto res = kp::train_keypose_predictor(tuples, stats, pcfg, tk_seed);
            fs::create_directories(tk_out);
            kp::save_predictor((fs::path(tk_out) / "keypose.ckpt").string(), res.predictor);
            report::write_manifest(tk_out, report::make_manifest("train-keypose", eff, tk_seed));
            std::cout << "holdout_mse " << res.holdout_mse << "\n";
        } else if (cmd_tt->parsed()) {
            ordered_json eff = cfg_tt.finalize("train-traj");
            auto trajs = data::load_trajs(tt_data);
            std::vector<kp::KeyposeSet> sets;
            for (std::size_t i = 0; i < trajs.size(); ++i)
                sets.push_back(kp::load_keypose_set(
                    (fs::path(tt_keyposes) / ("keyposes_" + std::to_string(i) + ".json")).string()));
            bool use_kp = tt_keypose == "on";
            fs::create_directories(tt_out);
            if (tt_algo == "cm") {
                auto cfg = ct_config(tt_iters, tt_hidden);
                auto in = pipe::prepare_traj_training(trajs, sets, cfg.obs_horizon, cfg.chunk_len);
                auto res = cm::train_cm(in.dataset, in.stats, cfg, in.obs_dim, in.action_dim,
                                        in.keypose_dim, use_kp, tt_seed);
                if (res.aborted) std::cerr << "warning: training aborted, kept last good step\n";
                cm::save_cm((fs::path(tt_out) / "cm.ckpt").string(), res.policy);
                cm::write_loss_csv((fs::path(tt_out) / "loss.csv").string(), res.curve);
            } else if (tt_algo == "ddpm") {
                ddpm::DdpmConfig cfg;
                if (tt_iters >= 0) cfg.total_iters = tt_iters;
                if (!tt_hidden.empty()) cfg.hidden = tt_hidden;
                cfg.eval_steps = tt_eval_steps;
                auto in = pipe::prepare_traj_training(trajs, sets, cfg.obs_horizon, cfg.chunk_len);
                auto res = ddpm::train_ddpm(in.dataset, in.stats, cfg, in.obs_dim, in.action_dim,
                                            in.keypose_dim, use_kp, tt_seed);
                if (res.aborted) std::cerr << "warning: training aborted, kept last good step\n";
                ddpm::save_ddpm((fs::path(tt_out) / "ddpm.ckpt").string(), res.policy);
                cm::write_loss_csv((fs::path(tt_out) / "loss.csv").string(), res.curve);
            } else {
                throw ConfigError("unknown algo: " + tt_algo);
            }
            report::write_manifest(tt_out, report::make_manifest("train-traj", eff, tt_seed));
        } else if (cmd_ev->parsed()) {
            ordered_json eff = cfg_ev.finalize("eval");
            auto task = task_with_overrides(ev_task, ev_len, ev_belt, ev_randomize);
            rt::PolicyStack stack;
            stack.generator = pipe::load_generator(ev_gen);
            stack.switch_threshold = ev_switch;
            if (!ev_kp.empty())
                stack.predictor = std::make_shared<kp::KeyposePredictor>(kp::load_predictor(ev_kp));
            sim::LatencyModel lat;
            lat.mode = sim::latency_mode_from_name(ev_latency);
            lat.tick_ms = ev_tick;
            lat.cost_per_nfe_ms = ev_cost;
            rt::RunOptions opts;
            opts.early_stop = ev_no_early == 0;
            auto res = rt::evaluate(stack, task, ev_episodes, ev_seed, lat, env_threads(), opts);
            fs::create_directories(ev_out);
            std::string label = ev_label.empty() ? stack.generator->algo() : ev_label;
            rt::write_metrics_csv((fs::path(ev_out) / "metrics.csv").string(), ev_task, label, res);
            write_episodes_jsonl((fs::path(ev_out) / "episodes.jsonl").string(), res);
            report::write_manifest(ev_out, report::make_manifest("eval", eff, ev_seed));
            std::cout << "overall success rate " << res.overall_rate << " over " << ev_episodes
                      << " episodes\n";
        } else if (cmd_bl->parsed()) {
            ordered_json eff = cfg_bl.finalize("bench-latency");
            auto task = sim::make_task(bl_task);
            std::shared_ptr<rt::ChunkSampler> cm_gen, ddpm_gen;
            if (!bl_cm.empty()) {
                cm_gen = pipe::load_generator(bl_cm);
            } else {
                cm::CtConfig cfg;
                auto p = cm::cm_init(cfg, task.obs_dim(), sim::TaskSpec::kActionDim,
                                     sim::TaskSpec::kProprioDim, false, bl_seed);
                p.stats = pipe::toy_stats({-1.0, 1.0});
                data::NormStats st;
                st.obs_min = Eigen::VectorXd::Constant(task.obs_dim(), -1.0);
                st.obs_max = Eigen::VectorXd::Constant(task.obs_dim(), 1.0);
                st.act_min = Eigen::VectorXd::Constant(6, -1.0);
                st.act_max = Eigen::VectorXd::Constant(6, 1.0);
                st.kp_min = Eigen::VectorXd::Constant(6, -1.0);
                st.kp_max = Eigen::VectorXd::Constant(6, 1.0);
                st.fitted = true;
                p.stats = st;
                cm_gen = std::make_shared<rt::CmSampler>(std::move(p));
            }
            if (!bl_ddpm.empty()) {
                ddpm_gen = pipe::load_generator(bl_ddpm);
            } else {
                ddpm::DdpmConfig cfg;
                cfg.eval_steps = bl_eval_steps;
                auto p = ddpm::ddpm_init(cfg, task.obs_dim(), sim::TaskSpec::kActionDim,
                                         sim::TaskSpec::kProprioDim, false, bl_seed);
                data::NormStats st;
                st.obs_min = Eigen::VectorXd::Constant(task.obs_dim(), -1.0);
                st.obs_max = Eigen::VectorXd::Constant(task.obs_dim(), 1.0);
                st.act_min = Eigen::VectorXd::Constant(6, -1.0);
                st.act_max = Eigen::VectorXd::Constant(6, 1.0);
                st.kp_min = Eigen::VectorXd::Constant(6, -1.0);
                st.kp_max = Eigen::VectorXd::Constant(6, 1.0);
                st.fitted = true;
                p.stats = st;
                ddpm_gen = std::make_shared<rt::DdpmSampler>(std::move(p));
            }

            sim::Sim env(task);
            env.reset(bl_seed);
            std::deque<Eigen::VectorXd> hist{env.observe()};
            Rng rng(Rng::derive(bl_seed, 31));

            struct Row {
                std::string algo;
                int call;
                long nfe;
                double ms;
            };
            std::vector<Row> rows;
            auto bench = [&](rt::ChunkSampler& gen, const std::string& label) {
                long total = 0;
                for (int c = 0; c < bl_calls; ++c) {
                    long nfe = 0;
                    auto t0 = std::chrono::steady_clock::now();
                    gen.sample(hist, nullptr, rng, &nfe);
                    double ms = std::chrono::duration<double, std::milli>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count();
                    rows.push_back({label, c, nfe, ms});
                    total += nfe;
                }
                return total;
            };
            long cm_total = bench(*cm_gen, "cm");
            long ddpm_total = bench(*ddpm_gen, "ddpm");
            double nfe_ratio = static_cast<double>(ddpm_total) / static_cast<double>(cm_total);

            fs::create_directories(bl_out);
            std::ofstream out(fs::path(bl_out) / "bench.csv");
            out << "algo,call,nfe,wall_ms,nfe_ratio\n";
            for (const auto& r : rows)
                out << r.algo << "," << r.call << "," << r.nfe << "," << r.ms << "," << nfe_ratio
                    << "\n";
            report::write_manifest(bl_out, report::make_manifest("bench-latency", eff, bl_seed));
            std::cout << "nfe_ratio " << nfe_ratio << "\n";
        } else if (cmd_toy->parsed()) {
            ordered_json eff = cfg_toy.finalize("toy-train");
            fs::create_directories(toy_out);
            auto dataset = pipe::toy_dataset(toy_modes, 512);
            auto stats = pipe::toy_stats(toy_modes);
            ordered_json summary;
            std::ofstream samples_csv(fs::path(toy_out) / "samples.csv");
            samples_csv << "algo,index,value\n";

            auto dump_eval = [&](const std::string& label, const pipe::ToyEval& ev) {
                ordered_json j;
                j["mode_freq"] = ev.mode_freq;
                j["frac_within_tol"] = ev.frac_within;
                summary[label] = j;
                for (std::size_t i = 0; i < ev.samples.size(); ++i)
                    samples_csv << label << "," << i << "," << ev.samples[i] << "\n";
            };

            dump_eval("oracle", pipe::toy_eval_oracle(toy_modes, toy_samples, toy_seed, toy_tol));

            if (toy_algo == "cm" || toy_algo == "both") {
                cm::CtConfig cfg;
                cfg.action_horizon = 1;
                cfg.chunk_len = 1;
                cfg.total_iters = toy_iters;
                cfg.hidden = {128, 128};
                cfg.lr0 = toy_lr;
                auto res = cm::train_cm(dataset, stats, cfg, 1, 1, 1, false, toy_seed);
                cm::save_cm((fs::path(toy_out) / "cm.ckpt").string(), res.policy);
                cm::write_loss_csv((fs::path(toy_out) / "cm_loss.csv").string(), res.curve);
                rt::CmSampler sampler(std::move(res.policy));
                dump_eval("cm", pipe::toy_eval_sampler(sampler, toy_modes, toy_samples,
                                                       toy_seed + 1, toy_tol));
            }
            if (toy_algo == "ddpm" || toy_algo == "both") {
                ddpm::DdpmConfig cfg;
                cfg.action_horizon = 1;
                cfg.chunk_len = 1;
                cfg.total_iters = toy_iters;
                cfg.hidden = {256, 256};
                cfg.lr0 = toy_lr;
                cfg.eval_steps = toy_eval_steps;
                auto res = ddpm::train_ddpm(dataset, stats, cfg, 1, 1, 1, false, toy_seed);
                ddpm::save_ddpm((fs::path(toy_out) / "ddpm.ckpt").string(), res.policy);
                cm::write_loss_csv((fs::path(toy_out) / "ddpm_loss.csv").string(), res.curve);
                rt::DdpmSampler sampler(std::move(res.policy));
                dump_eval("ddpm", pipe::toy_eval_sampler(sampler, toy_modes, toy_samples,
                                                         toy_seed + 1, toy_tol));
            }
            std::ofstream summary_out(fs::path(toy_out) / "summary.json");
            summary_out << summary.dump(2) << "\n";
            report::write_manifest(toy_out, report::make_manifest("toy-train", eff, toy_seed));
            std::cout << "toy summary: " << summary.dump() << "\n";
        } else if (cmd_pd->parsed()) {
            ordered_json eff = cfg_pd.finalize("emit-plot-data");
            report::emit_plot_data(pd_metrics, pd_out, pd_seed);
            std::cout << "wrote " << pd_out << "\n";
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const NumericalError& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
