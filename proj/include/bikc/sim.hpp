#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "bikc/data.hpp"

namespace bikc::sim {

using data::Trajectory;
using Eigen::Vector2d;
using Eigen::VectorXd;

// A seed whose scripted demonstration failed to complete every stage.
struct GenerationError : ContractError {
    explicit GenerationError(const std::string& msg) : ContractError(msg) {}
};

enum class Attachment { Table = 0, Left = 1, Right = 2, Belt = 3 };

struct SimObject {
    Vector2d pos;
    Attachment att = Attachment::Table;
};

struct ArmState {
    Vector2d ee;
    double aperture = 1.0;  // 1 open, 0 closed
};

// Planar side-view world: x runs along the desk, y is height above it.
struct WorldState {
    ArmState left, right;
    std::vector<SimObject> objects;
    double belt_speed = 0.0;
    long tick = 0;
};

struct SimParams {
    double arm_speed_cap = 0.02;       // units per tick
    double aperture_rate = 0.25;       // aperture change per tick
    double grasp_radius = 0.04;
    double grasp_close_thresh = 0.4;   // closing below this can grasp
    double release_open_thresh = 0.6;  // opening past this releases
};

struct BeltConfig {
    bool present = false;
    double y = 0.2;
    double x0 = 0.25;
    double x1 = 0.95;
    double speed = 0.0032;   // units per tick; ~25-tick catch window
    double snap_tol = 0.03;  // released within this of the belt line rides it
};

struct StageDef {
    std::string name;
    std::function<bool(const WorldState&)> predicate;
};

struct ObjectRange {  // x_lo, x_hi, y_lo, y_hi
    double x_lo, x_hi, y_lo, y_hi;
};

struct TaskSpec {
    std::string name;
    int episode_len = 400;
    std::vector<StageDef> stages;
    std::vector<ObjectRange> object_ranges;
    Vector2d left_home, right_home;
    BeltConfig belt;
    SimParams params;
    std::vector<std::string> demo_styles{"default"};
    bool randomize = true;  // fixed layout uses range midpoints

    int n_objects() const { return static_cast<int>(object_ranges.size()); }
    int obs_dim() const { return 6 + 6 * n_objects(); }
    static constexpr int kProprioDim = 6;
    static constexpr int kActionDim = 6;
};

// name: "transfer" | "conveyor" | "pick-order"
TaskSpec make_task(const std::string& name);

VectorXd observe(const WorldState& state);
VectorXd proprio_of(const WorldState& state);

class Sim {
public:
    explicit Sim(TaskSpec spec);

    WorldState& reset(uint64_t seed);
    // action: target (x, y, aperture) for left then right
    void step(const VectorXd& action);

    const WorldState& state() const { return state_; }
    WorldState& mutable_state() { return state_; }
    const TaskSpec& spec() const { return spec_; }
    VectorXd observe() const { return sim::observe(state_); }
    VectorXd proprio() const { return proprio_of(state_); }

    long latch_tick(std::size_t stage) const { return latch_ticks_[stage]; }
    bool stage_latched(std::size_t stage) const { return latch_ticks_[stage] >= 0; }
    bool all_latched() const;
    const std::string& first_close_arm() const { return first_close_arm_; }

private:
    void latch_stages();

    TaskSpec spec_;
    WorldState state_;
    std::vector<long> latch_ticks_;
    std::string first_close_arm_;
};

// Scripted demonstrator; the returned trajectory replays open-loop and the
// event map carries ground-truth keypose ticks. Throws GenerationError when
// a randomized layout defeats the script.
Trajectory scripted_demo(const TaskSpec& spec, uint64_t seed, const std::string& style);

struct LatencyModel {
    enum class Mode { Wallclock, NfeCost };
    Mode mode = Mode::NfeCost;
    double tick_ms = 20.0;  // 50 Hz
    double cost_per_nfe_ms = 0.0;
};

LatencyModel::Mode latency_mode_from_name(const std::string& name);

// Ticks consumed by one inference; the world keeps advancing under the
// previous action while they elapse.
long charge_latency(const LatencyModel& model, double measured_ms, long nfe);

}  // namespace bikc::sim
