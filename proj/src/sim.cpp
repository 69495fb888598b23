#include "bikc/sim.hpp"

#include <cmath>

namespace bikc::sim {

namespace {

bool attached_to(const WorldState& s, std::size_t obj, Attachment who) {
    return s.objects[obj].att == who;
}

double dist(const Vector2d& a, const Vector2d& b) { return (a - b).norm(); }

}  // namespace

TaskSpec make_task(const std::string& name) {
    TaskSpec t;
    t.name = name;
    if (name == "transfer") {
        // one cube: right arm picks it, lifts, hands it to the left arm
        t.object_ranges = {{0.55, 0.75, 0.15, 0.15}};
        t.left_home = {0.25, 0.6};
        t.right_home = {0.75, 0.6};
        t.stages = {
            {"grasp", [](const WorldState& s) { return attached_to(s, 0, Attachment::Right); }},
            {"lift",
             [](const WorldState& s) {
                 return attached_to(s, 0, Attachment::Right) && s.objects[0].pos.y() >= 0.35;
             }},
            {"handover", [](const WorldState& s) { return attached_to(s, 0, Attachment::Left); }},
        };
    } else if (name == "conveyor") {
        // left places the bag on the moving belt; right catches it downstream
        t.object_ranges = {{0.10, 0.18, 0.45, 0.45}};
        t.left_home = {0.15, 0.6};
        t.right_home = {0.7, 0.35};
        t.belt.present = true;
        t.stages = {
            {"put", [](const WorldState& s) { return attached_to(s, 0, Attachment::Belt); }},
            {"pick", [](const WorldState& s) { return attached_to(s, 0, Attachment::Right); }},
        };
    } else if (name == "pick-order") {
        // sleeve (object 0, left side) and cup (object 1, right side); fixed
        // layout so both demonstrated orders stay observationally identical
        t.object_ranges = {{0.3, 0.3, 0.15, 0.15}, {0.7, 0.7, 0.15, 0.15}};
        t.left_home = {0.25, 0.5};
        t.right_home = {0.75, 0.5};
        t.randomize = false;
        t.demo_styles = {"left-first", "right-first"};
        t.stages = {
            {"grasp_first",
             [](const WorldState& s) {
                 for (const auto& o : s.objects)
                     if (o.att == Attachment::Left || o.att == Attachment::Right) return true;
                 return false;
             }},
            {"grasp_both",
             [](const WorldState& s) {
                 return attached_to(s, 0, Attachment::Left) && attached_to(s, 1, Attachment::Right);
             }},
            {"insert",
             [](const WorldState& s) {
                 return attached_to(s, 0, Attachment::Left) && attached_to(s, 1, Attachment::Right) &&
                        dist(s.objects[0].pos, s.objects[1].pos) < 0.05;
             }},
        };
    } else {
        throw ConfigError("unknown task: " + name);
    }
    return t;
}

VectorXd observe(const WorldState& state) {
    VectorXd obs(6 + 6 * static_cast<int>(state.objects.size()));
    obs[0] = state.left.ee.x();
    obs[1] = state.left.ee.y();
    obs[2] = state.left.aperture;
    obs[3] = state.right.ee.x();
    obs[4] = state.right.ee.y();
    obs[5] = state.right.aperture;
    int k = 6;
    for (const auto& o : state.objects) {
        obs[k++] = o.pos.x();
        obs[k++] = o.pos.y();
        for (int a = 0; a < 4; ++a) obs[k++] = static_cast<int>(o.att) == a ? 1.0 : 0.0;
    }
    return obs;
}

VectorXd proprio_of(const WorldState& state) {
    return observe(state).head(TaskSpec::kProprioDim);
}

Sim::Sim(TaskSpec spec) : spec_(std::move(spec)) {
    latch_ticks_.assign(spec_.stages.size(), -1);
}

WorldState& Sim::reset(uint64_t seed) {
    Rng rng(Rng::derive(seed, 101));
    state_ = WorldState{};
    state_.left.ee = spec_.left_home;
    state_.right.ee = spec_.right_home;
    state_.left.aperture = 1.0;
    state_.right.aperture = 1.0;
    state_.belt_speed = spec_.belt.present ? spec_.belt.speed : 0.0;
    for (const auto& r : spec_.object_ranges) {
        SimObject o;
        if (spec_.randomize) {
            o.pos = {rng.uniform(r.x_lo, r.x_hi), rng.uniform(r.y_lo, r.y_hi)};
        } else {
            o.pos = {0.5 * (r.x_lo + r.x_hi), 0.5 * (r.y_lo + r.y_hi)};
        }
        state_.objects.push_back(o);
    }
    latch_ticks_.assign(spec_.stages.size(), -1);
    first_close_arm_.clear();
    latch_stages();
    return state_;
}

namespace {

void move_arm(ArmState& arm, double tx, double ty, double target_ap, const SimParams& p) {
    // workspace is the unit square
    Vector2d target(std::clamp(tx, 0.0, 1.0), std::clamp(ty, 0.0, 1.0));
    Vector2d d = target - arm.ee;
    double n = d.norm();
    arm.ee = n <= p.arm_speed_cap ? target : Vector2d(arm.ee + (p.arm_speed_cap / n) * d);

    double ap = std::clamp(target_ap, 0.0, 1.0);
    double da = ap - arm.aperture;
    if (std::abs(da) > p.aperture_rate) da = da > 0 ? p.aperture_rate : -p.aperture_rate;
    arm.aperture = std::clamp(arm.aperture + da, 0.0, 1.0);
}

}  // namespace

void Sim::step(const VectorXd& action) {
    if (action.size() != TaskSpec::kActionDim)
        throw ContractError("sim step: action must have 6 elements");
    if (!action.allFinite()) throw ContractError("sim step: non-finite action");
    const SimParams& p = spec_.params;

    double old_left_ap = state_.left.aperture;
    double old_right_ap = state_.right.aperture;
    move_arm(state_.left, action[0], action[1], action[2], p);
    move_arm(state_.right, action[3], action[4], action[5], p);

    // attached objects track their holder exactly
    for (auto& o : state_.objects) {
        if (o.att == Attachment::Left) o.pos = state_.left.ee;
        if (o.att == Attachment::Right) o.pos = state_.right.ee;
    }
    // belt advances its riders; past the end they drop off
    for (auto& o : state_.objects) {
        if (o.att != Attachment::Belt) continue;
        o.pos.x() += state_.belt_speed;
        if (o.pos.x() > spec_.belt.x1) o.att = Attachment::Table;
    }

    auto release = [&](ArmState& arm, double old_ap, Attachment who) {
        if (arm.aperture < p.release_open_thresh || arm.aperture <= old_ap) return;
        for (auto& o : state_.objects) {
            if (o.att != who) continue;
            bool on_belt = spec_.belt.present && std::abs(o.pos.y() - spec_.belt.y) <= spec_.belt.snap_tol &&
                           o.pos.x() >= spec_.belt.x0 && o.pos.x() <= spec_.belt.x1;
            o.att = on_belt ? Attachment::Belt : Attachment::Table;
        }
    };
    release(state_.left, old_left_ap, Attachment::Left);
    release(state_.right, old_right_ap, Attachment::Right);

    auto grasp = [&](ArmState& arm, double old_ap, Attachment who, const char* arm_name) {
        if (arm.aperture > p.grasp_close_thresh || arm.aperture >= old_ap - 1e-12) return;
        for (const auto& o : state_.objects)
            if (o.att == who) return;  // one object per gripper
        SimObject* best = nullptr;
        double best_d = p.grasp_radius;
        for (auto& o : state_.objects) {
            if (o.att != Attachment::Table && o.att != Attachment::Belt) continue;
            double d = dist(o.pos, arm.ee);
            if (d <= best_d) {
                best_d = d;
                best = &o;
            }
        }
        if (best) {
            best->att = who;
            best->pos = arm.ee;
            if (first_close_arm_.empty()) first_close_arm_ = arm_name;
        }
    };
    grasp(state_.left, old_left_ap, Attachment::Left, "left");
    grasp(state_.right, old_right_ap, Attachment::Right, "right");

    state_.tick += 1;
    latch_stages();
}

void Sim::latch_stages() {
    for (std::size_t i = 0; i < spec_.stages.size(); ++i)
        if (latch_ticks_[i] < 0 && spec_.stages[i].predicate(state_))
            latch_ticks_[i] = state_.tick;
}

bool Sim::all_latched() const {
    for (long t : latch_ticks_)
        if (t < 0) return false;
    return true;
}

// ---------------------------------------------------------------------------
// scripted demonstrators

namespace {

struct Targets {
    Vector2d left, right;
    double left_ap, right_ap;
};

VectorXd to_action(const Targets& t) {
    VectorXd a(6);
    a << t.left.x(), t.left.y(), t.left_ap, t.right.x(), t.right.y(), t.right_ap;
    return a;
}

struct Phase {
    std::string event;  // recorded at the tick this phase first acts
    std::function<Targets(const WorldState&)> act;
    std::function<bool(const WorldState&, int)> done;  // state, ticks in phase
};

bool near(const Vector2d& a, const Vector2d& b, double tol = 1e-6) {
    return (a - b).norm() <= tol;
}

// settle in place; separates arrival stalls from gripper actuation so each
// produces its own keypose
Phase dwell(int ticks) {
    return {"",
            [](const WorldState& s) {
                return Targets{s.left.ee, s.right.ee, s.left.aperture, s.right.aperture};
            },
            [ticks](const WorldState&, int in_phase) { return in_phase >= ticks; }};
}

Trajectory run_script(const TaskSpec& spec, uint64_t seed, const std::string& style,
                      const std::vector<Phase>& phases) {
    Sim env(spec);
    env.reset(seed);

    Trajectory tr;
    tr.task = spec.name;
    tr.seed = seed;
    tr.proprio_dim = TaskSpec::kProprioDim;

    std::size_t phase = 0;
    int in_phase = 0;
    for (int t = 0; t < spec.episode_len; ++t) {
        while (phase < phases.size() && phases[phase].done(env.state(), in_phase)) {
            ++phase;
            in_phase = 0;
        }
        VectorXd action;
        if (phase < phases.size()) {
            if (in_phase == 0 && !phases[phase].event.empty())
                tr.events[phases[phase].event] = t;
            ++in_phase;
            action = to_action(phases[phase].act(env.state()));
        } else {
            action = env.proprio();  // hold the final pose
        }
        tr.obs.push_back(env.observe());
        tr.actions.push_back(action);
        env.step(action);
    }
    if (!env.all_latched())
        throw GenerationError("scripted demo failed: task " + spec.name + " style " + style +
                              " seed " + std::to_string(seed));
    return tr;
}

std::vector<Phase> transfer_phases(const TaskSpec& spec) {
    Vector2d lh = spec.left_home, rh = spec.right_home;
    auto cube = [](const WorldState& s) { return s.objects[0].pos; };
    Vector2d handover(0.52, 0.45);
    Vector2d left_meet(0.49, 0.45);
    return {
        {"", [=](const WorldState& s) { return Targets{lh, cube(s), 1.0, 1.0}; },
         [=](const WorldState& s, int) { return near(s.right.ee, cube(s), 1e-9); }},
        dwell(6),
        {"right_grasp_close", [=](const WorldState& s) { return Targets{lh, s.right.ee, 1.0, 0.0}; },
         [](const WorldState& s, int) { return s.objects[0].att == Attachment::Right; }},
        {"", [=](const WorldState& s) { return Targets{lh, {s.right.ee.x(), 0.45}, 1.0, 0.0}; },
         [](const WorldState& s, int) { return s.right.ee.y() >= 0.45 - 1e-9; }},
        {"", [=](const WorldState&) { return Targets{left_meet, handover, 1.0, 0.0}; },
         [=](const WorldState& s, int) { return near(s.right.ee, handover) && near(s.left.ee, left_meet); }},
        dwell(8),
        {"handover_open", [=](const WorldState&) { return Targets{left_meet, handover, 1.0, 1.0}; },
         [](const WorldState& s, int) { return s.objects[0].att == Attachment::Table && s.right.aperture >= 0.9; }},
        dwell(6),
        {"left_grasp_close", [=](const WorldState&) { return Targets{left_meet, handover, 0.0, 1.0}; },
         [](const WorldState& s, int) { return s.objects[0].att == Attachment::Left; }},
        {"", [=](const WorldState&) { return Targets{{0.3, 0.45}, rh, 0.0, 1.0}; },
         [=](const WorldState& s, int) { return near(s.left.ee, {0.3, 0.45}) && near(s.right.ee, rh); }},
    };
}

std::vector<Phase> conveyor_phases(const TaskSpec& spec) {
    Vector2d lh = spec.left_home;
    Vector2d drop(0.3, spec.belt.y);
    Vector2d catch_pt(0.7, spec.belt.y);
    Vector2d lift(0.7, 0.4);
    const double close_offset = 0.01;  // grasp slightly past the hover point
    auto bag = [](const WorldState& s) { return s.objects[0].pos; };
    return {
        {"", [=](const WorldState& s) { return Targets{bag(s), catch_pt, 1.0, 1.0}; },
         [=](const WorldState& s, int) { return near(s.left.ee, bag(s), 1e-9); }},
        dwell(6),
        {"left_pick_close", [=](const WorldState& s) { return Targets{s.left.ee, catch_pt, 0.0, 1.0}; },
         [](const WorldState& s, int) { return s.objects[0].att == Attachment::Left; }},
        {"", [=](const WorldState&) { return Targets{drop, catch_pt, 0.0, 1.0}; },
         [=](const WorldState& s, int) { return near(s.left.ee, drop); }},
        dwell(6),
        {"belt_drop_open", [=](const WorldState&) { return Targets{drop, catch_pt, 1.0, 1.0}; },
         [](const WorldState& s, int) { return s.objects[0].att == Attachment::Belt; }},
        {"", [=](const WorldState&) { return Targets{lh, catch_pt, 1.0, 1.0}; },
         [=](const WorldState& s, int) {
             return s.objects[0].att == Attachment::Belt && near(s.right.ee, catch_pt) &&
                    s.objects[0].pos.x() >= catch_pt.x() + close_offset;
         }},
        {"right_catch_close", [=](const WorldState&) { return Targets{lh, catch_pt, 1.0, 0.0}; },
         [](const WorldState& s, int) { return s.objects[0].att == Attachment::Right; }},
        {"", [=](const WorldState&) { return Targets{lh, lift, 1.0, 0.0}; },
         [=](const WorldState& s, int) { return near(s.right.ee, lift); }},
    };
}

std::vector<Phase> pick_order_phases(const TaskSpec& spec, bool left_first) {
    Vector2d lh = spec.left_home, rh = spec.right_home;
    Vector2d sleeve_lift(0.42, 0.4);
    Vector2d cup_lift(0.58, 0.4);
    Vector2d insert_pt(0.46, 0.41);
    auto sleeve = [](const WorldState& s) { return s.objects[0].pos; };
    auto cup = [](const WorldState& s) { return s.objects[1].pos; };

    Phase left_reach{"", [=](const WorldState& s) { return Targets{sleeve(s), rh, 1.0, s.right.aperture}; },
                     [=](const WorldState& s, int) { return near(s.left.ee, sleeve(s), 1e-9); }};
    Phase left_close{"left_pick_close",
                     [=](const WorldState& s) { return Targets{s.left.ee, rh, 0.0, s.right.aperture}; },
                     [](const WorldState& s, int) { return s.objects[0].att == Attachment::Left; }};
    Phase left_lift{"", [=](const WorldState& s) { return Targets{sleeve_lift, rh, 0.0, s.right.aperture}; },
                    [=](const WorldState& s, int) { return near(s.left.ee, sleeve_lift); }};
    Phase right_reach{"", [=](const WorldState& s) { return Targets{s.left.ee, cup(s), s.left.aperture, 1.0}; },
                      [=](const WorldState& s, int) { return near(s.right.ee, cup(s), 1e-9); }};
    Phase right_close{"right_pick_close",
                      [=](const WorldState& s) { return Targets{s.left.ee, s.right.ee, s.left.aperture, 0.0}; },
                      [](const WorldState& s, int) { return s.objects[1].att == Attachment::Right; }};
    Phase right_lift{"", [=](const WorldState& s) { return Targets{s.left.ee, cup_lift, s.left.aperture, 0.0}; },
                     [=](const WorldState& s, int) { return near(s.right.ee, cup_lift); }};
    Phase insert{"", [=](const WorldState& s) { return Targets{sleeve_lift, insert_pt, 0.0, 0.0}; },
                 [=](const WorldState& s, int) {
                     return s.objects[0].att == Attachment::Left && s.objects[1].att == Attachment::Right &&
                            (s.objects[0].pos - s.objects[1].pos).norm() < 0.05;
                 }};

    // fix the non-acting arm's targets while the other arm works
    Phase right_reach_first{"", [=](const WorldState& s) { return Targets{lh, cup(s), 1.0, 1.0}; },
                            [=](const WorldState& s, int) { return near(s.right.ee, cup(s), 1e-9); }};
    Phase right_close_first{"right_pick_close",
                            [=](const WorldState& s) { return Targets{lh, s.right.ee, 1.0, 0.0}; },
                            [](const WorldState& s, int) { return s.objects[1].att == Attachment::Right; }};
    Phase right_lift_first{"", [=](const WorldState& s) { return Targets{lh, cup_lift, 1.0, 0.0}; },
                           [=](const WorldState& s, int) { return near(s.right.ee, cup_lift); }};
    Phase left_reach_second{"", [=](const WorldState& s) { return Targets{sleeve(s), cup_lift, 1.0, 0.0}; },
                            [=](const WorldState& s, int) { return near(s.left.ee, sleeve(s), 1e-9); }};
    Phase left_close_second{"left_pick_close",
                            [=](const WorldState& s) { return Targets{s.left.ee, cup_lift, 0.0, 0.0}; },
                            [](const WorldState& s, int) { return s.objects[0].att == Attachment::Left; }};
    Phase left_lift_second{"", [=](const WorldState& s) { return Targets{sleeve_lift, cup_lift, 0.0, 0.0}; },
                           [=](const WorldState& s, int) { return near(s.left.ee, sleeve_lift); }};

    if (left_first)
        return {left_reach, dwell(6), left_close, left_lift,
                right_reach, dwell(6), right_close, right_lift, insert};
    return {right_reach_first, dwell(6), right_close_first, right_lift_first,
            left_reach_second, dwell(6), left_close_second, left_lift_second, insert};
}

}  // namespace

Trajectory scripted_demo(const TaskSpec& spec, uint64_t seed, const std::string& style) {
    if (spec.name == "transfer") {
        if (style != "default") throw ConfigError("transfer has no style " + style);
        return run_script(spec, seed, style, transfer_phases(spec));
    }
    if (spec.name == "conveyor") {
        if (style != "default") throw ConfigError("conveyor has no style " + style);
        return run_script(spec, seed, style, conveyor_phases(spec));
    }
    if (spec.name == "pick-order") {
        if (style != "left-first" && style != "right-first")
            throw ConfigError("pick-order styles are left-first|right-first, got " + style);
        return run_script(spec, seed, style, pick_order_phases(spec, style == "left-first"));
    }
    throw ConfigError("unknown task: " + spec.name);
}

LatencyModel::Mode latency_mode_from_name(const std::string& name) {
    if (name == "wallclock") return LatencyModel::Mode::Wallclock;
    if (name == "nfe-cost") return LatencyModel::Mode::NfeCost;
    throw ConfigError("unknown latency mode: " + name);
}

long charge_latency(const LatencyModel& model, double measured_ms, long nfe) {
    if (measured_ms < 0 || nfe < 0) throw ContractError("charge_latency: negative input");
    double ms = model.mode == LatencyModel::Mode::Wallclock
                    ? measured_ms
                    : static_cast<double>(nfe) * model.cost_per_nfe_ms;
    if (ms <= 0.0) return 0;
    return static_cast<long>(std::ceil(ms / model.tick_ms - 1e-12));
}

}  // namespace bikc::sim
