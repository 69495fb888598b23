#include <doctest.h>

#include "bikc/keypose.hpp"

using namespace bikc;
using Eigen::VectorXd;

namespace {

// trajectory with constant arms except a scripted left-aperture profile
data::Trajectory aperture_traj(const std::vector<double>& left_aperture) {
    data::Trajectory tr;
    tr.task = "synthetic";
    tr.proprio_dim = 6;
    for (double g : left_aperture) {
        VectorXd o = VectorXd::Zero(6);
        o << 0.2, 0.5, g, 0.8, 0.5, 1.0;
        tr.obs.push_back(o);
        tr.actions.push_back(o);
    }
    return tr;
}

kp::KeyposeRules loose_rules() {
    kp::KeyposeRules rules;
    rules.gripper_open_close_delta = 0.1;
    rules.stall_speed_thresh = 0.004;
    rules.case_rules.clear();
    return rules;
}

}  // namespace

TEST_CASE("aperture onset detected where the delta first crosses the threshold") {
    auto tr = aperture_traj({1.0, 1.0, 1.0, 0.8, 0.5, 0.2});
    auto hits = kp::detect_arm_keyposes(tr, kp::Arm::Left, loose_rules());
    REQUIRE(hits.size() == 1);
    CHECK(hits[0] == 3);
}

TEST_CASE("constant trajectory has no interior detections") {
    auto tr = aperture_traj(std::vector<double>(50, 0.7));
    kp::KeyposeRules rules;
    rules.case_rules.clear();
    CHECK(kp::detect_arm_keyposes(tr, kp::Arm::Left, rules).empty());
    CHECK(kp::detect_arm_keyposes(tr, kp::Arm::Right, rules).empty());
}

TEST_CASE("no detections inside constant padding, in either time direction") {
    std::vector<double> g(20, 1.0);
    for (int i = 0; i < 5; ++i) g.push_back(1.0 - 0.2 * (i + 1));  // close over 5 ticks
    for (int i = 0; i < 40; ++i) g.push_back(0.0);                 // constant pad
    auto tr = aperture_traj(g);
    auto rules = loose_rules();
    for (int hit : kp::detect_arm_keyposes(tr, kp::Arm::Left, rules)) CHECK(hit <= 26);

    std::reverse(g.begin(), g.end());
    auto rev = aperture_traj(g);
    for (int hit : kp::detect_arm_keyposes(rev, kp::Arm::Left, rules)) CHECK(hit >= 39);
}

TEST_CASE("detections within the debounce window collapse to the first") {
    // two onsets 3 ticks apart: close then immediately reopen
    auto tr = aperture_traj({1.0, 1.0, 0.5, 0.5, 0.9, 0.9, 0.9, 0.9, 0.9, 0.4});
    auto rules = loose_rules();
    auto hits = kp::detect_arm_keyposes(tr, kp::Arm::Left, rules);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0] == 2);
    CHECK(hits[1] == 9);  // the onset at tick 4 fell inside the window
}

TEST_CASE("stall onset fires when speed drops below the threshold") {
    data::Trajectory tr;
    tr.proprio_dim = 6;
    double x = 0.1;
    for (int t = 0; t < 30; ++t) {
        if (t < 10) x += 0.02;
        VectorXd o = VectorXd::Zero(6);
        o << x, 0.5, 1.0, 0.8, 0.5, 1.0;
        tr.obs.push_back(o);
        tr.actions.push_back(o);
    }
    auto rules = loose_rules();
    auto hits = kp::detect_arm_keyposes(tr, kp::Arm::Left, rules);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0] == 10);  // first tick whose speed is back under the threshold
}

TEST_CASE("empty or too-short trajectories are contract errors") {
    data::Trajectory tr;
    tr.proprio_dim = 6;
    CHECK_THROWS_AS(kp::detect_arm_keyposes(tr, kp::Arm::Left, loose_rules()), ContractError);
    tr.obs.push_back(VectorXd::Zero(6));
    tr.actions.push_back(VectorXd::Zero(6));
    CHECK_THROWS_AS(kp::detect_arm_keyposes(tr, kp::Arm::Left, loose_rules()), ContractError);
}

TEST_CASE("merge example from set-union arithmetic") {
    auto merged = kp::merge_keyposes({0, 100, 250}, {0, 100, 180}, 400);
    CHECK(merged == std::vector<int>({0, 100, 180, 250, 400}));
}

TEST_CASE("merge algebra: idempotent, commutative, associative, endpoint closure") {
    Rng rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        int T = 50 + static_cast<int>(rng.uniform_int(0, 300));
        auto draw = [&] {
            std::vector<int> v;
            int n = static_cast<int>(rng.uniform_int(0, 8));
            for (int i = 0; i < n; ++i) v.push_back(static_cast<int>(rng.uniform_int(0, T)));
            return v;
        };
        auto a = draw(), b = draw(), c = draw();
        auto ab = kp::merge_keyposes(a, b, T);
        CHECK(ab == kp::merge_keyposes(b, a, T));
        CHECK(kp::merge_keyposes(a, a, T) == kp::merge_keyposes(a, {}, T));
        CHECK(kp::merge_keyposes(ab, c, T) == kp::merge_keyposes(a, kp::merge_keyposes(b, c, T), T));
        CHECK(ab.front() == 0);
        CHECK(ab.back() == T);
        // every interior index came from one of the arms
        for (int t : ab) {
            bool from_arm = t == 0 || t == T ||
                            std::find(a.begin(), a.end(), t) != a.end() ||
                            std::find(b.begin(), b.end(), t) != b.end();
            CHECK(from_arm);
        }
    }
}

TEST_CASE("merge rejects out-of-range indices") {
    CHECK_THROWS_AS(kp::merge_keyposes({0, 500}, {}, 400), ContractError);
    CHECK_THROWS_AS(kp::merge_keyposes({}, {-1}, 400), ContractError);
}

TEST_CASE("keypose dataset tiles every trajectory exactly once") {
    Rng rng(5);
    std::vector<data::Trajectory> trajs;
    std::vector<kp::KeyposeSet> sets;
    int total = 0;
    for (int i = 0; i < 5; ++i) {
        int T = 20 + static_cast<int>(rng.uniform_int(0, 100));
        auto tr = aperture_traj(std::vector<double>(static_cast<std::size_t>(T), 1.0));
        std::vector<int> idx;
        int n_interior = static_cast<int>(rng.uniform_int(0, 5));
        for (int j = 0; j < n_interior; ++j)
            idx.push_back(static_cast<int>(rng.uniform_int(1, T - 1)));
        auto merged = kp::merge_keyposes(idx, {}, T);
        sets.push_back(kp::make_keypose_set(tr, merged));
        trajs.push_back(std::move(tr));
        total += T;
    }
    auto tuples = kp::build_keypose_dataset(trajs, sets);
    CHECK(static_cast<int>(tuples.size()) == total);
}

TEST_CASE("segments are left-closed: at t = t_j the previous keypose is k_j") {
    auto tr = aperture_traj(std::vector<double>(10, 1.0));
    for (int t = 0; t < 10; ++t) tr.obs[static_cast<std::size_t>(t)][0] = 0.1 * t;
    auto set = kp::make_keypose_set(tr, kp::merge_keyposes({4}, {}, 10));
    auto tuples = kp::build_keypose_dataset({tr}, {set});
    REQUIRE(tuples.size() == 10);
    // tuple at t = 4 opens segment 1
    CHECK(tuples[4].k_prev[0] == doctest::Approx(0.4));
    CHECK(tuples[4].k_next[0] == doctest::Approx(0.9));
    // single-segment check: with only {0, T}, all tuples share the endpoints
    auto set2 = kp::make_keypose_set(tr, kp::merge_keyposes({}, {}, 10));
    for (const auto& tup : kp::build_keypose_dataset({tr}, {set2})) {
        CHECK(tup.k_prev[0] == doctest::Approx(0.0));
        CHECK(tup.k_next[0] == doctest::Approx(0.9));
    }
}

TEST_CASE("misaligned dataset inputs are contract errors") {
    auto tr = aperture_traj(std::vector<double>(10, 1.0));
    CHECK_THROWS_AS(kp::build_keypose_dataset({tr}, {}), ContractError);
    kp::KeyposeSet bad;
    bad.indices = {0, 5};  // does not reach T
    bad.poses = {tr.proprio(0), tr.proprio(5)};
    CHECK_THROWS_AS(kp::build_keypose_dataset({tr}, {bad}), ContractError);
}

namespace {

data::NormStats identity_stats(int obs_dim, int kp_dim) {
    data::NormStats st;
    st.obs_min = VectorXd::Constant(obs_dim, -1.0);
    st.obs_max = VectorXd::Constant(obs_dim, 1.0);
    st.act_min = VectorXd::Constant(1, -1.0);
    st.act_max = VectorXd::Constant(1, 1.0);
    st.kp_min = VectorXd::Constant(kp_dim, -1.0);
    st.kp_max = VectorXd::Constant(kp_dim, 1.0);
    st.fitted = true;
    return st;
}

}  // namespace

TEST_CASE("predictor reaches zero loss when the target is a function of the input") {
    Rng rng(3);
    std::vector<kp::KeyposeTuple> dataset;
    for (int i = 0; i < 200; ++i) {
        kp::KeyposeTuple t;
        t.obs = VectorXd::Constant(2, rng.uniform(-1, 1));
        t.k_prev = VectorXd::Constant(1, rng.uniform(-1, 1));
        t.k_next = t.k_prev;  // identity map
        dataset.push_back(std::move(t));
    }
    kp::PredictorConfig cfg;
    cfg.hidden = {16, 16};
    cfg.total_iters = 1500;
    cfg.lr0 = 3e-3;
    auto res = kp::train_keypose_predictor(dataset, identity_stats(2, 1), cfg, 0);
    CHECK(res.holdout_mse < 1e-3);
}

TEST_CASE("with two distinct targets the best loss is the target variance") {
    std::vector<kp::KeyposeTuple> dataset;
    for (int i = 0; i < 400; ++i) {
        kp::KeyposeTuple t;
        t.obs = VectorXd::Zero(2);
        t.k_prev = VectorXd::Zero(1);
        t.k_next = VectorXd::Constant(1, i % 2 == 0 ? 0.5 : -0.5);
        dataset.push_back(std::move(t));
    }
    kp::PredictorConfig cfg;
    cfg.hidden = {16};
    cfg.total_iters = 1200;
    cfg.lr0 = 3e-3;
    cfg.holdout_fraction = 0.0;
    auto res = kp::train_keypose_predictor(dataset, identity_stats(2, 1), cfg, 1);
    double tail = 0.0;
    int n_tail = 100;
    for (int i = 0; i < n_tail; ++i)
        tail += res.loss_curve[res.loss_curve.size() - 1 - static_cast<std::size_t>(i)];
    tail /= n_tail;
    CHECK(tail == doctest::Approx(0.25).epsilon(0.10));  // variance of +-0.5 targets
}

TEST_CASE("prediction is deterministic with matching output dimension") {
    Rng rng(9);
    std::vector<kp::KeyposeTuple> dataset;
    for (int i = 0; i < 50; ++i) {
        kp::KeyposeTuple t;
        t.obs = VectorXd::NullaryExpr(2, [&] { return rng.uniform(-1, 1); });
        t.k_prev = VectorXd::NullaryExpr(1, [&] { return rng.uniform(-1, 1); });
        t.k_next = t.k_prev;
        dataset.push_back(std::move(t));
    }
    kp::PredictorConfig cfg;
    cfg.hidden = {8};
    cfg.total_iters = 10;
    auto res = kp::train_keypose_predictor(dataset, identity_stats(2, 1), cfg, 2);
    VectorXd obs = VectorXd::Constant(2, 0.3);
    VectorXd k = VectorXd::Constant(1, -0.2);
    VectorXd a = kp::predict_next_keypose(res.predictor, obs, k);
    VectorXd b = kp::predict_next_keypose(res.predictor, obs, k);
    CHECK(a.size() == 1);
    CHECK(a[0] == b[0]);
    VectorXd bad = VectorXd::Zero(3);
    CHECK_THROWS_AS(kp::predict_next_keypose(res.predictor, bad, k), ConfigError);
}
