#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bikc/data.hpp"

using namespace bikc;
using Eigen::VectorXd;

namespace {

data::Trajectory ramp_traj(int T, int obs_dim = 8, int act_dim = 6) {
    data::Trajectory tr;
    tr.task = "ramp";
    tr.proprio_dim = 6;
    for (int t = 0; t < T; ++t) {
        VectorXd o = VectorXd::Constant(obs_dim, 0.01 * t);
        VectorXd a = VectorXd::Constant(act_dim, 1.0 * t);
        tr.obs.push_back(o);
        tr.actions.push_back(a);
    }
    return tr;
}

}  // namespace

TEST_CASE("padding rule: rows at or beyond the keypose tick hold a_{t_next - 1}") {
    auto tr = ramp_traj(120);
    std::vector<int> kp{0, 100, 120};
    auto ds = data::build_traj_dataset({tr}, {kp}, 2, 8);
    REQUIRE(ds.size() == 120);
    // t = 95, t_next = 100: rows are a_95..a_99 then a_99 repeated
    const auto& s = ds[95];
    for (int r = 0; r < 5; ++r) CHECK(s.chunk(r, 0) == doctest::Approx(95.0 + r));
    for (int r = 5; r < 8; ++r) CHECK(s.chunk(r, 0) == doctest::Approx(99.0));
}

TEST_CASE("far from a keypose the chunk is the raw action window") {
    auto tr = ramp_traj(120);
    auto ds = data::build_traj_dataset({tr}, {{0, 100, 120}}, 2, 8);
    const auto& s = ds[40];
    for (int r = 0; r < 8; ++r) CHECK(s.chunk(r, 0) == doctest::Approx(40.0 + r));
}

TEST_CASE("padded region is constant for arbitrary keypose placements") {
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        int T = 30 + static_cast<int>(rng.uniform_int(0, 120));
        auto tr = ramp_traj(T);
        std::vector<int> kp{0};
        int cursor = 0;
        while (true) {
            cursor += static_cast<int>(rng.uniform_int(5, 40));
            if (cursor >= T) break;
            kp.push_back(cursor);
        }
        kp.push_back(T);
        auto ds = data::build_traj_dataset({tr}, {kp}, 2, 16);
        CHECK(static_cast<int>(ds.size()) == T);
        int t = 0;
        std::size_t seg = 0;
        for (const auto& s : ds) {
            while (kp[seg + 1] <= t) ++seg;
            int t_next = kp[seg + 1];
            for (int r = 0; r < 16; ++r) {
                double expect = std::min(t + r, t_next - 1);
                CHECK(s.chunk(r, 0) == doctest::Approx(expect));
            }
            ++t;
        }
    }
}

TEST_CASE("observation history is front-padded with the first observation") {
    auto tr = ramp_traj(20);
    auto ds = data::build_traj_dataset({tr}, {{0, 20}}, 3, 4);
    CHECK(ds[0].obs_history(0, 0) == doctest::Approx(0.0));
    CHECK(ds[0].obs_history(1, 0) == doctest::Approx(0.0));
    CHECK(ds[0].obs_history(2, 0) == doctest::Approx(0.0));
    CHECK(ds[1].obs_history(0, 0) == doctest::Approx(0.0));
    CHECK(ds[1].obs_history(2, 0) == doctest::Approx(0.01));
    CHECK(ds[5].obs_history(0, 0) == doctest::Approx(0.03));
}

TEST_CASE("normalization endpoints, degenerate elements and round trip") {
    auto tr = ramp_traj(50);
    tr.obs[0][7] = 0.5;  // make one element non-degenerate apart from ramp
    auto stats = data::fit_norm({tr});

    VectorXd lo_probe = data::normalize(stats, tr.obs[0], "obs");
    VectorXd hi_probe = data::normalize(stats, tr.obs[49], "obs");
    CHECK(lo_probe[0] == doctest::Approx(-1.0));
    CHECK(hi_probe[0] == doctest::Approx(1.0));

    // degenerate element: a constant column maps to 0
    data::Trajectory flat = ramp_traj(10);
    for (auto& o : flat.obs) o[3] = 0.77;
    auto st2 = data::fit_norm({flat});
    CHECK(data::normalize(st2, flat.obs[4], "obs")[3] == 0.0);
    CHECK(data::unnormalize(st2, data::normalize(st2, flat.obs[4], "obs"), "obs")[3] ==
          doctest::Approx(0.77));

    Rng rng(21);
    for (int rep = 0; rep < 1000; ++rep) {
        VectorXd x(8);
        for (int i = 0; i < 8; ++i) x[i] = rng.uniform(stats.obs_min[i], stats.obs_max[i]);
        VectorXd rt = data::unnormalize(stats, data::normalize(stats, x, "obs"), "obs");
        CHECK((rt - x).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("unfitted stats are a configuration error") {
    data::NormStats st;
    CHECK_THROWS_AS(data::normalize(st, VectorXd::Zero(3), "obs"), ConfigError);
}

TEST_CASE("jsonl round trip is structurally equal and byte-stable") {
    namespace fs = std::filesystem;
    auto tr1 = ramp_traj(15);
    tr1.events = {{"grasp", 5}, {"lift", 9}};
    auto tr2 = ramp_traj(7);
    tr2.seed = 42;
    std::string p1 = (fs::temp_directory_path() / "bikc_trajs_1.jsonl").string();
    std::string p2 = (fs::temp_directory_path() / "bikc_trajs_2.jsonl").string();
    data::save_trajs(p1, {tr1, tr2});
    auto loaded = data::load_trajs(p1);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].task == "ramp");
    CHECK(loaded[0].events.at("lift") == 9);
    CHECK(loaded[1].seed == 42);
    CHECK(loaded[0].length() == 15);
    CHECK((loaded[0].obs[3] - tr1.obs[3]).cwiseAbs().maxCoeff() == 0.0);

    data::save_trajs(p2, loaded);
    std::ifstream f1(p1), f2(p2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("empty file loads as an empty list; truncated line names its number") {
    namespace fs = std::filesystem;
    std::string p = (fs::temp_directory_path() / "bikc_trajs_bad.jsonl").string();
    {
        std::ofstream out(p);
    }
    CHECK(data::load_trajs(p).empty());
    {
        data::Trajectory tr = ramp_traj(3);
        data::save_trajs(p, {tr});
        std::ofstream out(p, std::ios::app);
        out << "{\"task\": \"broken\", \"seed\"\n";
    }
    try {
        data::load_trajs(p);
        FAIL("expected parse error");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    fs::remove(p);
}

TEST_CASE("dataset construction is deterministic and order-stable") {
    auto tr = ramp_traj(60);
    std::vector<int> kp{0, 25, 60};
    auto a = data::build_traj_dataset({tr}, {kp}, 2, 16);
    auto b = data::build_traj_dataset({tr}, {kp}, 2, 16);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i].chunk - b[i].chunk).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a[i].obs_history - b[i].obs_history).cwiseAbs().maxCoeff() == 0.0);
    }
}
