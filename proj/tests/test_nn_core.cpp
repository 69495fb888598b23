#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "bikc/checkpoint.hpp"
#include "bikc/nn.hpp"
#include "support/fd_oracle.hpp"

using namespace bikc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

nn::MlpSpec small_spec(int in, std::vector<int> hidden, int out) {
    nn::MlpSpec s;
    s.input_dim = in;
    s.hidden_widths = std::move(hidden);
    s.output_dim = out;
    return s;
}

}  // namespace

TEST_CASE("zero-weight network maps any input to zero") {
    auto spec = small_spec(3, {5, 4}, 2);
    nn::ParamStore params;
    Rng rng(1);
    nn::mlp_init(params, spec, rng);
    params.set_zero();
    VectorXd x(3);
    x << 0.3, -1.2, 7.0;
    VectorXd y = nn::mlp_forward(params, spec, x);
    CHECK(y.norm() == doctest::Approx(0.0));
}

TEST_CASE("identity-weight single layer reproduces the activation") {
    auto spec = small_spec(2, {2}, 2);
    nn::ParamStore params;
    params.add("layer0.W", MatrixXd::Identity(2, 2));
    params.add("layer0.b", MatrixXd::Zero(2, 1));
    params.add("layer1.W", MatrixXd::Identity(2, 2));
    params.add("layer1.b", MatrixXd::Zero(2, 1));
    VectorXd x(2);
    x << 0.7, -0.4;
    VectorXd y = nn::mlp_forward(params, spec, x);
    auto silu = [](double v) { return v / (1.0 + std::exp(-v)); };
    CHECK(y[0] == doctest::Approx(silu(0.7)).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(silu(-0.4)).epsilon(1e-12));
}

TEST_CASE("seed-0 2-4-1 forward matches the hand-evaluated value") {
    auto spec = small_spec(2, {4}, 1);
    nn::ParamStore params;
    Rng rng(0);
    nn::mlp_init(params, spec, rng);
    VectorXd x(2);
    x << 1.0, 1.0;
    VectorXd y = nn::mlp_forward(params, spec, x);
    // frozen from an independent scripted evaluation of the init + forward
    CHECK(y[0] == doctest::Approx(-0.19845401223158654).epsilon(1e-12));
}

TEST_CASE("forward is pure: identical arguments give bit-identical output") {
    auto spec = small_spec(4, {8, 8}, 3);
    nn::ParamStore params;
    Rng rng(42);
    nn::mlp_init(params, spec, rng);
    VectorXd x(4);
    x << 0.1, 0.2, 0.3, 0.4;
    VectorXd y1 = nn::mlp_forward(params, spec, x);
    VectorXd y2 = nn::mlp_forward(params, spec, x);
    for (int i = 0; i < 3; ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("forward rejects shape mismatch") {
    auto spec = small_spec(3, {4}, 2);
    nn::ParamStore params;
    Rng rng(5);
    nn::mlp_init(params, spec, rng);
    VectorXd bad(2);
    bad << 1.0, 2.0;
    CHECK_THROWS_AS(nn::mlp_forward(params, spec, bad), ConfigError);
}

TEST_CASE("mse gradient matches the finite-difference oracle across seeds") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto spec = small_spec(3, {6, 5}, 2);
        nn::ParamStore params;
        Rng rng(seed);
        nn::mlp_init(params, spec, rng);
        MatrixXd x(4, 3), target(4, 2);
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 3; ++c) x(r, c) = rng.uniform(-1, 1);
            for (int c = 0; c < 2; ++c) target(r, c) = rng.uniform(-1, 1);
        }
        auto loss = [&](const nn::ParamStore& p) {
            MatrixXd y = nn::mlp_forward_batch(p, spec, x);
            return (y - target).array().square().sum() / 4.0;
        };
        nn::MlpTape tape;
        MatrixXd y = nn::mlp_forward_batch(params, spec, x, &tape);
        nn::ParamStore grads = nn::ParamStore::zeros_like(params);
        nn::mlp_backward(params, spec, tape, (2.0 / 4.0) * (y - target), grads);
        nn::ParamStore fd = bikc::testing::finite_diff_grad(params, loss);
        CHECK(bikc::testing::max_rel_error(grads, fd) < 1e-4);
    }
}

TEST_CASE("gradient of a constant loss is zero") {
    auto spec = small_spec(2, {3}, 1);
    nn::ParamStore params;
    Rng rng(3);
    nn::mlp_init(params, spec, rng);
    auto loss = [](const nn::ParamStore&) { return 4.2; };
    nn::ParamStore fd = bikc::testing::finite_diff_grad(params, loss);
    for (std::size_t e = 0; e < fd.size(); ++e)
        CHECK(fd.entry(e).second.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("gradient of the squared parameter norm is 2p") {
    nn::ParamStore params;
    MatrixXd w(2, 2);
    w << 0.5, -1.0, 2.0, 0.25;
    params.add("w", w);
    auto loss = [](const nn::ParamStore& p) { return p.at("w").array().square().sum(); };
    nn::ParamStore fd = bikc::testing::finite_diff_grad(params, loss);
    CHECK((fd.at("w") - 2.0 * w).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("adamw single-scalar step matches the hand-derived update") {
    nn::ParamStore params;
    params.add("p", MatrixXd::Constant(1, 1, 1.0));
    nn::ParamStore grads;
    grads.add("p", MatrixXd::Constant(1, 1, 1.0));
    nn::OptimState st = nn::OptimState::like(params);
    st.weight_decay = 0.0;
    nn::adamw_step(params, grads, st, 0.1);
    // m_hat = 1, v_hat = 1 at step 1: p' = 1 - 0.1 / (1 + 1e-8)
    CHECK(params.at("p")(0, 0) == doctest::Approx(0.9000000009999999).epsilon(1e-14));
    CHECK(st.step == 1);
}

TEST_CASE("adamw with lr 0 and wd 0 keeps params, updates moments") {
    nn::ParamStore params;
    params.add("p", MatrixXd::Constant(2, 1, 3.0));
    nn::ParamStore grads;
    grads.add("p", MatrixXd::Constant(2, 1, 0.5));
    nn::OptimState st = nn::OptimState::like(params);
    st.weight_decay = 0.0;
    nn::adamw_step(params, grads, st, 0.0);
    CHECK(params.at("p")(0, 0) == 3.0);
    CHECK(st.m.at("p")(0, 0) == doctest::Approx(0.05));
    CHECK(st.v.at("p")(0, 0) == doctest::Approx(0.00025));
}

TEST_CASE("adamw with zero grads and fresh moments keeps params") {
    nn::ParamStore params;
    params.add("p", MatrixXd::Constant(3, 2, -1.5));
    nn::ParamStore grads = nn::ParamStore::zeros_like(params);
    nn::OptimState st = nn::OptimState::like(params);
    st.weight_decay = 0.0;
    nn::adamw_step(params, grads, st, 0.1);
    CHECK((params.at("p").array() + 1.5).abs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("adamw rejects NaN gradients") {
    nn::ParamStore params;
    params.add("p", MatrixXd::Constant(1, 1, 1.0));
    nn::ParamStore grads;
    grads.add("p", MatrixXd::Constant(1, 1, std::nan("")));
    nn::OptimState st = nn::OptimState::like(params);
    CHECK_THROWS_AS(nn::adamw_step(params, grads, st, 0.1), NumericalError);
}

TEST_CASE("cosine lr endpoints and monotonicity") {
    CHECK(nn::cosine_lr(0, 1000, 1e-4) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(nn::cosine_lr(1000, 1000, 1e-4) == 0.0);
    CHECK(nn::cosine_lr(500, 1000, 1e-4) == doctest::Approx(5e-5).epsilon(1e-12));
    double prev = nn::cosine_lr(0, 317, 1e-4);
    for (long s = 1; s <= 317; ++s) {
        double cur = nn::cosine_lr(s, 317, 1e-4);
        CHECK(cur <= prev + 1e-18);
        prev = cur;
    }
}

TEST_CASE("checkpoint round trip preserves shapes and fp32 values") {
    auto spec = small_spec(3, {4}, 2);
    nn::ParamStore params;
    Rng rng(9);
    nn::mlp_init(params, spec, rng);
    std::string path = (std::filesystem::temp_directory_path() / "bikc_ckpt_test.bin").string();
    nlohmann::ordered_json header;
    header["kind"] = "test";
    save_checkpoint(path, header, params);
    nlohmann::ordered_json loaded_header;
    nn::ParamStore loaded = load_checkpoint(path, loaded_header);
    CHECK(loaded_header["kind"] == "test");
    REQUIRE(loaded.same_shapes(params));
    for (std::size_t e = 0; e < params.size(); ++e) {
        const auto& a = params.entry(e).second;
        const auto& b = loaded.entry(e).second;
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            for (Eigen::Index c = 0; c < a.cols(); ++c)
                CHECK(b(r, c) == doctest::Approx(a(r, c)).epsilon(1e-7));
    }
    std::filesystem::remove(path);
}

TEST_CASE("loading a missing checkpoint names the path") {
    nlohmann::ordered_json h;
    try {
        load_checkpoint("/nonexistent/ckpt.bin", h);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("checkpoint not found: /nonexistent/ckpt.bin") !=
              std::string::npos);
    }
}
