#include <doctest.h>

#include "bikc/ddpm.hpp"
#include "support/fd_oracle.hpp"

using namespace bikc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ddpm::DdpmConfig tiny_cfg() {
    ddpm::DdpmConfig cfg;
    cfg.obs_horizon = 2;
    cfg.action_horizon = 2;
    cfg.chunk_len = 2;
    cfg.noise_emb_dim = 8;
    cfg.keypose_emb_dim = 4;
    cfg.hidden = {8, 8};
    cfg.batch_size = 4;
    cfg.total_iters = 20;
    return cfg;
}

ddpm::DdpmPolicy tiny_policy(uint64_t seed) {
    return ddpm::ddpm_init(tiny_cfg(), 3, 2, 3, true, seed);
}

std::vector<data::ChunkSample> tiny_batch(int n, uint64_t seed) {
    Rng rng(seed);
    std::vector<data::ChunkSample> batch;
    for (int i = 0; i < n; ++i) {
        data::ChunkSample s;
        s.obs_history = MatrixXd::NullaryExpr(2, 3, [&] { return rng.uniform(-1, 1); });
        s.target_keypose = VectorXd::NullaryExpr(3, [&] { return rng.uniform(-1, 1); });
        s.chunk = MatrixXd::NullaryExpr(2, 2, [&] { return rng.uniform(-1, 1); });
        batch.push_back(std::move(s));
    }
    return batch;
}

data::NormStats unit_stats() {
    data::NormStats st;
    st.obs_min = VectorXd::Constant(3, -1.0);
    st.obs_max = VectorXd::Constant(3, 1.0);
    st.act_min = VectorXd::Constant(2, -1.0);
    st.act_max = VectorXd::Constant(2, 1.0);
    st.kp_min = VectorXd::Constant(3, -1.0);
    st.kp_max = VectorXd::Constant(3, 1.0);
    st.fitted = true;
    return st;
}

}  // namespace

TEST_CASE("alpha_bar is decreasing in (0, 1]") {
    ddpm::DdpmConfig cfg;
    auto abar = ddpm::alpha_bars(cfg);
    REQUIRE(abar.size() == 100);
    double prev = 1.0;
    for (double a : abar) {
        CHECK(a > 0.0);
        CHECK(a < prev);
        prev = a;
    }
}

TEST_CASE("zero network on unit-variance noise gives loss of about 1 per coordinate") {
    auto policy = tiny_policy(0);
    policy.params.set_zero();
    // Monte-Carlo oracle: with eps_hat = 0, loss = E||z||^2 / dim = 1
    Rng rng(123);
    double acc = 0.0;
    int reps = 400;  // 400 batches x 64 samples x 4 elems ~ 1e5 draws
    for (int r = 0; r < reps; ++r) {
        std::vector<data::ChunkSample> batch = tiny_batch(64, 1000 + r);
        acc += ddpm::ddpm_loss(policy, batch, rng).loss;
    }
    CHECK(acc / reps == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("ddpm loss is non-negative and rejects an empty batch") {
    auto policy = tiny_policy(1);
    Rng rng(4);
    CHECK_THROWS_AS(ddpm::ddpm_loss(policy, {}, rng), ContractError);
    auto res = ddpm::ddpm_loss(policy, tiny_batch(4, 5), rng);
    CHECK(res.loss >= 0.0);
}

TEST_CASE("ddpm gradient matches finite differences") {
    auto policy = tiny_policy(2);
    auto batch = tiny_batch(3, 7);
    const uint64_t draw_seed = 31;
    Rng r0(draw_seed);
    auto res = ddpm::ddpm_loss(policy, batch, r0);
    auto base = policy;
    auto loss_fn = [&](const nn::ParamStore& p) {
        ddpm::DdpmPolicy probe = base;
        probe.params = p;
        Rng r(draw_seed);
        return ddpm::ddpm_loss(probe, batch, r).loss;
    };
    nn::ParamStore fd = bikc::testing::finite_diff_grad(policy.params, loss_fn);
    CHECK(bikc::testing::max_rel_error(res.grads, fd) < 1e-4);
}

TEST_CASE("ddim uses exactly eval_steps network evaluations") {
    auto policy = tiny_policy(3);
    policy.stats = unit_stats();
    std::deque<VectorXd> hist{VectorXd::Zero(3)};
    VectorXd kp = VectorXd::Zero(3);
    Rng rng(2);
    long nfe = 0;
    ddpm::ddim_sample(policy, hist, &kp, rng, &nfe);
    CHECK(nfe == 10);

    policy.cfg.eval_steps = 1;
    nfe = 0;
    MatrixXd chunk = ddpm::ddim_sample(policy, hist, &kp, rng, &nfe);
    CHECK(nfe == 1);
    CHECK(chunk.rows() == 2);
    CHECK(chunk.cols() == 2);
}

TEST_CASE("eval_steps beyond train_steps is a configuration error") {
    auto cfg = tiny_cfg();
    cfg.eval_steps = 101;
    CHECK_THROWS_AS(ddpm::ddpm_init(cfg, 3, 2, 3, true, 0), ConfigError);
}

TEST_CASE("ddim with a perfect noise oracle recovers the clean chunk") {
    // forward-marginal consistency on 1-D data: corrupt at t, then a denoiser
    // that returns the injected noise must reproduce the clean value
    ddpm::DdpmConfig cfg = tiny_cfg();
    auto abar = ddpm::alpha_bars(cfg);
    Rng rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        double a0 = rng.uniform(-1, 1);
        int t = static_cast<int>(rng.uniform_int(1, cfg.train_steps));
        double z = rng.normal();
        double ab = abar[static_cast<std::size_t>(t - 1)];
        double xt = std::sqrt(ab) * a0 + std::sqrt(1.0 - ab) * z;
        double x0 = (xt - std::sqrt(1.0 - ab) * z) / std::sqrt(ab);
        CHECK(x0 == doctest::Approx(a0).epsilon(1e-6));
    }

    // full sampler pass with the oracle: every step predicts the same noise
    Eigen::RowVectorXd clean(1);
    clean << 0.37;
    Eigen::RowVectorXd z_row(1);
    z_row << 0.8;
    double ab_T = abar.back();
    Eigen::RowVectorXd x_T = std::sqrt(ab_T) * clean + std::sqrt(1.0 - ab_T) * z_row;
    long nfe = 0;
    auto oracle = [&](const Eigen::RowVectorXd&, int) { return z_row; };
    Eigen::RowVectorXd out = ddpm::ddim_sample_impl(oracle, cfg, abar, x_T, &nfe);
    CHECK(nfe == cfg.eval_steps);
    CHECK(out[0] == doctest::Approx(clean[0]).epsilon(1e-6));
}

TEST_CASE("ema equals raw params after one step when decay is zero") {
    auto cfg = tiny_cfg();
    cfg.total_iters = 1;
    cfg.ema_decay = 0.0;
    auto res = ddpm::train_ddpm(tiny_batch(8, 3), unit_stats(), cfg, 3, 2, 3, true, 5);
    REQUIRE_FALSE(res.aborted);
    for (std::size_t e = 0; e < res.policy.params.size(); ++e)
        CHECK((res.policy.params.entry(e).second - res.policy.ema_params.entry(e).second)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
}

TEST_CASE("train_ddpm with K = 0 returns the initialization") {
    auto cfg = tiny_cfg();
    cfg.total_iters = 0;
    auto res = ddpm::train_ddpm(tiny_batch(8, 3), unit_stats(), cfg, 3, 2, 3, true, 11);
    auto fresh = ddpm::ddpm_init(cfg, 3, 2, 3, true, 11);
    for (std::size_t e = 0; e < fresh.params.size(); ++e)
        CHECK((res.policy.params.entry(e).second - fresh.params.entry(e).second)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    CHECK(res.curve.empty());
}
