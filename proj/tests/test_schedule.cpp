#include <doctest.h>

#include "bikc/schedule.hpp"

using namespace bikc;

TEST_CASE("karras schedule endpoints are exact for all N in 2..161") {
    for (int n = 2; n <= 161; ++n) {
        auto sched = cm::karras_sigmas(n, 0.002, 80.0, 7.0);
        CHECK(sched.sigmas.front() == doctest::Approx(0.002).epsilon(1e-12));
        CHECK(sched.sigmas.back() == doctest::Approx(80.0).epsilon(1e-12));
        for (std::size_t i = 1; i < sched.sigmas.size(); ++i)
            CHECK(sched.sigmas[i] > sched.sigmas[i - 1]);
    }
}

TEST_CASE("karras midpoint matches the independently evaluated closed form") {
    auto sched = cm::karras_sigmas(11, 0.002, 80.0, 7.0);
    // i = 6 of N = 11, evaluated by a separate script before the build
    CHECK(sched.sigmas[5] == doctest::Approx(2.515218976147159).epsilon(1e-12));
}

TEST_CASE("karras rejects bad arguments") {
    CHECK_THROWS_AS(cm::karras_sigmas(1, 0.002, 80.0, 7.0), ContractError);
    CHECK_THROWS_AS(cm::karras_sigmas(10, 0.0, 80.0, 7.0), ContractError);
    CHECK_THROWS_AS(cm::karras_sigmas(10, 81.0, 80.0, 7.0), ContractError);
}

namespace {

// doubling-loop oracle for the curriculum, independent of the closed form
int curriculum_oracle(long k, long total, int s0, int s1) {
    double doublings = std::log2(static_cast<double>(s1 / s0)) + 1.0;
    long k_prime = static_cast<long>(std::floor(total / doublings));
    if (k_prime == 0) return s1 + 1;
    long n = s0;
    for (long d = 0; d < k / k_prime; ++d) n = std::min<long>(n * 2, s1);
    return static_cast<int>(n) + 1;
}

}  // namespace

TEST_CASE("curriculum matches Eq-9 checks and the doubling oracle exhaustively") {
    CHECK(cm::curriculum_n(0, 1000, 10, 160) == 11);
    CHECK(cm::curriculum_n(200, 1000, 10, 160) == 21);  // K' = 200
    CHECK(cm::curriculum_n(999, 1000, 10, 160) == 161);
    for (long total : {10L, 1000L}) {
        for (long k = 0; k < total; ++k) {
            CHECK(cm::curriculum_n(k, total, 10, 160) == curriculum_oracle(k, total, 10, 160));
        }
    }
    // non-decreasing in k
    int prev = 0;
    for (long k = 0; k < 1000; ++k) {
        int n = cm::curriculum_n(k, 1000, 10, 160);
        CHECK(n >= prev);
        CHECK(n <= 161);
        prev = n;
    }
}

TEST_CASE("curriculum with s0 == s1 binds the cap immediately") {
    for (long k = 0; k < 50; ++k) CHECK(cm::curriculum_n(k, 50, 12, 12) == 13);
}

TEST_CASE("curriculum rejects s1 < s0") {
    CHECK_THROWS_AS(cm::curriculum_n(0, 10, 20, 10), ConfigError);
}

TEST_CASE("boundary scalings: identity at eps, data-variance split, limits") {
    auto [skip_eps, out_eps] = cm::boundary_scalings(0.002, 0.002, 0.5);
    CHECK(skip_eps == 1.0);
    CHECK(out_eps == 0.0);

    auto [skip_mid, out_mid] = cm::boundary_scalings(0.502, 0.002, 0.5);
    CHECK(skip_mid == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out_mid == doctest::Approx(0.3528469923239136).epsilon(1e-12));

    auto [skip_inf, out_inf] = cm::boundary_scalings(1e6, 0.002, 0.5);
    CHECK(skip_inf == doctest::Approx(0.0).epsilon(1e-3));
    CHECK(out_inf == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("pseudo-huber at zero and unit distance") {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
    CHECK(cm::pseudo_huber(zero, 0.0064) == 0.0);
    Eigen::VectorXd unit(2);
    unit << 0.6, 0.8;  // norm 1
    CHECK(cm::pseudo_huber(unit, 0.0064) == doctest::Approx(0.9936204797902892).epsilon(1e-9));
}

TEST_CASE("weighting times sigma gap telescopes to one") {
    auto sched = cm::karras_sigmas(11, 0.002, 80.0, 7.0);
    for (std::size_t n = 0; n + 1 < sched.sigmas.size(); ++n) {
        double lambda = 1.0 / (sched.sigmas[n + 1] - sched.sigmas[n]);
        CHECK(lambda * (sched.sigmas[n + 1] - sched.sigmas[n]) == doctest::Approx(1.0).epsilon(1e-12));
    }
}
