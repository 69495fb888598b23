#include "bikc/schedule.hpp"

#include <cmath>

namespace bikc::cm {

NoiseSchedule karras_sigmas(int n_points, double eps, double sigma_max, double rho) {
    if (n_points < 2) throw ContractError("karras_sigmas: n_points must be >= 2");
    if (!(eps > 0.0 && eps < sigma_max)) throw ContractError("karras_sigmas: need 0 < eps < sigma_max");
    if (!(rho > 0.0)) throw ContractError("karras_sigmas: rho must be > 0");
    NoiseSchedule sched;
    sched.eps = eps;
    sched.sigma_max = sigma_max;
    sched.rho = rho;
    sched.sigmas.resize(static_cast<std::size_t>(n_points));
    double lo = std::pow(eps, 1.0 / rho);
    double hi = std::pow(sigma_max, 1.0 / rho);
    for (int i = 1; i <= n_points; ++i) {
        double frac = static_cast<double>(i - 1) / static_cast<double>(n_points - 1);
        sched.sigmas[static_cast<std::size_t>(i - 1)] = std::pow(lo + frac * (hi - lo), rho);
    }
    // pin the endpoints exactly; pow round-trips can wobble in the last ulp
    sched.sigmas.front() = eps;
    sched.sigmas.back() = sigma_max;
    return sched;
}

int curriculum_n(long k, long total_iters, int s0, int s1) {
    if (s1 < s0) throw ConfigError("curriculum: s1 must be >= s0");
    if (s0 < 1) throw ConfigError("curriculum: s0 must be >= 1");
    if (k < 0 || k >= total_iters) throw ContractError("curriculum: k out of [0, K)");
    long ratio = static_cast<long>(s1) / static_cast<long>(s0);
    double doublings = std::log2(static_cast<double>(ratio)) + 1.0;
    long k_prime = static_cast<long>(std::floor(static_cast<double>(total_iters) / doublings));
    if (k_prime == 0) return s1 + 1;
    long expo = k / k_prime;
    double n = static_cast<double>(s0) * std::pow(2.0, static_cast<double>(expo));
    if (n > static_cast<double>(s1)) n = static_cast<double>(s1);
    return static_cast<int>(n) + 1;
}

std::pair<double, double> boundary_scalings(double sigma, double eps, double sigma_data) {
    double sd2 = sigma_data * sigma_data;
    double diff = sigma - eps;
    double c_skip = sd2 / (diff * diff + sd2);
    double c_out = sigma_data * diff / std::sqrt(sd2 + sigma * sigma);
    return {c_skip, c_out};
}

double pseudo_huber(const Eigen::VectorXd& residual, double c) {
    return std::sqrt(residual.squaredNorm() + c * c) - c;
}

Eigen::VectorXd sinusoidal_features(double x, int dim) {
    if (dim < 2 || dim % 2 != 0) throw ConfigError("sinusoidal_features: dim must be even and >= 2");
    int half = dim / 2;
    Eigen::VectorXd out(dim);
    for (int j = 0; j < half; ++j) {
        double freq = std::pow(1e2, half > 1 ? static_cast<double>(j) / (half - 1) : 0.0);
        out[j] = std::sin(x * freq);
        out[half + j] = std::cos(x * freq);
    }
    return out;
}

}  // namespace bikc::cm
