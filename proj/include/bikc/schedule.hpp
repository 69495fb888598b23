#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "bikc/common.hpp"

namespace bikc::cm {

// Discretized noise levels sigma_1..sigma_N, strictly increasing with
// sigma_1 = eps and sigma_N = sigma_max.
struct NoiseSchedule {
    std::vector<double> sigmas;
    double eps = 0.002;
    double sigma_max = 80.0;
    double rho = 7.0;

    int n() const { return static_cast<int>(sigmas.size()); }
};

// sigma_i = (eps^(1/rho) + (i-1)/(N-1) * (sigma_max^(1/rho) - eps^(1/rho)))^rho
NoiseSchedule karras_sigmas(int n_points, double eps, double sigma_max, double rho);

// Step-shaped discretization curriculum:
//   N(k) = min(s0 * 2^floor(k / K'), s1) + 1,
//   K'   = floor(K / (log2(floor(s1 / s0)) + 1))
// When K' floors to zero the cap binds immediately and N(k) = s1 + 1.
int curriculum_n(long k, long total_iters, int s0, int s1);

// c_skip = sd^2 / ((sigma - eps)^2 + sd^2)
// c_out  = sd * (sigma - eps) / sqrt(sd^2 + sigma^2)
// c_skip(eps) = 1 and c_out(eps) = 0 exactly.
std::pair<double, double> boundary_scalings(double sigma, double eps, double sigma_data);

// d(x, y) = sqrt(||x - y||^2 + c^2) - c, on the flattened residual
double pseudo_huber(const Eigen::VectorXd& residual, double c);

// Sinusoidal features of a scalar: dim/2 sines then dim/2 cosines over
// frequencies geometric between 1 and 1e4.
Eigen::VectorXd sinusoidal_features(double x, int dim);

}  // namespace bikc::cm
