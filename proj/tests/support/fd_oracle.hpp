#pragma once

#include <functional>

#include "bikc/nn.hpp"

// Central-finite-difference gradient oracle. Lives in test code only and is
// independent of the backprop path it checks.
namespace bikc::testing {

using LossFn = std::function<double(const nn::ParamStore&)>;

inline nn::ParamStore finite_diff_grad(const nn::ParamStore& params, const LossFn& loss,
                                       double h = 1e-5) {
    nn::ParamStore grads = nn::ParamStore::zeros_like(params);
    nn::ParamStore work = params;
    for (std::size_t e = 0; e < params.size(); ++e) {
        auto& w = work.entry(e).second;
        auto& g = grads.entry(e).second;
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                double orig = w(r, c);
                w(r, c) = orig + h;
                double up = loss(work);
                w(r, c) = orig - h;
                double down = loss(work);
                w(r, c) = orig;
                g(r, c) = (up - down) / (2.0 * h);
            }
        }
    }
    return grads;
}

// max relative error with an absolute floor for near-zero entries
inline double max_rel_error(const nn::ParamStore& a, const nn::ParamStore& b,
                            double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t e = 0; e < a.size(); ++e) {
        const auto& x = a.entry(e).second;
        const auto& y = b.entry(e).second;
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                double denom = std::max({std::abs(x(r, c)), std::abs(y(r, c)), floor});
                worst = std::max(worst, std::abs(x(r, c) - y(r, c)) / denom);
            }
    }
    return worst;
}

}  // namespace bikc::testing
