// Central-difference gradient checking, independent of every analytic
// gradient in the library: perturb one parameter at a time, evaluate the
// scalar objective on both sides, and compare the quotient to the analytic
// entry.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "preferthinker/policy.hpp"

namespace testutil {

// Largest relative disagreement between the analytic gradient and the
// central finite difference of f, over every parameter of p. The policy's
// parameters are perturbed in place and restored. The denominator saturates
// at 1 so near-zero entries are compared absolutely.
inline double fd_max_rel_error(preferthinker::policy::Policy& p,
                               const std::vector<double>& analytic,
                               const std::function<double(const preferthinker::policy::Policy&)>& f,
                               double h = 1e-5) {
    std::span<double> w = p.parameters();
    if (analytic.size() != w.size()) {
        throw std::logic_error("fd_max_rel_error: gradient length does not match the parameters");
    }
    double worst = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        const double saved = w[i];
        w[i] = saved + h;
        const double f_plus = f(p);
        w[i] = saved - h;
        const double f_minus = f(p);
        w[i] = saved;
        const double fd = (f_plus - f_minus) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(fd), std::abs(analytic[i])});
        worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace testutil
