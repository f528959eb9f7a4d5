#pragma once

// Central finite-difference oracle, independent of the gradient tape: every
// probe re-runs the forward closure with no tape active, so it exercises only
// the forward math. Keep this file free of any backward-pass calls.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tsf/tensor.hpp"

namespace tsf::testing {

// Floor absorbs central-difference truncation noise (~1e-11 absolute for
// O(1) losses at step 1e-5) so near-zero gradient pairs do not blow up.
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;
};

// `params` are leaves whose grads were already populated by one tape
// backward; `forward` recomputes the scalar loss from the params' current
// values. Probes perturb each element in place and restore it.
inline GradCheckReport finite_difference_check(
    const std::vector<Tensor>& params,
    const std::function<double()>& forward,
    double step = 1e-5) {
    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor t = params[p];
        for (Index i = 0; i < t.rows(); ++i) {
            for (Index j = 0; j < t.cols(); ++j) {
                const double saved = t.value()(i, j);
                t.value()(i, j) = saved + step;
                const double f_plus = forward();
                t.value()(i, j) = saved - step;
                const double f_minus = forward();
                t.value()(i, j) = saved;
                const double fd = (f_plus - f_minus) / (2.0 * step);
                const double tape = t.has_grad() ? t.grad()(i, j) : 0.0;
                const double err = rel_err(fd, tape);
                if (err > report.max_rel_err) {
                    report.max_rel_err = err;
                    report.worst = "param" + std::to_string(p) + "[" +
                                   std::to_string(i) + "," + std::to_string(j) +
                                   "] fd=" + std::to_string(fd) +
                                   " tape=" + std::to_string(tape);
                }
            }
        }
    }
    return report;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

}  // namespace tsf::testing
