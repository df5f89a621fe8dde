#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tftmtl/errors.hpp"

namespace tftmtl {

using ScalarFn = std::function<double(const std::vector<double>&)>;
using GradFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_central = 0.0;
};

/// Compares an analytic gradient route against central finite differences of
/// the plain scalar function:
///   central_i = (f(x + eps·e_i) − f(x − eps·e_i)) / (2·eps)
///   err_i     = |analytic_i − central_i| / max(1e-12, |analytic_i| + |central_i|)
/// The differencing side never touches the gradient implementation, so it
/// stays an independent oracle.
inline GradCheckReport finite_diff_report(const ScalarFn& f, const GradFn& grad, std::vector<double> x, double eps) {
    if (!(eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");
    const std::vector<double> analytic = grad(x);
    if (analytic.size() != x.size()) {
        throw ContractError("finite_diff_check: gradient length " + std::to_string(analytic.size()) +
                            " does not match parameter count " + std::to_string(x.size()));
    }
    GradCheckReport rep;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + eps;
        const double fp = f(x);
        x[i] = xi - eps;
        const double fm = f(x);
        x[i] = xi;
        const double central = (fp - fm) / (2.0 * eps);
        const double denom = std::max(1e-12, std::abs(analytic[i]) + std::abs(central));
        const double err = std::abs(analytic[i] - central) / denom;
        if (err > rep.max_rel_error) {
            rep.max_rel_error = err;
            rep.worst_index = i;
            rep.worst_analytic = analytic[i];
            rep.worst_central = central;
        }
    }
    return rep;
}

/// Max relative error between the analytic gradient and central differences.
inline double finite_diff_check(const ScalarFn& f, const GradFn& grad, std::vector<double> x, double eps) {
    return finite_diff_report(f, grad, std::move(x), eps).max_rel_error;
}

}  // namespace tftmtl
