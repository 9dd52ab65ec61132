#pragma once

#include <functional>
#include <string>
#include <vector>

namespace fee {

struct NlsOptions {
    int max_iterations = 500; // outer (Jacobian) iterations
    double gtol = 1e-8;       // scaled projected-gradient cosine tolerance
    double ftol = 1e-12;      // relative objective-decrease tolerance
    double xtol = 1e-10;      // scaled step-norm tolerance
    double fd_step = 1e-6;    // central-difference step in scaled coordinates
};

struct NlsDiagnostics {
    bool converged = false;
    int iterations = 0;
    std::string stop_reason;
    double objective = 0.0; // sum of squared residuals at the solution
    double projected_gradient = 0.0;
    std::vector<double> objective_history; // accepted steps, nonincreasing
};

// r(x) -> residual vector; must keep a fixed length across calls.
using ResidualFn =
    std::function<void(const std::vector<double>&, std::vector<double>&)>;

// Minimizes sum r_i(x)^2 subject to lo <= x <= hi, from x0 inside the box.
// Levenberg-Marquardt trust region with projected steps, run on an affine
// [0,1] rescaling of x so mixed-unit parameters are equally conditioned;
// Jacobians by central finite differences. Accepted objective values are
// monotone nonincreasing. Hitting the iteration cap returns the best point
// found with diag->converged = false. Deterministic and single-threaded.
std::vector<double> bounded_nls_solve(const ResidualFn& residual,
                                      std::vector<double> x0,
                                      const std::vector<double>& lo,
                                      const std::vector<double>& hi,
                                      const NlsOptions& opt = {},
                                      NlsDiagnostics* diag = nullptr);

} // namespace fee
