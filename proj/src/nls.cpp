#include "fee/nls.hpp"

#include "fee/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace fee {

namespace {

double sq_norm(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r)
        s += v * v;
    return s;
}

} // namespace

std::vector<double> bounded_nls_solve(const ResidualFn& residual,
                                      std::vector<double> x0,
                                      const std::vector<double>& lo,
                                      const std::vector<double>& hi,
                                      const NlsOptions& opt,
                                      NlsDiagnostics* diag) {
    const std::size_t n = x0.size();
    if (lo.size() != n || hi.size() != n)
        throw InvalidInput("bounded_nls_solve: bound sizes do not match x0");
    for (std::size_t j = 0; j < n; ++j) {
        if (!(lo[j] <= hi[j]))
            throw InvalidInput("bounded_nls_solve: lo > hi at coordinate " +
                               std::to_string(j));
        if (x0[j] < lo[j] || x0[j] > hi[j])
            throw InvalidInput("bounded_nls_solve: x0 outside bounds at "
                               "coordinate " + std::to_string(j));
    }

    NlsDiagnostics local;
    NlsDiagnostics& dg = diag ? *diag : local;
    dg = NlsDiagnostics{};

    // Affine scaling: y in [0,1] <-> x = lo + y * span. Degenerate spans
    // stay frozen at their bound.
    std::vector<double> span(n);
    for (std::size_t j = 0; j < n; ++j)
        span[j] = hi[j] - lo[j];
    auto to_x = [&](const Eigen::VectorXd& y) {
        std::vector<double> x(n);
        for (std::size_t j = 0; j < n; ++j)
            x[j] = lo[j] + y[static_cast<Eigen::Index>(j)] * span[j];
        return x;
    };

    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j)
        y[static_cast<Eigen::Index>(j)] =
            span[j] > 0.0 ? (x0[j] - lo[j]) / span[j] : 0.0;

    std::vector<double> r;
    residual(x0, r);
    const std::size_t m = r.size();
    if (m == 0)
        throw InvalidInput("bounded_nls_solve: empty residual vector");
    double F = sq_norm(r);
    dg.objective_history.push_back(F);

    if (n == 0) {
        dg.converged = true;
        dg.stop_reason = "no free variables";
        dg.objective = F;
        return x0;
    }

    Eigen::MatrixXd J(static_cast<Eigen::Index>(m),
                      static_cast<Eigen::Index>(n));
    Eigen::VectorXd rv(static_cast<Eigen::Index>(m));
    std::vector<double> rp, rm;

    double mu = -1.0; // initialized from the first Jacobian
    double nu = 2.0;

    auto eval_scaled = [&](const Eigen::VectorXd& yy, std::vector<double>& out) {
        residual(to_x(yy), out);
    };

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        dg.iterations = iter + 1;

        // Central-difference Jacobian in scaled coordinates, shrunk at the
        // box faces so every probe stays feasible.
        for (std::size_t j = 0; j < n; ++j) {
            const Eigen::Index jj = static_cast<Eigen::Index>(j);
            if (span[j] <= 0.0) {
                J.col(jj).setZero();
                continue;
            }
            double hp = std::min(opt.fd_step, 1.0 - y[jj]);
            double hm = std::min(opt.fd_step, y[jj]);
            if (hp + hm <= 0.0) {
                J.col(jj).setZero();
                continue;
            }
            Eigen::VectorXd yp = y, ym = y;
            yp[jj] += hp;
            ym[jj] -= hm;
            eval_scaled(yp, rp);
            eval_scaled(ym, rm);
            for (std::size_t i = 0; i < m; ++i)
                J(static_cast<Eigen::Index>(i), jj) =
                    (rp[i] - rm[i]) / (hp + hm);
        }
        for (std::size_t i = 0; i < m; ++i)
            rv[static_cast<Eigen::Index>(i)] = r[i];

        Eigen::VectorXd g = J.transpose() * rv; // half the objective gradient

        // Projected-gradient stationarity, measured as a cosine against the
        // residual and column scales so mixed magnitudes compare fairly.
        double pg = 0.0;
        double rnorm = std::sqrt(F);
        for (std::size_t j = 0; j < n; ++j) {
            const Eigen::Index jj = static_cast<Eigen::Index>(j);
            double gj = g[jj];
            if (y[jj] <= 0.0 && gj > 0.0)
                gj = 0.0;
            if (y[jj] >= 1.0 && gj < 0.0)
                gj = 0.0;
            double colscale = J.col(jj).norm();
            if (rnorm > 0.0 && colscale > 0.0)
                pg = std::max(pg, std::fabs(gj) / (rnorm * colscale));
        }
        dg.projected_gradient = pg;
        if (pg <= opt.gtol || F == 0.0) {
            dg.converged = true;
            dg.stop_reason = "gtol";
            break;
        }

        Eigen::MatrixXd JtJ = J.transpose() * J;
        if (mu < 0.0)
            mu = 1e-3 * std::max(JtJ.diagonal().maxCoeff(), 1e-12);

        bool accepted = false;
        int rejects = 0;
        while (!accepted && rejects < 30) {
            Eigen::MatrixXd M = JtJ;
            for (Eigen::Index jj = 0; jj < M.rows(); ++jj)
                M(jj, jj) += mu * std::max(JtJ(jj, jj), 1e-12);
            Eigen::VectorXd step = M.ldlt().solve(-g);

            Eigen::VectorXd yt = y + step;
            for (Eigen::Index jj = 0; jj < yt.size(); ++jj)
                yt[jj] = std::clamp(yt[jj], 0.0, 1.0);
            Eigen::VectorXd proj_step = yt - y;

            double step_norm = proj_step.norm();
            if (step_norm <= opt.xtol * (y.norm() + opt.xtol)) {
                dg.converged = true;
                dg.stop_reason = "xtol";
                accepted = false;
                break;
            }

            eval_scaled(yt, rp);
            double Ft = sq_norm(rp);

            // model decrease of the projected step (factor 2: F = ||r||^2)
            double pred = -2.0 * g.dot(proj_step) -
                          proj_step.dot(JtJ * proj_step);
            double rho = pred > 0.0 ? (F - Ft) / pred : (F - Ft);

            if (Ft < F) {
                double rel_drop = (F - Ft) / std::max(F, 1e-300);
                y = yt;
                r = rp;
                F = Ft;
                dg.objective_history.push_back(F);
                accepted = true;
                double shrink = 1.0 - std::pow(2.0 * rho - 1.0, 3.0);
                mu *= std::max(1.0 / 3.0, std::min(shrink, 1.0));
                nu = 2.0;
                if (rel_drop <= opt.ftol) {
                    dg.converged = true;
                    dg.stop_reason = "ftol";
                }
            } else {
                mu *= nu;
                nu *= 2.0;
                ++rejects;
            }
        }

        if (dg.converged)
            break;
        if (!accepted) {
            // trust region collapsed without progress; report stationarity
            dg.stop_reason = dg.stop_reason.empty() ? "stalled"
                                                    : dg.stop_reason;
            dg.converged = dg.projected_gradient <= 1e2 * opt.gtol;
            break;
        }
    }

    if (dg.stop_reason.empty()) {
        dg.stop_reason = "max_iterations";
        dg.converged = false;
    }
    dg.objective = F;
    return to_x(y);
}

} // namespace fee
