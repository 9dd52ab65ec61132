#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fee/errors.hpp"
#include "fee/nls.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace fee;

TEST_CASE("linear residual lands on the target inside the box") {
    const std::vector<double> c = {0.3, -1.2, 7.0};
    ResidualFn fn = [&](const std::vector<double>& x, std::vector<double>& r) {
        r.assign(3, 0.0);
        for (int i = 0; i < 3; ++i)
            r[i] = x[i] - c[i];
    };
    NlsDiagnostics diag;
    auto x = bounded_nls_solve(fn, {0.0, 0.0, 0.0}, {-5, -5, -5}, {10, 10, 10},
                               {}, &diag);
    CHECK(diag.converged);
    for (int i = 0; i < 3; ++i)
        CHECK(x[i] == doctest::Approx(c[i]).epsilon(1e-8));
    CHECK(diag.objective <= 1e-12);
}

TEST_CASE("target outside the box clamps to the nearest bound") {
    ResidualFn fn = [](const std::vector<double>& x, std::vector<double>& r) {
        r = {x[0] - 4.0, x[1] + 9.0};
    };
    NlsDiagnostics diag;
    auto x = bounded_nls_solve(fn, {0.5, -0.5}, {0.0, -1.0}, {1.0, 1.0}, {},
                               &diag);
    CHECK(diag.converged);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(x[1] == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("Rosenbrock residual converges from 10 starts") {
    ResidualFn fn = [](const std::vector<double>& x, std::vector<double>& r) {
        r = {10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]};
    };
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int s = 0; s < 10; ++s) {
        std::vector<double> x0 = {u(rng), u(rng)};
        NlsDiagnostics diag;
        auto x = bounded_nls_solve(fn, x0, {-2.0, -2.0}, {2.0, 2.0}, {},
                                   &diag);
        CAPTURE(s);
        CHECK(diag.objective < 1e-8);
        CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("accepted objective history never increases") {
    // mildly nasty nonconvex residual
    ResidualFn fn = [](const std::vector<double>& x, std::vector<double>& r) {
        r = {std::sin(3.0 * x[0]) + 0.5 * x[0], x[1] * x[1] - 0.3,
             0.1 * (x[0] - x[1])};
    };
    NlsDiagnostics diag;
    bounded_nls_solve(fn, {1.7, -1.9}, {-2.0, -2.0}, {2.0, 2.0}, {}, &diag);
    REQUIRE(diag.objective_history.size() >= 2);
    for (std::size_t i = 1; i < diag.objective_history.size(); ++i)
        CHECK(diag.objective_history[i] <= diag.objective_history[i - 1]);
    CHECK(diag.objective == diag.objective_history.back());
}

TEST_CASE("iteration cap returns best-so-far flagged non-converged") {
    ResidualFn fn = [](const std::vector<double>& x, std::vector<double>& r) {
        r = {10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]};
    };
    NlsOptions opt;
    opt.max_iterations = 2;
    NlsDiagnostics diag;
    bounded_nls_solve(fn, {-1.9, 1.9}, {-2.0, -2.0}, {2.0, 2.0}, opt, &diag);
    CHECK(!diag.converged);
    CHECK(diag.stop_reason == "max_iterations");
    CHECK(diag.iterations == 2);
    CHECK(diag.objective_history.back() <= diag.objective_history.front());
}

TEST_CASE("input validation") {
    ResidualFn fn = [](const std::vector<double>& x, std::vector<double>& r) {
        r = {x[0]};
    };
    CHECK_THROWS_AS(bounded_nls_solve(fn, {2.0}, {0.0}, {1.0}), InvalidInput);
    CHECK_THROWS_AS(bounded_nls_solve(fn, {0.5}, {1.0}, {0.0}), InvalidInput);
    CHECK_THROWS_AS(bounded_nls_solve(fn, {0.5}, {0.0, 0.0}, {1.0}),
                    InvalidInput);
}

TEST_CASE("frozen coordinate stays put while the rest optimize") {
    ResidualFn fn = [](const std::vector<double>& x, std::vector<double>& r) {
        r = {x[0] - 0.7, x[1] - 0.2};
    };
    NlsDiagnostics diag;
    auto x = bounded_nls_solve(fn, {0.5, 0.9}, {0.5, 0.0}, {0.5, 1.0}, {},
                               &diag);
    CHECK(x[0] == 0.5);
    CHECK(x[1] == doctest::Approx(0.2).epsilon(1e-8));
}
