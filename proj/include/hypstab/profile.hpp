#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "hypstab/errors.hpp"
#include "hypstab/piecewise_linear.hpp"

namespace hypstab {

/// Plant data on [-1,1]: transport speeds lambda, mu (> 0), their derivatives,
/// and the off-diagonal couplings b, c. All stored as uniform samples with
/// piecewise-linear evaluation. Diagonal couplings are required to vanish and
/// are therefore not stored; see require_zero_diagonal.
struct CoefficientProfile {
    PiecewiseLinear lambda;
    PiecewiseLinear mu;
    PiecewiseLinear lambda_prime;
    PiecewiseLinear mu_prime;
    PiecewiseLinear b;
    PiecewiseLinear c;

    std::size_t n_nodes() const { return lambda.size(); }

    void validate() const {
        for (std::size_t i = 0; i < lambda.size(); ++i) {
            if (!(lambda.value(i) > 0.0) || !(mu.value(i) > 0.0)) {
                throw NonPositiveSpeed("speed sample <= 0 at node w=" + std::to_string(lambda.node(i)));
            }
        }
    }

    double max_speed() const { return std::max(lambda.max_value(), mu.max_value()); }

    /// a = max{1/lambda, 1/mu} over the grid.
    double reciprocal_speed_bound() const {
        return std::max(1.0 / lambda.min_value(), 1.0 / mu.min_value());
    }

    /// b1 = max{|lambda'|, |b|}, b2 = max{|mu'|, |c|}; returns b1 + b2.
    double coupling_bound() const {
        const double b1 = std::max(lambda_prime.max_abs(), b.max_abs());
        const double b2 = std::max(mu_prime.max_abs(), c.max_abs());
        return b1 + b2;
    }

    static CoefficientProfile from_functions(const std::function<double(double)>& f_lambda,
                                             const std::function<double(double)>& f_mu,
                                             const std::function<double(double)>& f_b,
                                             const std::function<double(double)>& f_c,
                                             std::size_t n_cells = 512) {
        CoefficientProfile p;
        const std::size_t n = n_cells + 1;
        p.lambda = PiecewiseLinear::sample(-1.0, 1.0, n, f_lambda);
        p.mu = PiecewiseLinear::sample(-1.0, 1.0, n, f_mu);
        p.b = PiecewiseLinear::sample(-1.0, 1.0, n, f_b);
        p.c = PiecewiseLinear::sample(-1.0, 1.0, n, f_c);
        p.lambda_prime = finite_difference_derivative(p.lambda);
        p.mu_prime = finite_difference_derivative(p.mu);
        p.validate();
        return p;
    }

    static CoefficientProfile from_functions_with_derivatives(
        const std::function<double(double)>& f_lambda,
        const std::function<double(double)>& f_lambda_prime,
        const std::function<double(double)>& f_mu,
        const std::function<double(double)>& f_mu_prime,
        const std::function<double(double)>& f_b,
        const std::function<double(double)>& f_c, std::size_t n_cells = 512) {
        CoefficientProfile p;
        const std::size_t n = n_cells + 1;
        p.lambda = PiecewiseLinear::sample(-1.0, 1.0, n, f_lambda);
        p.mu = PiecewiseLinear::sample(-1.0, 1.0, n, f_mu);
        p.lambda_prime = PiecewiseLinear::sample(-1.0, 1.0, n, f_lambda_prime);
        p.mu_prime = PiecewiseLinear::sample(-1.0, 1.0, n, f_mu_prime);
        p.b = PiecewiseLinear::sample(-1.0, 1.0, n, f_b);
        p.c = PiecewiseLinear::sample(-1.0, 1.0, n, f_c);
        p.validate();
        return p;
    }

    /// Builds from uniformly sampled columns over [-1,1]; derivatives of the
    /// speeds are formed by centered differences (one-sided second order at
    /// the ends).
    static CoefficientProfile from_samples(std::vector<double> lambda_vals,
                                           std::vector<double> mu_vals,
                                           std::vector<double> b_vals,
                                           std::vector<double> c_vals) {
        CoefficientProfile p;
        p.lambda = PiecewiseLinear(-1.0, 1.0, std::move(lambda_vals));
        p.mu = PiecewiseLinear(-1.0, 1.0, std::move(mu_vals));
        p.b = PiecewiseLinear(-1.0, 1.0, std::move(b_vals));
        p.c = PiecewiseLinear(-1.0, 1.0, std::move(c_vals));
        p.lambda_prime = finite_difference_derivative(p.lambda);
        p.mu_prime = finite_difference_derivative(p.mu);
        p.validate();
        return p;
    }

    static PiecewiseLinear finite_difference_derivative(const PiecewiseLinear& f) {
        const std::size_t n = f.size();
        const double h = f.dx();
        std::vector<double> d(n);
        d[0] = (-3.0 * f.value(0) + 4.0 * f.value(1) - f.value(2)) / (2.0 * h);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            d[i] = (f.value(i + 1) - f.value(i - 1)) / (2.0 * h);
        }
        d[n - 1] = (3.0 * f.value(n - 1) - 4.0 * f.value(n - 2) + f.value(n - 3)) / (2.0 * h);
        return PiecewiseLinear(f.x0(), f.x1(), std::move(d));
    }
};

/// The plant model requires zero diagonal couplings; callers supplying sampled
/// a(w), d(w) columns must pass them through this gate.
inline void require_zero_diagonal(const std::vector<double>& a_vals,
                                  const std::vector<double>& d_vals, double tol = 0.0) {
    for (double x : a_vals) {
        if (std::fabs(x) > tol) {
            throw NonzeroDiagonalCoupling("diagonal coupling a(w) must be identically zero");
        }
    }
    for (double x : d_vals) {
        if (std::fabs(x) > tol) {
            throw NonzeroDiagonalCoupling("diagonal coupling d(w) must be identically zero");
        }
    }
}

/// lambda = 3 + w^2, mu = 2 + w^4, b = 3 e^{3w}, c = 1 + w.
inline CoefficientProfile paper_eq60_profile(std::size_t n_cells = 512) {
    return CoefficientProfile::from_functions_with_derivatives(
        [](double w) { return 3.0 + w * w; }, [](double w) { return 2.0 * w; },
        [](double w) { return 2.0 + w * w * w * w; }, [](double w) { return 4.0 * w * w * w; },
        [](double w) { return 3.0 * std::exp(3.0 * w); }, [](double w) { return 1.0 + w; },
        n_cells);
}

inline CoefficientProfile constant_profile(double lambda, double mu, double b, double c,
                                           std::size_t n_cells = 512) {
    return CoefficientProfile::from_functions_with_derivatives(
        [lambda](double) { return lambda; }, [](double) { return 0.0; },
        [mu](double) { return mu; }, [](double) { return 0.0; },
        [b](double) { return b; }, [c](double) { return c; }, n_cells);
}

}  // namespace hypstab
