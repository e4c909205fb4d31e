#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace hypstab {

/// Function sampled at uniformly spaced nodes on [x0, x1], evaluated by linear
/// interpolation between nodes and clamped outside the interval.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;

    PiecewiseLinear(double x0, double x1, std::vector<double> values)
        : x0_(x0), x1_(x1), v_(std::move(values)) {
        if (v_.size() < 2 || !(x1_ > x0_)) {
            throw std::invalid_argument("PiecewiseLinear: need >= 2 nodes and x1 > x0");
        }
        dx_ = (x1_ - x0_) / static_cast<double>(v_.size() - 1);
    }

    static PiecewiseLinear sample(double x0, double x1, std::size_t n_nodes,
                                  const std::function<double(double)>& f) {
        std::vector<double> v(n_nodes);
        const double dx = (x1 - x0) / static_cast<double>(n_nodes - 1);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            v[i] = f(x0 + dx * static_cast<double>(i));
        }
        return PiecewiseLinear(x0, x1, std::move(v));
    }

    double operator()(double x) const {
        if (x <= x0_) return v_.front();
        if (x >= x1_) return v_.back();
        const double t = (x - x0_) / dx_;
        std::size_t i = static_cast<std::size_t>(t);
        if (i >= v_.size() - 1) i = v_.size() - 2;
        const double f = t - static_cast<double>(i);
        return v_[i] + f * (v_[i + 1] - v_[i]);
    }

    std::size_t size() const { return v_.size(); }
    double x0() const { return x0_; }
    double x1() const { return x1_; }
    double dx() const { return dx_; }
    double node(std::size_t i) const { return x0_ + dx_ * static_cast<double>(i); }
    double value(std::size_t i) const { return v_[i]; }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    double min_value() const { return *std::min_element(v_.begin(), v_.end()); }
    double max_value() const { return *std::max_element(v_.begin(), v_.end()); }
    double max_abs() const {
        double m = 0.0;
        for (double x : v_) m = std::max(m, std::fabs(x));
        return m;
    }

    /// Samples reversed left-to-right: g(x) = f(-x) on a grid symmetric about 0.
    PiecewiseLinear mirrored() const {
        std::vector<double> r(v_.rbegin(), v_.rend());
        return PiecewiseLinear(-x1_, -x0_, std::move(r));
    }

    PiecewiseLinear negated() const {
        std::vector<double> r(v_);
        for (double& x : r) x = -x;
        return PiecewiseLinear(x0_, x1_, std::move(r));
    }

private:
    double x0_ = 0.0, x1_ = 1.0, dx_ = 1.0;
    std::vector<double> v_;
};

/// Strictly monotone tabulated map on a uniform grid with inverse evaluation.
/// The inverse locates the bracketing cell by bisection on the table and takes
/// one Newton step with the cell slope, which resolves the piecewise-linear
/// interpolant exactly.
class TabulatedMonotone {
public:
    TabulatedMonotone() = default;

    TabulatedMonotone(double x0, double x1, std::vector<double> values)
        : f_(x0, x1, std::move(values)) {
        detect_direction();
    }

    explicit TabulatedMonotone(PiecewiseLinear f) : f_(std::move(f)) { detect_direction(); }

    double operator()(double x) const { return f_(x); }
    const PiecewiseLinear& table() const { return f_; }
    std::size_t size() const { return f_.size(); }
    double node(std::size_t i) const { return f_.node(i); }
    double value(std::size_t i) const { return f_.value(i); }
    int direction() const { return dir_; }
    bool increasing() const { return dir_ > 0; }

    double y_min() const { return dir_ > 0 ? f_.value(0) : f_.value(f_.size() - 1); }
    double y_max() const { return dir_ > 0 ? f_.value(f_.size() - 1) : f_.value(0); }
    double span() const { return f_.value(f_.size() - 1) - f_.value(0); }

    double inverse(double y) const {
        std::size_t hint = f_.size() / 2;
        return inverse_with_hint(y, hint);
    }

    /// Inverse evaluation with a persistent cell hint; amortized O(1) for
    /// monotone query sequences.
    double inverse_with_hint(double y, std::size_t& hint) const {
        const std::size_t n = f_.size();
        const double ylo = f_.value(0), yhi = f_.value(n - 1);
        if (dir_ > 0) {
            if (y <= ylo) return f_.x0();
            if (y >= yhi) return f_.x1();
        } else {
            if (y >= ylo) return f_.x0();
            if (y <= yhi) return f_.x1();
        }
        std::size_t i = std::min(hint, n - 2);
        // Walk from the hint while the target lies outside the cell.
        if (dir_ > 0) {
            while (i > 0 && y < f_.value(i)) --i;
            while (i < n - 2 && y > f_.value(i + 1)) ++i;
        } else {
            while (i > 0 && y > f_.value(i)) --i;
            while (i < n - 2 && y < f_.value(i + 1)) ++i;
        }
        hint = i;
        const double va = f_.value(i), vb = f_.value(i + 1);
        const double slope = (vb - va) / f_.dx();
        double x = f_.node(i);
        if (slope != 0.0) x += (y - va) / slope;  // one Newton step; exact on the PL cell
        const double lo = f_.node(i), hi = f_.node(i + 1);
        return std::clamp(x, lo, hi);
    }

private:
    void detect_direction() {
        const std::size_t n = f_.size();
        dir_ = f_.value(n - 1) >= f_.value(0) ? +1 : -1;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double d = f_.value(i + 1) - f_.value(i);
            if (dir_ > 0 ? d <= 0.0 : d >= 0.0) {
                throw std::invalid_argument("TabulatedMonotone: values are not strictly monotone");
            }
        }
    }

    PiecewiseLinear f_;
    int dir_ = +1;
};

/// Cumulative trapezoid of `integrand` anchored at x=0, on a uniform grid over
/// [x0, x1] that contains 0 as a node (node count must make the grid symmetric
/// when x0 = -x1). Returns node values of F(x) = int_0^x integrand(y) dy.
inline std::vector<double> cumulative_trapezoid_from_zero(const PiecewiseLinear& integrand,
                                                          double x0, double x1,
                                                          std::size_t n_nodes) {
    std::vector<double> out(n_nodes, 0.0);
    const double dx = (x1 - x0) / static_cast<double>(n_nodes - 1);
    // locate the node at (or nearest to) zero
    const double t0 = (0.0 - x0) / dx;
    const std::size_t i0 = static_cast<std::size_t>(std::llround(t0));
    std::vector<double> g(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) g[i] = integrand(x0 + dx * static_cast<double>(i));
    out[i0] = 0.0;
    for (std::size_t i = i0; i + 1 < n_nodes; ++i) {
        out[i + 1] = out[i] + 0.5 * dx * (g[i] + g[i + 1]);
    }
    for (std::size_t i = i0; i > 0; --i) {
        out[i - 1] = out[i] - 0.5 * dx * (g[i] + g[i - 1]);
    }
    return out;
}

}  // namespace hypstab
