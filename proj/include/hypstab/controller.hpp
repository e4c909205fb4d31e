#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "hypstab/errors.hpp"
#include "hypstab/kernel_solver.hpp"
#include "hypstab/simulator.hpp"
#include "hypstab/transport_geometry.hpp"

namespace hypstab {

// ============================================================================
// Feedback gains
// ============================================================================

/// Kernel traces entering the two boundary feedback laws, sampled on the
/// simulator grid:
///   g11(z) = L11(z,-1), g12(z) = L12(z,-1)   (U1, actuator at w = -1)
///   g21(z) = L21(z,+1), g22(z) = L22(z,+1)   (U2, actuator at w = +1)
/// Tf is the guaranteed settling time of the closed loop.
struct ControlGains {
    std::vector<double> z;
    std::vector<double> g11, g12, g21, g22;
    SpeedCaseTag case_tag = SpeedCaseTag::Equal;
    double Tf = 0.0;

    std::size_t n_x() const { return z.size() - 1; }
};

/// Samples one kernel row L(., w_row) on the given z-lattice. Shared by the
/// gain extraction and the transform so the two stay bit-identical.
inline std::vector<double> sample_kernel_row(const KernelGrid& kernels, KernelName name,
                                             double w_row, const std::vector<double>& z_nodes) {
    std::vector<double> out(z_nodes.size(), 0.0);
    const double aw = std::fabs(w_row);
    for (std::size_t j = 0; j < z_nodes.size(); ++j) {
        const double z = z_nodes[j];
        if (std::fabs(z) <= aw + 1e-14) {
            out[j] = kernels.value(name, std::clamp(z, -aw, aw), w_row);
        }
    }
    return out;
}

inline double settling_time(const PhiMaps& phi, SpeedCaseTag tag) {
    const double s1 = phi.phi1_span();
    const double s2 = phi.phi2_span();
    return tag == SpeedCaseTag::Equal ? std::max(s1, s2) : s1 + s2;
}

/// Extracts the w = -1 and w = +1 kernel rows and resamples them to an
/// (n_x+1)-node simulator grid.
inline ControlGains gains_from_kernels(const KernelGrid& kernels, const PhiMaps& phi,
                                       std::size_t n_x) {
    ControlGains g;
    g.case_tag = kernels.speed_case.tag;
    g.Tf = settling_time(phi, g.case_tag);
    g.z.resize(n_x + 1);
    const double dx = 2.0 / static_cast<double>(n_x);
    for (std::size_t j = 0; j <= n_x; ++j) g.z[j] = -1.0 + dx * static_cast<double>(j);
    g.g11 = sample_kernel_row(kernels, KernelName::L11, -1.0, g.z);
    g.g12 = sample_kernel_row(kernels, KernelName::L12, -1.0, g.z);
    g.g21 = sample_kernel_row(kernels, KernelName::L21, 1.0, g.z);
    g.g22 = sample_kernel_row(kernels, KernelName::L22, 1.0, g.z);
    return g;
}

// ============================================================================
// Control evaluation
// ============================================================================

/// U1 = -int (u g11 + v g12) dz,  U2 = +int (u g21 + v g22) dz, composite
/// trapezoid over [-1,1] on the shared grid.
inline std::pair<double, double> evaluate_controls(const PlantState& state,
                                                   const ControlGains& gains) {
    const std::size_t n = state.n_x();
    if (gains.n_x() != n) throw GridMismatch("state and gain grids differ");
    const double dx = 2.0 / static_cast<double>(n);
    double i1 = 0.0, i2 = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const double wgt = (j == 0 || j == n) ? 0.5 * dx : dx;
        i1 += wgt * (state.u[j] * gains.g11[j] + state.v[j] * gains.g12[j]);
        i2 += wgt * (state.u[j] * gains.g21[j] + state.v[j] * gains.g22[j]);
    }
    return {-i1, i2};
}

/// Boundary values that reproduce themselves: the quadrature in
/// evaluate_controls touches the two actuated nodes u(-1) and v(+1), so the
/// self-consistent controls solve a 2x2 linear system in (U1, U2). A state
/// carrying these values satisfies evaluate_controls(state) = (U1, U2) to
/// rounding, which is the discrete form of the boundary relations.
inline std::pair<double, double> consistent_controls(const PlantState& state,
                                                     const ControlGains& gains) {
    const std::size_t n = state.n_x();
    if (gains.n_x() != n) throw GridMismatch("state and gain grids differ");
    const double dx = 2.0 / static_cast<double>(n);
    const double w0 = 0.5 * dx;
    // quadrature sums excluding the u(-1) and v(+1) contributions
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const double wgt = (j == 0 || j == n) ? 0.5 * dx : dx;
        const double uj = (j == 0) ? 0.0 : state.u[j];
        const double vj = (j == n) ? 0.0 : state.v[j];
        s1 += wgt * (uj * gains.g11[j] + vj * gains.g12[j]);
        s2 += wgt * (uj * gains.g21[j] + vj * gains.g22[j]);
    }
    // U1 = -(s1 + w0 g11(-1) U1 + w0 g12(+1) U2)
    // U2 = +(s2 + w0 g21(-1) U1 + w0 g22(+1) U2)
    const double a = 1.0 + w0 * gains.g11[0];
    const double b = w0 * gains.g12[n];
    const double c = -w0 * gains.g21[0];
    const double d = 1.0 - w0 * gains.g22[n];
    const double det = a * d - b * c;
    const double r1 = -s1, r2 = s2;
    return {(r1 * d - b * r2) / det, (a * r2 - c * r1) / det};
}

inline BoundaryController make_feedback_controller(const ControlGains& gains) {
    return [gains](const PlantState& s) { return consistent_controls(s, gains); };
}

// ============================================================================
// Backstepping transform
// ============================================================================

/// Precomputed kernel rows on a simulator grid, turning the transform into
/// plain dot products. Row 0 is the w = -1 trace and row n_x the w = +1 trace,
/// bit-identical to the corresponding control gains.
class BacksteppingTransform {
public:
    BacksteppingTransform(const KernelGrid& kernels, std::size_t n_x) : n_(n_x) {
        const double dx = 2.0 / static_cast<double>(n_x);
        std::vector<double> z(n_x + 1);
        for (std::size_t j = 0; j <= n_x; ++j) z[j] = -1.0 + dx * static_cast<double>(j);
        rows_[0].reserve(n_x + 1);
        for (std::size_t i = 0; i <= n_x; ++i) {
            const double w = -1.0 + dx * static_cast<double>(i);
            rows_[0].push_back(sample_kernel_row(kernels, KernelName::L11, w, z));
            rows_[1].push_back(sample_kernel_row(kernels, KernelName::L12, w, z));
            rows_[2].push_back(sample_kernel_row(kernels, KernelName::L21, w, z));
            rows_[3].push_back(sample_kernel_row(kernels, KernelName::L22, w, z));
        }
    }

    std::size_t n_x() const { return n_; }

    /// alpha(w) = u(w) - int_{-w}^{w} (u L11 + v L12) dz (signed bounds), and
    /// the beta analogue.
    TargetState apply(const PlantState& state) const {
        if (state.n_x() != n_) throw GridMismatch("state and transform grids differ");
        const std::size_t n = n_;
        const double dx = 2.0 / static_cast<double>(n);
        TargetState out;
        out.t = state.t;
        out.alpha.resize(n + 1);
        out.beta.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            const std::size_t mi = n - i;
            const std::size_t lo = std::min(i, mi), hi = std::max(i, mi);
            double ia = 0.0, ib = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) {
                const double wgt = (j == lo || j == hi) ? 0.5 * dx : dx;
                ia += wgt * (state.u[j] * rows_[0][i][j] + state.v[j] * rows_[1][i][j]);
                ib += wgt * (state.u[j] * rows_[2][i][j] + state.v[j] * rows_[3][i][j]);
            }
            if (i < mi) {  // w < 0: integration bounds reverse
                ia = -ia;
                ib = -ib;
            }
            if (i == mi) ia = ib = 0.0;  // w = 0: empty interval
            out.alpha[i] = state.u[i] - ia;
            out.beta[i] = state.v[i] - ib;
        }
        return out;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::vector<double>> rows_[4];
};

/// One-off transform; builds the row cache and applies it.
inline TargetState backstepping_transform(const PlantState& state, const KernelGrid& kernels) {
    BacksteppingTransform op(kernels, state.n_x());
    return op.apply(state);
}

}  // namespace hypstab
