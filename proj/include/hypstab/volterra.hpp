#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hypstab/errors.hpp"
#include "hypstab/kernel_solver.hpp"
#include "hypstab/profile.hpp"

namespace hypstab {

// ============================================================================
// Feedforward data of the faster-speed target systems
// ============================================================================

/// One scalar field on the bowtie domain, stored per w-row on the uniform
/// z-lattice z_k = -|w| .. |w| (step = the kernel row spacing). Rows exist for
/// both signs of w.
struct FeedforwardField {
    std::size_t n_w = 0;               ///< rows per half, w = 0, dw, ..., 1
    std::vector<std::vector<double>> rows_pos;  ///< w >= 0; row i has 2i+1 values
    std::vector<std::vector<double>> rows_neg;  ///< w <= 0

    double dw() const { return 1.0 / static_cast<double>(n_w - 1); }

    /// Linear interpolation in (w, z); jumps inherited from the discontinuous
    /// kernels are smeared by at most one lattice cell.
    double eval(double z, double w) const {
        const bool neg = w < 0.0;
        const double aw = std::fabs(w);
        const double r = std::clamp(aw, 0.0, 1.0) / dw();
        std::size_t i = std::min(static_cast<std::size_t>(r), n_w - 2);
        const double fw = r - static_cast<double>(i);
        const auto& rows = neg ? rows_neg : rows_pos;
        auto row_val = [&](std::size_t row) {
            const auto& rv = rows[row];
            if (rv.size() == 1) return rv[0];
            const double wrow = dw() * static_cast<double>(row);
            const double zc = std::clamp(z, -wrow, wrow);
            const double c = (zc + wrow) / dw();
            std::size_t k = std::min(static_cast<std::size_t>(c), rv.size() - 2);
            const double f = c - static_cast<double>(k);
            return rv[k] + f * (rv[k + 1] - rv[k]);
        };
        const double v0 = row_val(i);
        const double v1 = row_val(i + 1);
        return v0 + fw * (v1 - v0);
    }
};

/// p (or q) together with the integral-coupling fields of the target system:
/// D+- for the faster-lambda case, K+- for the faster-mu case.
struct FeedforwardKernels {
    SpeedCaseTag case_tag = SpeedCaseTag::LambdaFaster;
    PiecewiseLinear p_or_q;
    FeedforwardField plus_field;   // D+ or K+
    FeedforwardField minus_field;  // D- or K-
};

/// p(w) = (lambda(-w) - mu(w)) L21(-w, w). Requires faster-lambda kernels.
inline PiecewiseLinear compute_p(const KernelGrid& kernels, const CoefficientProfile& profile) {
    if (kernels.speed_case.tag != SpeedCaseTag::LambdaFaster) {
        throw WrongCase("p(w) is defined for the faster-lambda case only");
    }
    const std::size_t m = 2 * kernels.n_w - 1;
    std::vector<double> vals(m);
    const double dw = 2.0 / static_cast<double>(m - 1);
    for (std::size_t k = 0; k < m; ++k) {
        const double w = -1.0 + dw * static_cast<double>(k);
        vals[k] = (profile.lambda(-w) - profile.mu(w)) * kernels.value(KernelName::L21, -w, w);
    }
    return PiecewiseLinear(-1.0, 1.0, std::move(vals));
}

/// q(w) = (lambda(w) - mu(-w)) L12(-w, w). Requires faster-mu kernels.
inline PiecewiseLinear compute_q(const KernelGrid& kernels, const CoefficientProfile& profile) {
    if (kernels.speed_case.tag != SpeedCaseTag::MuFaster) {
        throw WrongCase("q(w) is defined for the faster-mu case only");
    }
    const std::size_t m = 2 * kernels.n_w - 1;
    std::vector<double> vals(m);
    const double dw = 2.0 / static_cast<double>(m - 1);
    for (std::size_t k = 0; k < m; ++k) {
        const double w = -1.0 + dw * static_cast<double>(k);
        vals[k] = (profile.lambda(w) - profile.mu(-w)) * kernels.value(KernelName::L12, -w, w);
    }
    return PiecewiseLinear(-1.0, 1.0, std::move(vals));
}

namespace detail {

/// Values of the four kernels restricted to the evaluation stencil of one
/// w-row of the stacked Volterra system: L(+-zeta_j, +-s_k).
struct RowKernelTable {
    // [j*(m) + k] layouts, j = zeta index, k = s index, both 0..m-1 (m = i+1)
    std::vector<double> Lpp[4], Lpm[4], Lmp[4], Lmm[4];  // (sign of first arg, sign of second)
};

/// The stacked second-kind Volterra system at fixed w (either sign):
///   F_i(zeta) = rhs_i(zeta) + int_zeta^{|w|} [ F_1 Ka(+z,s) + F_2 Kb(+z,s)
///                                            - F_3 Ka(+z,-s) - F_4 Kb(+z,-s) ] ds  (i = 1)
/// and the analogous rows for F_2 (kernels Kc, Kd), F_3, F_4 (first argument
/// -zeta). Unknowns F = (D+(z,w), D-(z,w), D+(-z,w), D-(-z,w)) on zeta in
/// [0,|w|]. Solved by Neumann iteration with trapezoid quadrature on the
/// lattice.
struct StackedRow {
    std::size_t m = 0;   // lattice nodes on [0, |w|]
    double h = 0.0;      // lattice step
    std::vector<double> rhs[4];
    // kernel tables: ka = "column 1" kernel pair (L11, L21), kb = (L12, L22)
    // indexed [row i][j (zeta)][k (s)] flattened
    std::vector<double> k_pos[4][2];  // kernels at (sign_i * zeta_j, +s_k): [i][which]
    std::vector<double> k_neg[4][2];  // kernels at (sign_i * zeta_j, -s_k)

    std::vector<std::vector<double>> solve(double tol, std::size_t max_iter,
                                           std::size_t* iterations_out,
                                           std::vector<double>* increments_out = nullptr) const {
        std::vector<std::vector<double>> F(4, std::vector<double>(m, 0.0)),
            Fn(4, std::vector<double>(m, 0.0));
        for (int i = 0; i < 4; ++i) F[i] = rhs[i];
        double prev_inc = std::numeric_limits<double>::infinity();
        int grow = 0;
        std::size_t it = 0;
        for (it = 1; it <= max_iter; ++it) {
            double inc = 0.0;
            for (int i = 0; i < 4; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    double acc = 0.0;
                    // trapezoid over s-lattice k = j..m-1
                    for (std::size_t k = j; k < m; ++k) {
                        const double wgt = (k == j || k == m - 1) ? 0.5 : 1.0;
                        if (k == j && j == m - 1) break;  // empty interval
                        const std::size_t id = j * m + k;
                        const double f = F[0][k] * k_pos[i][0][id] + F[1][k] * k_pos[i][1][id] -
                                         F[2][k] * k_neg[i][0][id] - F[3][k] * k_neg[i][1][id];
                        acc += wgt * f;
                    }
                    const double val = rhs[i][j] + h * acc;
                    inc = std::max(inc, std::fabs(val - F[i][j]));
                    Fn[i][j] = val;
                }
            }
            for (int i = 0; i < 4; ++i) F[i].swap(Fn[i]);
            if (increments_out) {
                if (increments_out->size() < it) increments_out->resize(it, 0.0);
                (*increments_out)[it - 1] = std::max((*increments_out)[it - 1], inc);
            }
            if (inc <= tol) break;
            if (inc > prev_inc) {
                if (++grow >= 5) {
                    throw NoConvergence("Volterra iteration increments keep growing");
                }
            } else {
                grow = 0;
            }
            prev_inc = inc;
        }
        if (iterations_out) *iterations_out = std::max(*iterations_out, it);
        return F;
    }
};

}  // namespace detail

/// Per-row right-hand sides of the stacked system: rhs[r][j] for the four
/// unknowns at zeta_j = j*dw, given the signed row coordinate w.
using VolterraRhsProvider =
    std::function<std::array<std::vector<double>, 4>(double w, std::size_t row_index)>;

namespace detail {

inline void fill_row_kernels(const KernelGrid& kernels, StackedRow& row, double dw) {
    const std::size_t m = row.m;
    for (int r = 0; r < 4; ++r) {
        row.k_pos[r][0].assign(m * m, 0.0);
        row.k_pos[r][1].assign(m * m, 0.0);
        row.k_neg[r][0].assign(m * m, 0.0);
        row.k_neg[r][1].assign(m * m, 0.0);
    }
    for (std::size_t j = 0; j < m; ++j) {
        const double zeta = dw * static_cast<double>(j);
        for (std::size_t k = j; k < m; ++k) {
            const double s = dw * static_cast<double>(k);
            const std::size_t id = j * m + k;
            // rows 1,3 couple through (L11, L21); rows 2,4 through (L12, L22)
            row.k_pos[0][0][id] = kernels.value(KernelName::L11, zeta, s);
            row.k_pos[0][1][id] = kernels.value(KernelName::L21, zeta, s);
            row.k_neg[0][0][id] = kernels.value(KernelName::L11, zeta, -s);
            row.k_neg[0][1][id] = kernels.value(KernelName::L21, zeta, -s);
            row.k_pos[1][0][id] = kernels.value(KernelName::L12, zeta, s);
            row.k_pos[1][1][id] = kernels.value(KernelName::L22, zeta, s);
            row.k_neg[1][0][id] = kernels.value(KernelName::L12, zeta, -s);
            row.k_neg[1][1][id] = kernels.value(KernelName::L22, zeta, -s);
            row.k_pos[2][0][id] = kernels.value(KernelName::L11, -zeta, s);
            row.k_pos[2][1][id] = kernels.value(KernelName::L21, -zeta, s);
            row.k_neg[2][0][id] = kernels.value(KernelName::L11, -zeta, -s);
            row.k_neg[2][1][id] = kernels.value(KernelName::L21, -zeta, -s);
            row.k_pos[3][0][id] = kernels.value(KernelName::L12, -zeta, s);
            row.k_pos[3][1][id] = kernels.value(KernelName::L22, -zeta, s);
            row.k_neg[3][0][id] = kernels.value(KernelName::L12, -zeta, -s);
            row.k_neg[3][1][id] = kernels.value(KernelName::L22, -zeta, -s);
        }
    }
}

}  // namespace detail

struct VolterraDiagnostics {
    std::size_t iterations = 0;               ///< worst row
    std::vector<double> increment_norms;      ///< per-iteration max across rows
};

/// Solves the stacked second-kind Volterra system row by row (independent
/// systems per w) for a caller-supplied right-hand side. Returns the two
/// assembled fields on the bowtie domain.
inline std::pair<FeedforwardField, FeedforwardField> solve_feedforward_system(
    const KernelGrid& kernels, const VolterraRhsProvider& rhs_provider, double tol = 1e-12,
    std::size_t max_iter = 200, VolterraDiagnostics* diag = nullptr) {
    const std::size_t n_w = kernels.n_w;
    const double dw = 1.0 / static_cast<double>(n_w - 1);
    FeedforwardField plus_field, minus_field;
    plus_field.n_w = minus_field.n_w = n_w;
    plus_field.rows_pos.resize(n_w);
    plus_field.rows_neg.resize(n_w);
    minus_field.rows_pos.resize(n_w);
    minus_field.rows_neg.resize(n_w);

    std::size_t iterations = 0;
    for (int side = 0; side < 2; ++side) {
        for (std::size_t i = 0; i < n_w; ++i) {
            const double w = (side == 0 ? 1.0 : -1.0) * dw * static_cast<double>(i);
            const std::size_t m = i + 1;
            detail::StackedRow row;
            row.m = m;
            row.h = dw;
            auto rhs = rhs_provider(w, i);
            for (int r = 0; r < 4; ++r) row.rhs[r] = std::move(rhs[r]);
            detail::fill_row_kernels(kernels, row, dw);
            auto F = row.solve(tol, max_iter, &iterations, diag ? &diag->increment_norms : nullptr);

            std::vector<double> plus(2 * i + 1), minus(2 * i + 1);
            for (std::size_t j = 0; j < m; ++j) {
                plus[i + j] = F[0][j];
                plus[i - j] = F[2][j];
                minus[i + j] = F[1][j];
                minus[i - j] = F[3][j];
            }
            auto& pf = side == 0 ? plus_field.rows_pos : plus_field.rows_neg;
            auto& mf = side == 0 ? minus_field.rows_pos : minus_field.rows_neg;
            pf[i] = std::move(plus);
            mf[i] = std::move(minus);
        }
    }
    if (diag) diag->iterations = iterations;
    return {std::move(plus_field), std::move(minus_field)};
}

/// Solves for the target-system coupling fields: D+- from p in the
/// faster-lambda case (right-hand sides -p(w) L11(z,-w), -p(w) L12(z,-w)),
/// K+- from q in the faster-mu case (-q(w) L21(z,-w), -q(w) L22(z,-w)).
inline FeedforwardKernels solve_feedforward(const KernelGrid& kernels,
                                            const PiecewiseLinear& p_or_q, double tol = 1e-12,
                                            std::size_t max_iter = 200,
                                            VolterraDiagnostics* diag = nullptr) {
    const bool is_d = kernels.speed_case.tag == SpeedCaseTag::LambdaFaster;
    if (!is_d && kernels.speed_case.tag != SpeedCaseTag::MuFaster) {
        throw WrongCase("feedforward fields exist for the unequal-speed cases only");
    }
    const KernelName first = is_d ? KernelName::L11 : KernelName::L21;
    const KernelName second = is_d ? KernelName::L12 : KernelName::L22;
    const double dw = 1.0 / static_cast<double>(kernels.n_w - 1);

    auto rhs_provider = [&](double w, std::size_t i) {
        const double pw = p_or_q(w);
        const std::size_t m = i + 1;
        std::array<std::vector<double>, 4> rhs;
        for (auto& r : rhs) r.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            const double zeta = dw * static_cast<double>(j);
            rhs[0][j] = -pw * kernels.value(first, zeta, -w);
            rhs[1][j] = -pw * kernels.value(second, zeta, -w);
            rhs[2][j] = -pw * kernels.value(first, -zeta, -w);
            rhs[3][j] = -pw * kernels.value(second, -zeta, -w);
        }
        return rhs;
    };

    FeedforwardKernels out;
    out.case_tag = kernels.speed_case.tag;
    out.p_or_q = p_or_q;
    auto fields = solve_feedforward_system(kernels, rhs_provider, tol, max_iter, diag);
    out.plus_field = std::move(fields.first);
    out.minus_field = std::move(fields.second);
    return out;
}

/// Applies the forward operator of the stacked system to given smooth fields:
/// returns rhs_i(zeta) = F_i(zeta) - int_zeta^{|w|} [bracket](s) ds on the
/// lattice of the given row, with the same trapezoid rule the solver uses.
/// This is the manufactured-solution companion of solve_feedforward_system.
inline std::array<std::vector<double>, 4> volterra_forward_row(
    const KernelGrid& kernels, double w, const std::function<double(double, double)>& plus_field,
    const std::function<double(double, double)>& minus_field, std::size_t row_index) {
    const double dw = 1.0 / static_cast<double>(kernels.n_w - 1);
    const std::size_t m = row_index + 1;
    detail::StackedRow row;
    row.m = m;
    row.h = dw;
    detail::fill_row_kernels(kernels, row, dw);
    std::array<std::vector<double>, 4> rhs;
    for (auto& r : rhs) r.resize(m);
    std::array<std::vector<double>, 4> F;
    for (auto& f : F) f.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double s = dw * static_cast<double>(k);
        F[0][k] = plus_field(s, w);
        F[1][k] = minus_field(s, w);
        F[2][k] = plus_field(-s, w);
        F[3][k] = minus_field(-s, w);
    }
    for (int i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t k = j; k < m; ++k) {
                if (k == j && j == m - 1) break;
                const double wgt = (k == j || k == m - 1) ? 0.5 : 1.0;
                const std::size_t id = j * m + k;
                acc += wgt * (F[0][k] * row.k_pos[i][0][id] + F[1][k] * row.k_pos[i][1][id] -
                              F[2][k] * row.k_neg[i][0][id] - F[3][k] * row.k_neg[i][1][id]);
            }
            rhs[i][j] = F[i][j] - dw * acc;
        }
    }
    return rhs;
}

}  // namespace hypstab
