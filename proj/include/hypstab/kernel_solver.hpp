#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hypstab/errors.hpp"
#include "hypstab/profile.hpp"
#include "hypstab/transport_geometry.hpp"

namespace hypstab {

// ============================================================================
// Options and diagnostics
// ============================================================================

struct KernelSolveOptions {
    std::size_t n_w = 129;          ///< nodes along w per triangle
    std::size_t n_s = 129;          ///< nodes across the triangle (fraction s)
    double tol = 1e-12;             ///< sup-norm stop on successive-approximation increments
    std::size_t max_iterations = 200;
    unsigned threads = 0;           ///< 0 = hardware concurrency
    bool start_from_zero = false;   ///< start the iteration at 0 instead of the data term
};

struct SolverDiagnostics {
    double a_const = 0.0;   ///< max{1/lambda, 1/mu}
    double b_const = 0.0;   ///< max{|lambda'|,|b|} + max{|mu'|,|c|}
    double h_bar = 0.0;     ///< max{|h1|,|h2|}
    std::vector<double> increment_norms;  ///< sup-norms of successive increments, d = 0,1,...
    std::size_t iterations = 0;           ///< operator applications until convergence
    double final_residual = 0.0;          ///< sup of the interior PDE residuals
    bool envelope_ok = true;              ///< increments within 4x the factorial envelope
    std::vector<std::string> warnings;

    double envelope(std::size_t d) const {
        double e = h_bar;
        for (std::size_t k = 1; k <= d; ++k) e *= a_const * b_const / static_cast<double>(k);
        return e;
    }
};

enum class KernelName { L11, L12, L21, L22 };

inline const char* to_string(KernelName k) {
    switch (k) {
        case KernelName::L11: return "L11";
        case KernelName::L12: return "L12";
        case KernelName::L21: return "L21";
        case KernelName::L22: return "L22";
    }
    return "?";
}

namespace detail {

// ============================================================================
// Canonical Goursat pair on the unit triangle {(z,w): |z| <= w, 0 <= w <= 1}
//
// Unknown A ("same-direction" kernel): both coordinates advected by sigma,
//   zero data on the anti-diagonal z = -w.
// Unknown B ("opposite-direction" kernel): w advected by sigma, z by -tau,
//   data h on the diagonal z = w; where the invariant Phi_sigma(w)+Phi_tau(z)
//   is negative the backward characteristic instead exits through the
//   anti-diagonal, which carries zero data (the kernel then jumps across the
//   invariant's zero level set).
//
// Along characteristics:
//   dA/dt = q_aa(z) A + q_ab(z) B
//   dB/dt = q_ba(z) A + q_bb(z) B
//
// The lower triangle E2 of the physical domain maps onto this orientation by
// the point reflection (z,w) -> (-z,-w), which mirrors the coefficients and
// flips the sign of the sources.
// ============================================================================

struct PairProblem {
    PiecewiseLinear sigma, tau;
    PiecewiseLinear q_aa, q_ab, q_ba, q_bb;
    PiecewiseLinear h;
    /// B carries the two-region structure (set from the classified speed
    /// case, not inferred from table signs, so near-equal profiles with
    /// sub-tolerance asymmetry stay single-region).
    bool two_region = false;

    TabulatedMonotone phi_sigma;   // int_0^x dy/sigma
    TabulatedMonotone phi_tau;     // int_0^x dy/tau
    TabulatedMonotone cross_diag;  // Phi_sigma + Phi_tau  (diagonal crossings of B)
    PiecewiseLinear cross_anti;    // Phi_sigma(x) + Phi_tau(-x)  (anti-diagonal crossings of B)
    TabulatedMonotone cross_same;  // Phi_sigma(x) - Phi_sigma(-x) (anti-diagonal crossings of A)
    double max_speed = 0.0;

    void build_tables(std::size_t n_phi) {
        n_phi += n_phi % 2;
        const std::size_t nodes = n_phi + 1;
        const PiecewiseLinear inv_sigma =
            PiecewiseLinear::sample(-1.0, 1.0, nodes, [&](double x) { return 1.0 / sigma(x); });
        const PiecewiseLinear inv_tau =
            PiecewiseLinear::sample(-1.0, 1.0, nodes, [&](double x) { return 1.0 / tau(x); });
        std::vector<double> ps = cumulative_trapezoid_from_zero(inv_sigma, -1.0, 1.0, nodes);
        std::vector<double> pt = cumulative_trapezoid_from_zero(inv_tau, -1.0, 1.0, nodes);
        std::vector<double> cd(nodes), ca(nodes), cs(nodes);
        for (std::size_t i = 0; i < nodes; ++i) {
            const std::size_t m = nodes - 1 - i;
            cd[i] = ps[i] + pt[i];
            ca[i] = ps[i] + pt[m];
            cs[i] = ps[i] - ps[m];
        }
        phi_sigma = TabulatedMonotone(-1.0, 1.0, std::move(ps));
        phi_tau = TabulatedMonotone(-1.0, 1.0, std::move(pt));
        cross_diag = TabulatedMonotone(-1.0, 1.0, std::move(cd));
        cross_anti = PiecewiseLinear(-1.0, 1.0, std::move(ca));
        cross_same = TabulatedMonotone(-1.0, 1.0, std::move(cs));
        max_speed = std::max(sigma.max_value(), tau.max_value());
    }

    PairProblem reflected(std::size_t n_phi) const {
        PairProblem r;
        r.sigma = sigma.mirrored();
        r.tau = tau.mirrored();
        r.q_aa = q_aa.mirrored().negated();
        r.q_ab = q_ab.mirrored().negated();
        r.q_ba = q_ba.mirrored().negated();
        r.q_bb = q_bb.mirrored().negated();
        r.h = h.mirrored();
        r.two_region = two_region;
        r.build_tables(n_phi);
        return r;
    }
};

/// Node storage for one scalar field on the canonical triangle, parameterized
/// by (w_i, s_j) with z = -w + 2 s w. Row i=0 collapses to the apex.
struct TriGrid {
    std::size_t n_w = 0, n_s = 0;
    std::vector<double> v;

    TriGrid() = default;
    TriGrid(std::size_t nw, std::size_t ns) : n_w(nw), n_s(ns), v(nw * ns, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return v[i * n_s + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * n_s + j]; }
    double w_of(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(n_w - 1); }
    double s_of(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(n_s - 1); }
    double z_of(std::size_t i, std::size_t j) const { return w_of(i) * (2.0 * s_of(j) - 1.0); }
    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::fabs(x));
        return m;
    }
};

struct PairSolution {
    TriGrid A, B;
    std::vector<std::uint8_t> b_region;  ///< 1 = diagonal-data branch, 0 = anti-diagonal branch
    bool b_discontinuous = false;
    std::vector<double> increment_norms;
    std::size_t iterations = 0;
};

/// Plain bilinear interpolation in (w, s) coordinates, clamped to the triangle.
inline double sample_plain(const TriGrid& g, double wq, double zq) {
    const double hw = 1.0 / static_cast<double>(g.n_w - 1);
    double r = std::clamp(wq, 0.0, 1.0) / hw;
    std::size_t i = std::min(static_cast<std::size_t>(r), g.n_w - 2);
    const double fw = r - static_cast<double>(i);
    const double wa = g.w_of(i), wb = g.w_of(i + 1);
    auto row_value = [&](std::size_t row, double wrow) {
        double s = wrow > 1e-300 ? 0.5 * (zq / wrow + 1.0) : 0.5;
        s = std::clamp(s, 0.0, 1.0);
        const double c = s * static_cast<double>(g.n_s - 1);
        std::size_t j = std::min(static_cast<std::size_t>(c), g.n_s - 2);
        const double fs = c - static_cast<double>(j);
        return g.at(row, j) + fs * (g.at(row, j + 1) - g.at(row, j));
    };
    const double va = row_value(i, wa);
    const double vb = row_value(i + 1, wb);
    return va + fw * (vb - va);
}

/// Bilinear interpolation restricted to nodes whose region tag matches the
/// query point; never averages across the discontinuity. Falls back to the
/// nearest same-tag node in the row when a row segment has no matching corner.
inline double sample_tagged(const TriGrid& g, const std::vector<std::uint8_t>& tags, double wq,
                            double zq, std::uint8_t qtag) {
    const double hw = 1.0 / static_cast<double>(g.n_w - 1);
    double r = std::clamp(wq, 0.0, 1.0) / hw;
    std::size_t i = std::min(static_cast<std::size_t>(r), g.n_w - 2);
    const double fw = r - static_cast<double>(i);

    auto row_value = [&](std::size_t row, double& weight_ok) -> double {
        const double wrow = g.w_of(row);
        double s = wrow > 1e-300 ? 0.5 * (zq / wrow + 1.0) : 0.5;
        s = std::clamp(s, 0.0, 1.0);
        const double c = s * static_cast<double>(g.n_s - 1);
        std::size_t j = std::min(static_cast<std::size_t>(c), g.n_s - 2);
        const double fs = c - static_cast<double>(j);
        const std::uint8_t ta = tags[row * g.n_s + j];
        const std::uint8_t tb = tags[row * g.n_s + j + 1];
        const bool oka = ta == qtag, okb = tb == qtag;
        if (oka && okb) {
            weight_ok = 1.0;
            return g.at(row, j) + fs * (g.at(row, j + 1) - g.at(row, j));
        }
        if (oka) { weight_ok = 1.0; return g.at(row, j); }
        if (okb) { weight_ok = 1.0; return g.at(row, j + 1); }
        // scan the row outward for the nearest matching node
        for (std::size_t d = 1; d < g.n_s; ++d) {
            if (j >= d && tags[row * g.n_s + (j - d)] == qtag) { weight_ok = 1.0; return g.at(row, j - d); }
            if (j + d < g.n_s && tags[row * g.n_s + (j + d)] == qtag) { weight_ok = 1.0; return g.at(row, j + d); }
        }
        weight_ok = 0.0;
        return 0.0;
    };

    double ok0 = 0.0, ok1 = 0.0;
    const double v0 = row_value(i, ok0);
    const double v1 = row_value(i + 1, ok1);
    const double w0 = (1.0 - fw) * ok0, w1 = fw * ok1;
    const double tot = w0 + w1;
    if (tot <= 0.0) return 0.0;
    return (w0 * v0 + w1 * v1) / tot;
}

/// Per-node characteristic data, fixed across the iteration.
struct NodeGeometry {
    double t_final = 0.0;
    double c_w = 0.0;       // Phi-offset for the w coordinate along the path
    double c_z = 0.0;       // Phi-offset for the z coordinate along the path
    double t_split = -1.0;  // crossing time of the region interface, < 0 = none
    std::int32_t n_int = 0;
};

inline void parallel_rows(std::size_t n_rows, unsigned threads, const std::function<void(std::size_t, std::size_t)>& body) {
    unsigned t = threads == 0 ? std::thread::hardware_concurrency() : threads;
    t = std::max(1u, std::min<unsigned>(t, 16));
    if (t == 1 || n_rows < 4) {
        body(0, n_rows);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_rows + t - 1) / t;
    for (unsigned k = 0; k < t; ++k) {
        const std::size_t lo = std::min(n_rows, k * chunk);
        const std::size_t hi = std::min(n_rows, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(body, lo, hi);
    }
    for (auto& th : pool) th.join();
}

struct EnvelopeParams {
    double a = 0.0, b = 0.0, h_bar = 0.0;
};

inline void check_grid(const KernelSolveOptions& opts) {
    if (opts.n_w < 33 || opts.n_s < 33) {
        throw std::invalid_argument("kernel grid must be at least 33x33 per triangle");
    }
}

/// Successive approximations for one canonical pair. M^0 is the data term
/// (or zero when opts.start_from_zero), M^{d} = data + T[M^{d-1}]; stops when
/// the sup-norm increment drops below opts.tol.
inline PairSolution solve_pair(const PairProblem& pb, const KernelSolveOptions& opts,
                               const EnvelopeParams& env) {
    check_grid(opts);
    const std::size_t n_w = opts.n_w, n_s = opts.n_s;
    PairSolution sol;
    sol.A = TriGrid(n_w, n_s);
    sol.B = TriGrid(n_w, n_s);
    sol.b_region.assign(n_w * n_s, 1);
    sol.b_discontinuous = pb.two_region;

    const double hw_grid = 1.0 / static_cast<double>(n_w - 1);
    const double dt_quad = hw_grid / pb.max_speed;

    // ---- geometry precomputation (iteration independent) ----
    std::vector<NodeGeometry> geo_a(n_w * n_s), geo_b(n_w * n_s);
    TriGrid b_data(n_w, n_s);
    const bool tagged = sol.b_discontinuous;
    std::optional<TabulatedMonotone> cross_anti_inv;
    if (tagged) cross_anti_inv.emplace(pb.cross_anti);
    for (std::size_t i = 0; i < n_w; ++i) {
        const double w = sol.A.w_of(i);
        const double phis_w = pb.phi_sigma(w);
        std::size_t hint = pb.phi_sigma.size() / 2;
        for (std::size_t j = 0; j < n_s; ++j) {
            const double z = sol.A.z_of(i, j);
            const double invariant = phis_w + pb.phi_tau(z);
            const std::uint8_t tag = (!tagged || invariant >= -kRegionTieTol) ? 1 : 0;
            sol.b_region[i * n_s + j] = tag;
            // A: start on the anti-diagonal, both coordinates advected by sigma
            {
                const double k = phis_w - pb.phi_sigma(z);
                const double w0 = pb.cross_same.inverse_with_hint(k, hint);
                NodeGeometry g;
                g.c_w = pb.phi_sigma(w0);
                g.c_z = pb.phi_sigma(-w0);
                g.t_final = std::max(0.0, phis_w - g.c_w);
                if (tagged && tag == 1 && g.t_final > 0.0) {
                    // the invariant increases strictly along the path, so it
                    // crosses the interface at most once; split the quadrature
                    // there to keep both segments smooth
                    auto invariant_at = [&](double t) {
                        const double zp = pb.phi_sigma.inverse(g.c_z + t);
                        return (g.c_w + t) + pb.phi_tau(zp);
                    };
                    if (invariant_at(0.0) >= -kRegionTieTol) {
                        g.t_split = 0.0;
                    } else {
                        double lo = 0.0, hi = g.t_final;
                        for (int it = 0; it < 60; ++it) {
                            const double mid = 0.5 * (lo + hi);
                            (invariant_at(mid) < 0.0 ? lo : hi) = mid;
                        }
                        g.t_split = 0.5 * (lo + hi);
                    }
                }
                geo_a[i * n_s + j] = g;
            }
            // B: diagonal branch when the invariant is nonnegative (ties included)
            {
                NodeGeometry g;
                if (tag == 1) {
                    const double ws = std::clamp(pb.cross_diag.inverse(invariant), 0.0, w);
                    g.c_w = pb.phi_sigma(ws);
                    g.c_z = pb.phi_tau(ws);
                    b_data.at(i, j) = pb.h(ws);
                } else {
                    const double w0 = std::clamp(cross_anti_inv->inverse(invariant), 0.0, w);
                    g.c_w = pb.phi_sigma(w0);
                    g.c_z = pb.phi_tau(-w0);
                    b_data.at(i, j) = 0.0;
                }
                g.t_final = std::max(0.0, phis_w - g.c_w);
                g.n_int = static_cast<std::int32_t>(std::max(8.0, std::ceil(g.t_final / dt_quad)));
                geo_b[i * n_s + j] = g;
            }
        }
    }

    // ---- iteration ----
    TriGrid a_prev(n_w, n_s), b_prev(n_w, n_s);
    if (!opts.start_from_zero) {
        b_prev.v = b_data.v;  // A's data term is identically zero
    }
    {
        double inc0 = 0.0;
        for (std::size_t k = 0; k < b_prev.v.size(); ++k) inc0 = std::max(inc0, std::fabs(b_prev.v[k]));
        sol.increment_norms.push_back(inc0);
    }

    TriGrid a_next(n_w, n_s), b_next(n_w, n_s);
    int envelope_failures = 0;

    for (std::size_t d = 1; d <= opts.max_iterations; ++d) {
        std::atomic<std::uint64_t> inc_bits{0};

        auto sweep = [&](std::size_t row_lo, std::size_t row_hi) {
            double local_inc = 0.0;
            std::size_t hint_w = pb.phi_sigma.size() / 2;
            std::size_t hint_za = hint_w, hint_zb = hint_w;

            // trapezoid along one smooth stretch of an A-characteristic; the
            // previous B iterate is sampled on the given side of the interface
            auto a_segment = [&](const NodeGeometry& g, double t0, double t1, std::uint8_t qt) {
                const double len = t1 - t0;
                if (len <= 0.0) return 0.0;
                const int n = std::max(4, static_cast<int>(std::ceil(len / dt_quad)));
                const double dt = len / n;
                double acc = 0.0;
                for (int k = 0; k <= n; ++k) {
                    const double t = t0 + dt * k;
                    const double wp = pb.phi_sigma.inverse_with_hint(g.c_w + t, hint_w);
                    const double zp = pb.phi_sigma.inverse_with_hint(g.c_z + t, hint_za);
                    const double bval = tagged ? sample_tagged(b_prev, sol.b_region, wp, zp, qt)
                                               : sample_plain(b_prev, wp, zp);
                    const double f =
                        pb.q_aa(zp) * sample_plain(a_prev, wp, zp) + pb.q_ab(zp) * bval;
                    acc += (k == 0 || k == n) ? 0.5 * f : f;
                }
                return acc * dt;
            };

            for (std::size_t i = row_lo; i < row_hi; ++i) {
                for (std::size_t j = 0; j < n_s; ++j) {
                    const std::size_t id = i * n_s + j;
                    // --- A update ---
                    {
                        const NodeGeometry& g = geo_a[id];
                        double acc = 0.0;
                        if (g.t_final > 0.0) {
                            if (g.t_split >= 0.0) {
                                acc = a_segment(g, 0.0, g.t_split, 0) +
                                      a_segment(g, g.t_split, g.t_final, 1);
                            } else {
                                acc = a_segment(g, 0.0, g.t_final, sol.b_region[id]);
                            }
                        }
                        a_next.v[id] = acc;
                        local_inc = std::max(local_inc, std::fabs(acc - a_prev.v[id]));
                    }
                    // --- B update ---
                    {
                        const NodeGeometry& g = geo_b[id];
                        double acc = 0.0;
                        if (g.t_final > 0.0) {
                            const std::uint8_t qt = sol.b_region[id];
                            const int n = g.n_int;
                            const double dt = g.t_final / n;
                            for (int k = 0; k <= n; ++k) {
                                const double t = dt * k;
                                const double wp = pb.phi_sigma.inverse_with_hint(g.c_w + t, hint_w);
                                const double zp = pb.phi_tau.inverse_with_hint(g.c_z - t, hint_zb);
                                double bval;
                                if (tagged) {
                                    bval = sample_tagged(b_prev, sol.b_region, wp, zp, qt);
                                } else {
                                    bval = sample_plain(b_prev, wp, zp);
                                }
                                const double f =
                                    pb.q_ba(zp) * sample_plain(a_prev, wp, zp) + pb.q_bb(zp) * bval;
                                acc += (k == 0 || k == n) ? 0.5 * f : f;
                            }
                            acc *= dt;
                        }
                        const double val = b_data.v[id] + acc;
                        b_next.v[id] = val;
                        local_inc = std::max(local_inc, std::fabs(val - b_prev.v[id]));
                    }
                }
            }
            // lock-free exact max-reduction (order independent)
            std::uint64_t cur = inc_bits.load(std::memory_order_relaxed);
            std::uint64_t mine;
            std::memcpy(&mine, &local_inc, sizeof mine);
            for (;;) {
                double curval;
                std::memcpy(&curval, &cur, sizeof curval);
                if (local_inc <= curval) break;
                if (inc_bits.compare_exchange_weak(cur, mine, std::memory_order_relaxed)) break;
            }
        };

        parallel_rows(n_w, opts.threads, sweep);

        std::uint64_t bits = inc_bits.load();
        double inc;
        std::memcpy(&inc, &bits, sizeof inc);
        sol.increment_norms.push_back(inc);
        std::swap(a_prev.v, a_next.v);
        std::swap(b_prev.v, b_next.v);
        sol.iterations = d;

        if (inc <= opts.tol) break;

        // factorial-decay guard (the zero start shifts the series by one)
        const std::size_t d_eff = opts.start_from_zero && d > 0 ? d - 1 : d;
        double envelope = env.h_bar;
        for (std::size_t k = 1; k <= d_eff; ++k) envelope *= env.a * env.b / static_cast<double>(k);
        if (inc > 10.0 * envelope) {
            if (++envelope_failures >= 3) {
                throw NoConvergence("successive approximations violate the factorial decay envelope");
            }
        } else {
            envelope_failures = 0;
        }
        if (d == opts.max_iterations) {
            throw NoConvergence("kernel iteration did not reach tolerance within max_iterations");
        }
    }

    sol.A.v = std::move(a_prev.v);
    sol.B.v = std::move(b_prev.v);
    sol.A.n_w = sol.B.n_w = n_w;
    sol.A.n_s = sol.B.n_s = n_s;
    return sol;
}

}  // namespace detail

// ============================================================================
// Public kernel grid
// ============================================================================

/// The four transformation kernels on the bowtie domain E = E1 u E2, together
/// with the diagonal boundary traces and the region masks of the possibly
/// discontinuous kernels. E2 values are stored on the point-reflected
/// canonical triangle; eval() hides the mapping.
class KernelGrid {
public:
    SpeedCase speed_case;
    std::size_t n_w = 0, n_s = 0;
    PiecewiseLinear h1_trace, h2_trace;

    // pair 1: A = L11, B = L12 ; pair 2: A = L22, B = L21
    detail::PairProblem prob1, prob1_r, prob2, prob2_r;
    detail::PairSolution upper1, lower1, upper2, lower2;

    bool discontinuous(KernelName k) const {
        if (k == KernelName::L12) return upper1.b_discontinuous || lower1.b_discontinuous;
        if (k == KernelName::L21) return upper2.b_discontinuous || lower2.b_discontinuous;
        return false;
    }

    /// Kernel value at (z, w), |z| <= |w|. Interpolation is bilinear in the
    /// triangle parameterization and never crosses a region boundary for the
    /// discontinuous kernels.
    double value(KernelName k, double z, double w) const {
        const bool lower_half = w < 0.0;
        const double wq = lower_half ? -w : w;
        const double zq = lower_half ? -z : z;
        const detail::PairSolution& ps = pair_solution(k, lower_half);
        const detail::PairProblem& pp = pair_problem(k, lower_half);
        const bool is_b = (k == KernelName::L12 || k == KernelName::L21);
        if (!is_b) return detail::sample_plain(ps.A, wq, zq);
        if (!ps.b_discontinuous) return detail::sample_plain(ps.B, wq, zq);
        const std::uint8_t qt =
            (pp.phi_sigma(wq) + pp.phi_tau(zq) >= -detail::kRegionTieTol) ? 1 : 0;
        return detail::sample_tagged(ps.B, ps.b_region, wq, zq, qt);
    }

    /// Region tag by the sign convention: T1 where phi1(w) + phi2(z) >= 0
    /// (the mu/lambda analogue for L21), T2 otherwise. NA for the continuous
    /// same-direction kernels.
    RegionTag region(KernelName k, double z, double w) const {
        if (k == KernelName::L11 || k == KernelName::L22) return RegionTag::NotApplicable;
        const detail::PairProblem& pp = (k == KernelName::L12) ? prob1 : prob2;
        const double inv = pp.phi_sigma(w) + pp.phi_tau(z);
        return inv >= -detail::kRegionTieTol ? RegionTag::T1 : RegionTag::T2;
    }

    const detail::PairSolution& pair_solution(KernelName k, bool lower_half) const {
        if (k == KernelName::L11 || k == KernelName::L12) return lower_half ? lower1 : upper1;
        return lower_half ? lower2 : upper2;
    }
    const detail::PairProblem& pair_problem(KernelName k, bool lower_half) const {
        if (k == KernelName::L11 || k == KernelName::L12) return lower_half ? prob1_r : prob1;
        return lower_half ? prob2_r : prob2;
    }

    /// CSV dump: case, kernel-name, w, z, value, region-tag.
    void write_csv(std::ostream& os) const;
};

// ============================================================================
// solve_kernels
// ============================================================================

inline std::pair<KernelGrid, SolverDiagnostics> solve_kernels(const CoefficientProfile& profile,
                                                              const PhiMaps& phi,
                                                              const SpeedCase& speed_case,
                                                              const KernelSolveOptions& opts = {}) {
    profile.validate();
    {
        const SpeedCase actual = classify_speed_case(profile);
        if (actual.tag != speed_case.tag) {
            throw CaseMismatch(std::string("requested case '") + to_string(speed_case.tag) +
                               "' but the profile classifies as '" + to_string(actual.tag) + "'");
        }
    }
    detail::check_grid(opts);
    const std::size_t n_phi = phi.phi1.size() - 1;

    KernelGrid grid;
    grid.speed_case = speed_case;
    grid.n_w = opts.n_w;
    grid.n_s = opts.n_s;

    const std::size_t n_prof = profile.n_nodes();
    std::vector<double> h1(n_prof), h2(n_prof);
    for (std::size_t i = 0; i < n_prof; ++i) {
        const double denom = profile.lambda.value(i) + profile.mu.value(i);
        h1[i] = profile.b.value(i) / denom;
        h2[i] = -profile.c.value(i) / denom;
    }
    grid.h1_trace = PiecewiseLinear(-1.0, 1.0, h1);
    grid.h2_trace = PiecewiseLinear(-1.0, 1.0, h2);

    SolverDiagnostics diag;
    diag.a_const = profile.reciprocal_speed_bound();
    diag.b_const = profile.coupling_bound();
    diag.h_bar = std::max(grid.h1_trace.max_abs(), grid.h2_trace.max_abs());

    if (speed_case.tag == SpeedCaseTag::LambdaFaster && std::fabs(grid.h1_trace(0.0)) > 1e-12) {
        diag.warnings.push_back("h1(0) != 0: the C0 compatibility condition fails; L12 is "
                                "discontinuous across the line phi1(w)+phi2(z)=0");
    }
    if (speed_case.tag == SpeedCaseTag::MuFaster && std::fabs(grid.h2_trace(0.0)) > 1e-12) {
        diag.warnings.push_back("h2(0) != 0: the C0 compatibility condition fails; L21 is "
                                "discontinuous across the line phi2(w)+phi1(z)=0");
    }

    // pair 1: (L11, L12)
    grid.prob1.sigma = profile.lambda;
    grid.prob1.tau = profile.mu;
    grid.prob1.q_aa = profile.lambda_prime.negated();
    grid.prob1.q_ab = profile.c.negated();
    grid.prob1.q_ba = profile.b.negated();
    grid.prob1.q_bb = profile.mu_prime;
    grid.prob1.h = grid.h1_trace;
    grid.prob1.two_region = speed_case.tag == SpeedCaseTag::LambdaFaster;
    grid.prob1.build_tables(n_phi);
    grid.prob1_r = grid.prob1.reflected(n_phi);

    // pair 2: (L22, L21)
    grid.prob2.sigma = profile.mu;
    grid.prob2.tau = profile.lambda;
    grid.prob2.q_aa = profile.mu_prime.negated();
    grid.prob2.q_ab = profile.b;
    grid.prob2.q_ba = profile.c;
    grid.prob2.q_bb = profile.lambda_prime;
    grid.prob2.h = grid.h2_trace;
    grid.prob2.two_region = speed_case.tag == SpeedCaseTag::MuFaster;
    grid.prob2.build_tables(n_phi);
    grid.prob2_r = grid.prob2.reflected(n_phi);

    const detail::EnvelopeParams env{diag.a_const, diag.b_const, diag.h_bar};
    grid.upper1 = detail::solve_pair(grid.prob1, opts, env);
    grid.lower1 = detail::solve_pair(grid.prob1_r, opts, env);
    grid.upper2 = detail::solve_pair(grid.prob2, opts, env);
    grid.lower2 = detail::solve_pair(grid.prob2_r, opts, env);

    // merge per-solve increment histories into one envelope-comparable record
    const detail::PairSolution* sols[4] = {&grid.upper1, &grid.lower1, &grid.upper2, &grid.lower2};
    std::size_t len = 0;
    for (auto* s : sols) {
        len = std::max(len, s->increment_norms.size());
        diag.iterations = std::max(diag.iterations, s->iterations);
    }
    diag.increment_norms.assign(len, 0.0);
    for (auto* s : sols) {
        for (std::size_t d = 0; d < s->increment_norms.size(); ++d) {
            diag.increment_norms[d] = std::max(diag.increment_norms[d], s->increment_norms[d]);
        }
    }
    diag.envelope_ok = true;
    for (std::size_t d = 0; d < diag.increment_norms.size(); ++d) {
        const std::size_t d_eff = opts.start_from_zero && d > 0 ? d - 1 : d;
        if (diag.increment_norms[d] > 4.0 * diag.envelope(d_eff) + 1e-300) {
            diag.envelope_ok = false;
            break;
        }
    }

    return {std::move(grid), std::move(diag)};
}

// ============================================================================
// Residual and bound reports
// ============================================================================

struct ResidualReport {
    /// sup and RMS of the PDE residual per kernel, interior nodes at least two
    /// cells away from the boundaries and the region interface.
    double sup_l11 = 0, sup_l12 = 0, sup_l21 = 0, sup_l22 = 0;
    double l2_l11 = 0, l2_l12 = 0, l2_l21 = 0, l2_l22 = 0;
    double sup(KernelName k) const {
        switch (k) {
            case KernelName::L11: return sup_l11;
            case KernelName::L12: return sup_l12;
            case KernelName::L21: return sup_l21;
            case KernelName::L22: return sup_l22;
        }
        return 0;
    }
    double max_sup() const { return std::max(std::max(sup_l11, sup_l12), std::max(sup_l21, sup_l22)); }
};

namespace detail {

/// Centered-difference residual of the canonical pair PDEs on one triangle.
/// Derivatives follow the chain rule of the (w,s) parameterization:
///   L_z = D_s / (2w),   L_w = D_w - (2s-1) D_s / (2w).
inline void pair_residual(const PairProblem& pb, const PairSolution& ps, double& sup_a,
                          double& l2_a, double& sup_b, double& l2_b) {
    const std::size_t n_w = ps.A.n_w, n_s = ps.A.n_s;
    const double hw = 1.0 / static_cast<double>(n_w - 1);
    const double hs = 1.0 / static_cast<double>(n_s - 1);
    double sa = 0, sb = 0, qa = 0, qb = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 2; i + 2 < n_w; ++i) {
        const double w = ps.A.w_of(i);
        for (std::size_t j = 2; j + 2 < n_s; ++j) {
            if (ps.b_discontinuous) {
                bool mixed = false;
                const std::uint8_t t0 = ps.b_region[i * n_s + j];
                for (std::size_t ii = i - 2; ii <= i + 2 && !mixed; ++ii)
                    for (std::size_t jj = j - 2; jj <= j + 2; ++jj)
                        if (ps.b_region[ii * n_s + jj] != t0) { mixed = true; break; }
                if (mixed) continue;
            }
            const double s = ps.A.s_of(j);
            const double z = ps.A.z_of(i, j);
            const double a = ps.A.at(i, j), b = ps.B.at(i, j);

            const double a_w = (ps.A.at(i + 1, j) - ps.A.at(i - 1, j)) / (2 * hw);
            const double a_s = (ps.A.at(i, j + 1) - ps.A.at(i, j - 1)) / (2 * hs);
            const double b_w = (ps.B.at(i + 1, j) - ps.B.at(i - 1, j)) / (2 * hw);
            const double b_s = (ps.B.at(i, j + 1) - ps.B.at(i, j - 1)) / (2 * hs);

            const double az = a_s / (2 * w);
            const double aw = a_w - (2 * s - 1) * az;
            const double bz = b_s / (2 * w);
            const double bw = b_w - (2 * s - 1) * bz;

            const double ra = pb.sigma(w) * aw + pb.sigma(z) * az - (pb.q_aa(z) * a + pb.q_ab(z) * b);
            const double rb = pb.sigma(w) * bw - pb.tau(z) * bz - (pb.q_ba(z) * a + pb.q_bb(z) * b);
            sa = std::max(sa, std::fabs(ra));
            sb = std::max(sb, std::fabs(rb));
            qa += ra * ra;
            qb += rb * rb;
            ++cnt;
        }
    }
    sup_a = sa;
    sup_b = sb;
    l2_a = cnt ? std::sqrt(qa / cnt) : 0.0;
    l2_b = cnt ? std::sqrt(qb / cnt) : 0.0;
}

}  // namespace detail

inline ResidualReport kernel_residual(const KernelGrid& g, const CoefficientProfile&) {
    ResidualReport r;
    double sa, la, sb, lb;
    detail::pair_residual(g.prob1, g.upper1, sa, la, sb, lb);
    r.sup_l11 = sa; r.l2_l11 = la; r.sup_l12 = sb; r.l2_l12 = lb;
    detail::pair_residual(g.prob1_r, g.lower1, sa, la, sb, lb);
    r.sup_l11 = std::max(r.sup_l11, sa); r.l2_l11 = std::max(r.l2_l11, la);
    r.sup_l12 = std::max(r.sup_l12, sb); r.l2_l12 = std::max(r.l2_l12, lb);
    detail::pair_residual(g.prob2, g.upper2, sa, la, sb, lb);
    r.sup_l22 = sa; r.l2_l22 = la; r.sup_l21 = sb; r.l2_l21 = lb;
    detail::pair_residual(g.prob2_r, g.lower2, sa, la, sb, lb);
    r.sup_l22 = std::max(r.sup_l22, sa); r.l2_l22 = std::max(r.l2_l22, la);
    r.sup_l21 = std::max(r.sup_l21, sb); r.l2_l21 = std::max(r.l2_l21, lb);
    return r;
}

struct BoundCheckReport {
    bool pass = true;
    /// min over nodes of  h_bar e^{a b |w|} - |kernel|  (nonnegative = pass).
    double worst_margin = 0.0;
};

/// Verifies the series bound pointwise: every node value must satisfy
/// |L(z,w)| <= h_bar exp(a b |w|).
inline BoundCheckReport kernel_bound_check(const KernelGrid& g, const SolverDiagnostics& diag) {
    BoundCheckReport rep;
    double worst = std::numeric_limits<double>::infinity();
    auto scan = [&](const detail::TriGrid& t) {
        for (std::size_t i = 0; i < t.n_w; ++i) {
            const double bound = diag.h_bar * std::exp(diag.a_const * diag.b_const * t.w_of(i));
            for (std::size_t j = 0; j < t.n_s; ++j) {
                worst = std::min(worst, bound - std::fabs(t.at(i, j)));
            }
        }
    };
    scan(g.upper1.A); scan(g.upper1.B); scan(g.lower1.A); scan(g.lower1.B);
    scan(g.upper2.A); scan(g.upper2.B); scan(g.lower2.A); scan(g.lower2.B);
    rep.worst_margin = worst;
    rep.pass = worst >= 0.0;
    return rep;
}

// ============================================================================
// CSV export
// ============================================================================

inline void KernelGrid::write_csv(std::ostream& os) const {
    os << "case,kernel,w,z,value,region\n";
    char buf[128];
    auto emit = [&](KernelName name, const detail::TriGrid& t, bool lower_half, bool is_b) {
        for (std::size_t i = 0; i < t.n_w; ++i) {
            for (std::size_t j = 0; j < t.n_s; ++j) {
                const double w = lower_half ? -t.w_of(i) : t.w_of(i);
                const double z = lower_half ? -t.z_of(i, j) : t.z_of(i, j);
                const char* tag = is_b ? to_string(region(name, z, w)) : "NA";
                std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%s\n",
                              static_cast<int>(speed_case.tag) + 1, to_string(name), w, z,
                              t.at(i, j), tag);
                os << buf;
            }
        }
    };
    emit(KernelName::L11, upper1.A, false, false);
    emit(KernelName::L11, lower1.A, true, false);
    emit(KernelName::L12, upper1.B, false, true);
    emit(KernelName::L12, lower1.B, true, true);
    emit(KernelName::L21, upper2.B, false, true);
    emit(KernelName::L21, lower2.B, true, true);
    emit(KernelName::L22, upper2.A, false, false);
    emit(KernelName::L22, lower2.A, true, false);
}

}  // namespace hypstab
