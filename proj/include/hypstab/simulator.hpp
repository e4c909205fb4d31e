#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "hypstab/errors.hpp"
#include "hypstab/profile.hpp"
#include "hypstab/transport_geometry.hpp"
#include "hypstab/volterra.hpp"

namespace hypstab {

// ============================================================================
// States and configuration
// ============================================================================

/// Sampled plant fields on n_x+1 uniform nodes over [-1,1]. u advects
/// rightward (inflow at w=-1 is U1), v leftward (inflow at w=+1 is U2).
struct PlantState {
    std::vector<double> u, v;
    double t = 0.0;
    double U1 = 0.0, U2 = 0.0;

    std::size_t n_x() const { return u.size() - 1; }
};

struct TargetState {
    std::vector<double> alpha, beta;
    double t = 0.0;
};

struct SimConfig {
    std::size_t n_x = 401;
    double cfl = 0.8;
    double t_final = 3.0;
    std::size_t record_every = 10;

    void validate() const {
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0,1]");
        if (n_x < 16) throw ConfigError("n_x must be at least 16");
        if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
        if (record_every == 0) throw ConfigError("record_every must be >= 1");
    }
};

inline PlantState make_plant_state(std::size_t n_x, const std::function<double(double)>& u0,
                                   const std::function<double(double)>& v0) {
    PlantState s;
    s.u.resize(n_x + 1);
    s.v.resize(n_x + 1);
    const double dx = 2.0 / static_cast<double>(n_x);
    for (std::size_t i = 0; i <= n_x; ++i) {
        const double w = -1.0 + dx * static_cast<double>(i);
        s.u[i] = u0(w);
        s.v[i] = v0(w);
    }
    return s;
}

inline double l2_norm(const std::vector<double>& f, double dx) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        acc += 0.5 * dx * (f[i] * f[i] + f[i + 1] * f[i + 1]);
    }
    return std::sqrt(acc);
}

inline double l2_norm_pair(const std::vector<double>& f, const std::vector<double>& g, double dx) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        acc += 0.5 * dx * (f[i] * f[i] + f[i + 1] * f[i + 1]);
        acc += 0.5 * dx * (g[i] * g[i] + g[i + 1] * g[i + 1]);
    }
    return std::sqrt(acc);
}

// ============================================================================
// Plant stepping
// ============================================================================

/// One explicit step: first-order upwind transport, explicit-Euler coupling
/// sources, then boundary injection u(-1)=U1, v(1)=U2.
inline PlantState step_plant(const PlantState& state, const CoefficientProfile& profile,
                             std::pair<double, double> controls, double dt) {
    const std::size_t n = state.n_x();
    const double dx = 2.0 / static_cast<double>(n);
    const double dt_max = dx / profile.max_speed();
    if (dt > dt_max * (1.0 + 1e-12)) {
        throw CflViolation("dt exceeds dx / max speed");
    }
    PlantState out = state;
    out.t = state.t + dt;
    out.U1 = controls.first;
    out.U2 = controls.second;
    const double r = dt / dx;
    for (std::size_t i = 1; i <= n; ++i) {
        const double w = -1.0 + dx * static_cast<double>(i);
        out.u[i] = state.u[i] - r * profile.lambda(w) * (state.u[i] - state.u[i - 1]) +
                   dt * profile.b(w) * state.v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double w = -1.0 + dx * static_cast<double>(i);
        out.v[i] = state.v[i] + r * profile.mu(w) * (state.v[i + 1] - state.v[i]) +
                   dt * profile.c(w) * state.u[i];
    }
    out.u[0] = controls.first;
    out.v[n] = controls.second;
    return out;
}

// ============================================================================
// Simulation drivers
// ============================================================================

using BoundaryController = std::function<std::pair<double, double>(const PlantState&)>;
using TransformHook = std::function<TargetState(const PlantState&)>;

struct SimRecord {
    double t = 0.0;
    double l2_uv = 0.0;
    double l2_alphabeta = 0.0;
    double U1 = 0.0, U2 = 0.0;
};

struct SimulationResult {
    std::vector<PlantState> snapshots;
    std::vector<TargetState> target_snapshots;  // filled when a transform hook is given
    std::vector<SimRecord> trace;
};

/// Fixed-step loop around step_plant. Controls are evaluated from the state at
/// the start of every step and injected into the boundary before the interior
/// update, so recorded states satisfy the boundary relation exactly.
inline SimulationResult simulate(const CoefficientProfile& profile, const SimConfig& config,
                                 const BoundaryController& controller = {},
                                 const TransformHook& transform = {},
                                 const std::function<double(double)>& u0 = {},
                                 const std::function<double(double)>& v0 = {}) {
    config.validate();
    profile.validate();
    const std::size_t n = config.n_x;
    const double dx = 2.0 / static_cast<double>(n);
    const double dt0 = config.cfl * dx / profile.max_speed();

    PlantState state = make_plant_state(
        n, u0 ? u0 : [](double) { return 0.0; }, v0 ? v0 : [](double) { return 0.0; });

    SimulationResult result;
    auto inject = [&](PlantState& s) {
        const auto c = controller ? controller(s) : std::pair<double, double>{0.0, 0.0};
        s.U1 = c.first;
        s.U2 = c.second;
        s.u[0] = c.first;
        s.v[n] = c.second;
    };
    auto record = [&](const PlantState& s) {
        SimRecord rec;
        rec.t = s.t;
        rec.l2_uv = l2_norm_pair(s.u, s.v, dx);
        rec.U1 = s.U1;
        rec.U2 = s.U2;
        if (transform) {
            TargetState ts = transform(s);
            rec.l2_alphabeta = l2_norm_pair(ts.alpha, ts.beta, dx);
            result.target_snapshots.push_back(std::move(ts));
        }
        result.trace.push_back(rec);
        result.snapshots.push_back(s);
    };

    inject(state);
    record(state);

    std::size_t step = 0;
    double t = 0.0;
    while (t < config.t_final - 1e-14) {
        const double dt = std::min(dt0, config.t_final - t);
        // boundary values held by the state are the controls of this step
        state = step_plant(state, profile, {state.U1, state.U2}, dt);
        inject(state);  // fresh controls for the new time level
        t = state.t;
        ++step;
        if (step % config.record_every == 0 || t >= config.t_final - 1e-14) {
            record(state);
        }
    }
    return result;
}

// ============================================================================
// Target systems
// ============================================================================

struct TargetSimulationResult {
    std::vector<TargetState> snapshots;
    std::vector<SimRecord> trace;  // l2_alphabeta used; U fields zero
};

/// Simulates the designed target dynamics with zero boundary inflow:
/// pure transport in the equal-speed case; in the faster-lambda case the beta
/// equation carries the reflection term p(w) alpha(-w,t) plus the two integral
/// couplings (and symmetrically for alpha in the faster-mu case).
inline TargetSimulationResult simulate_target(const CoefficientProfile& profile,
                                              const SpeedCase& speed_case, const SimConfig& config,
                                              const std::function<double(double)>& alpha0,
                                              const std::function<double(double)>& beta0,
                                              const FeedforwardKernels* feedforward = nullptr) {
    config.validate();
    profile.validate();
    if (speed_case.tag != SpeedCaseTag::Equal && feedforward == nullptr) {
        throw MissingFeedforward("target simulation of the unequal-speed cases needs p/q and the coupling fields");
    }
    const std::size_t n = config.n_x;
    const double dx = 2.0 / static_cast<double>(n);
    const double dt0 = config.cfl * dx / profile.max_speed();

    TargetState state;
    state.alpha.resize(n + 1);
    state.beta.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double w = -1.0 + dx * static_cast<double>(i);
        state.alpha[i] = alpha0(w);
        state.beta[i] = beta0(w);
    }
    state.alpha[0] = 0.0;
    state.beta[n] = 0.0;

    // resample coupling fields on the simulation lattice
    std::vector<double> pq(n + 1, 0.0);
    std::vector<std::vector<double>> plus(n + 1), minus(n + 1);
    if (feedforward) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double w = -1.0 + dx * static_cast<double>(i);
            pq[i] = feedforward->p_or_q(w);
            plus[i].resize(n + 1, 0.0);
            minus[i].resize(n + 1, 0.0);
            for (std::size_t j = 0; j <= n; ++j) {
                const double z = -1.0 + dx * static_cast<double>(j);
                if (std::fabs(z) <= std::fabs(w)) {
                    plus[i][j] = feedforward->plus_field.eval(z, w);
                    minus[i][j] = feedforward->minus_field.eval(z, w);
                }
            }
        }
    }

    // signed trapezoid of field*kernel over [-w, w] at row i
    auto coupling_integral = [&](const std::vector<double>& field, const std::vector<double>& kern,
                                 std::size_t i) {
        const std::size_t mi = n - i;  // node of -w_i
        const std::size_t lo = std::min(i, mi), hi = std::max(i, mi);
        double acc = 0.0;
        for (std::size_t j = lo; j < hi; ++j) {
            acc += 0.5 * dx * (field[j] * kern[j] + field[j + 1] * kern[j + 1]);
        }
        return i >= mi ? acc : -acc;  // bounds reverse for w < 0
    };

    TargetSimulationResult result;
    auto record = [&](const TargetState& s) {
        SimRecord rec;
        rec.t = s.t;
        rec.l2_alphabeta = l2_norm_pair(s.alpha, s.beta, dx);
        result.trace.push_back(rec);
        result.snapshots.push_back(s);
    };
    record(state);

    const bool beta_coupled = speed_case.tag == SpeedCaseTag::LambdaFaster;
    const bool alpha_coupled = speed_case.tag == SpeedCaseTag::MuFaster;

    double t = 0.0;
    std::size_t step = 0;
    TargetState next = state;
    while (t < config.t_final - 1e-14) {
        const double dt = std::min(dt0, config.t_final - t);
        const double r = dt / dx;
        for (std::size_t i = 1; i <= n; ++i) {
            const double w = -1.0 + dx * static_cast<double>(i);
            double src = 0.0;
            if (alpha_coupled && feedforward) {
                src = pq[i] * state.beta[n - i] + coupling_integral(state.alpha, plus[i], i) +
                      coupling_integral(state.beta, minus[i], i);
            }
            next.alpha[i] = state.alpha[i] - r * profile.lambda(w) * (state.alpha[i] - state.alpha[i - 1]) +
                            dt * src;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double w = -1.0 + dx * static_cast<double>(i);
            double src = 0.0;
            if (beta_coupled && feedforward) {
                src = pq[i] * state.alpha[n - i] + coupling_integral(state.alpha, plus[i], i) +
                      coupling_integral(state.beta, minus[i], i);
            }
            next.beta[i] = state.beta[i] + r * profile.mu(w) * (state.beta[i + 1] - state.beta[i]) +
                           dt * src;
        }
        next.alpha[0] = 0.0;
        next.beta[n] = 0.0;
        next.t = t + dt;
        std::swap(state.alpha, next.alpha);
        std::swap(state.beta, next.beta);
        state.t = next.t;
        t = state.t;
        ++step;
        if (step % config.record_every == 0 || t >= config.t_final - 1e-14) record(state);
    }
    return result;
}

/// Closed-form equal-speed target solution: transport with vanishing inflow.
inline std::pair<double, double> explicit_target_case1(
    const std::function<double(double)>& alpha0, const std::function<double(double)>& beta0,
    const PhiMaps& phi, double w, double t) {
    double alpha = 0.0, beta = 0.0;
    if (t < phi.phi1(w) - phi.phi1(-1.0)) {
        alpha = alpha0(phi.phi1.inverse(phi.phi1(w) - t));
    }
    if (t < phi.phi2(1.0) - phi.phi2(w)) {
        beta = beta0(phi.phi2.inverse(phi.phi2(w) + t));
    }
    return {alpha, beta};
}

}  // namespace hypstab
