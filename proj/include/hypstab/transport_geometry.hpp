#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>

#include "hypstab/errors.hpp"
#include "hypstab/profile.hpp"

namespace hypstab {

// ============================================================================
// Speed-case classification
// ============================================================================

enum class SpeedCaseTag { Equal, LambdaFaster, MuFaster };

struct SpeedCase {
    SpeedCaseTag tag = SpeedCaseTag::Equal;
    /// min over the grid of |lambda(w) - mu(-w)|, in speed units.
    double margin = 0.0;
};

inline const char* to_string(SpeedCaseTag t) {
    switch (t) {
        case SpeedCaseTag::Equal: return "equal";
        case SpeedCaseTag::LambdaFaster: return "lambda-faster";
        case SpeedCaseTag::MuFaster: return "mu-faster";
    }
    return "?";
}

/// Evaluates g(w) = lambda(w) - mu(-w) at the profile nodes and classifies the
/// speed pair. `tol` is relative to the largest speed sample.
inline SpeedCase classify_speed_case(const CoefficientProfile& profile, double tol = 1e-10) {
    profile.validate();
    const std::size_t n = profile.n_nodes();
    const double scale = profile.max_speed();
    double gmin = std::numeric_limits<double>::infinity();
    double gmax = -std::numeric_limits<double>::infinity();
    double amin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = profile.lambda.value(i) - profile.mu.value(n - 1 - i);
        gmin = std::min(gmin, g);
        gmax = std::max(gmax, g);
        amin = std::min(amin, std::fabs(g));
    }
    SpeedCase sc;
    sc.margin = amin;
    const double T = tol * scale;
    if (std::max(std::fabs(gmin), std::fabs(gmax)) <= T) {
        sc.tag = SpeedCaseTag::Equal;
    } else if (gmin > 0.0) {
        sc.tag = SpeedCaseTag::LambdaFaster;
    } else if (gmax < 0.0) {
        sc.tag = SpeedCaseTag::MuFaster;
    } else {
        throw MixedSignSpeeds("lambda(w) - mu(-w) changes sign; no speed case applies");
    }
    return sc;
}

// ============================================================================
// Travel-time maps
// ============================================================================

/// Tabulated travel-time maps:
///   phi1(w) = int_0^w dy/lambda(y)      strictly increasing
///   phi2(w) = int_0^w dy/mu(y)          strictly increasing
///   phi3    = phi1 + phi2               strictly increasing
///   phi4(w) = phi1(w) + phi2(-w)        monotone; direction depends on the case
/// plus the odd parts phi1_odd(w) = phi1(w) - phi1(-w) (and same for phi2),
/// which give the travel time between mirrored points and locate anti-diagonal
/// crossings of same-speed characteristics.
struct PhiMaps {
    TabulatedMonotone phi1, phi2, phi3;
    PiecewiseLinear phi4;  // identically zero in the equal-speed case, hence not always monotone
    TabulatedMonotone phi1_odd, phi2_odd;
    /// phi_i(1) - phi_i(-1), signed, i = 1..4.
    std::array<double, 4> spans{};

    double phi1_span() const { return spans[0]; }
    double phi2_span() const { return spans[1]; }
    double phi3_span() const { return spans[2]; }
};

/// Builds the maps by cumulative trapezoid integration from w=0 outward on a
/// uniform grid with n cells (n is rounded up to even so the grid is symmetric
/// about 0). Inverses resolve to 1e-12 in the argument.
inline PhiMaps build_phi_maps(const CoefficientProfile& profile, std::size_t n = 2048) {
    profile.validate();
    if (n < 16) throw std::invalid_argument("build_phi_maps: need n >= 16");
    n += n % 2;
    const std::size_t nodes = n + 1;

    const PiecewiseLinear inv_lambda =
        PiecewiseLinear::sample(-1.0, 1.0, nodes, [&](double w) { return 1.0 / profile.lambda(w); });
    const PiecewiseLinear inv_mu =
        PiecewiseLinear::sample(-1.0, 1.0, nodes, [&](double w) { return 1.0 / profile.mu(w); });

    std::vector<double> p1 = cumulative_trapezoid_from_zero(inv_lambda, -1.0, 1.0, nodes);
    std::vector<double> p2 = cumulative_trapezoid_from_zero(inv_mu, -1.0, 1.0, nodes);

    std::vector<double> p3(nodes), p4(nodes), o1(nodes), o2(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        const std::size_t m = nodes - 1 - i;  // node at -w_i
        p3[i] = p1[i] + p2[i];
        p4[i] = p1[i] + p2[m];
        o1[i] = p1[i] - p1[m];
        o2[i] = p2[i] - p2[m];
    }

    PhiMaps maps;
    maps.spans = {p1.back() - p1.front(), p2.back() - p2.front(), p3.back() - p3.front(),
                  p4.back() - p4.front()};
    maps.phi1 = TabulatedMonotone(-1.0, 1.0, std::move(p1));
    maps.phi2 = TabulatedMonotone(-1.0, 1.0, std::move(p2));
    maps.phi3 = TabulatedMonotone(-1.0, 1.0, std::move(p3));
    maps.phi4 = PiecewiseLinear(-1.0, 1.0, std::move(p4));
    maps.phi1_odd = TabulatedMonotone(-1.0, 1.0, std::move(o1));
    maps.phi2_odd = TabulatedMonotone(-1.0, 1.0, std::move(o2));
    return maps;
}

// ============================================================================
// Characteristic curves on the upper triangle E1
// ============================================================================

enum class RegionTag { T1, T2, NotApplicable };

inline const char* to_string(RegionTag t) {
    switch (t) {
        case RegionTag::T1: return "T1";
        case RegionTag::T2: return "T2";
        case RegionTag::NotApplicable: return "NA";
    }
    return "?";
}

/// A characteristic segment ending at the queried (z, w), starting on the
/// boundary of E1 at t = 0 and reaching (z, w) at t = t_final.
struct CharacteristicPath {
    double t_final = 0.0;
    double start_z = 0.0, start_w = 0.0;
    RegionTag region_tag = RegionTag::NotApplicable;
    std::function<double(double)> z_of_t;
    std::function<double(double)> w_of_t;
};

namespace detail {

constexpr double kDomainTol = 1e-12;
constexpr double kRegionTieTol = 1e-12;  // within this of the T1/T2 boundary -> T1

inline void require_in_e1(double z, double w) {
    if (w < -kDomainTol || w > 1.0 + kDomainTol || z < -w - kDomainTol || z > w + kDomainTol) {
        throw OutOfDomain("point (z,w)=(" + std::to_string(z) + "," + std::to_string(w) +
                          ") lies outside the triangle E1");
    }
}

}  // namespace detail

/// Characteristic of the same-speed family (both coordinates advected by
/// lambda), starting on the anti-diagonal z = -w. The start point solves
/// phi1(w0) - phi1(-w0) = phi1(w) - phi1(z); for even lambda this reduces to
/// the closed forms w0 = phi1^{-1}((phi1(w)-phi1(z))/2) and
/// t_final = (phi1(z)+phi1(w))/2.
inline CharacteristicPath characteristic_l11(double z, double w, const PhiMaps& phi) {
    detail::require_in_e1(z, w);
    const double k = phi.phi1(w) - phi.phi1(z);
    const double w0 = phi.phi1_odd.inverse(k);
    const double cw = phi.phi1(w0);
    const double cz = phi.phi1(-w0);

    CharacteristicPath path;
    path.t_final = std::max(0.0, phi.phi1(w) - cw);
    path.start_w = w0;
    path.start_z = -w0;
    path.region_tag = RegionTag::NotApplicable;
    auto phi1 = std::make_shared<TabulatedMonotone>(phi.phi1);
    path.w_of_t = [phi1, cw](double t) { return phi1->inverse(t + cw); };
    path.z_of_t = [phi1, cz](double t) { return phi1->inverse(t + cz); };
    return path;
}

/// Characteristic of the opposite-speed family (w advected by lambda, z by
/// -mu). In region T1 = {phi1(w) + phi2(z) >= 0} the segment starts on the
/// diagonal at w* = phi3^{-1}(phi1(w)+phi2(z)); in T2 (faster-lambda case
/// only) it starts on the anti-diagonal at w0 = phi4^{-1}(phi1(w)+phi2(z)).
inline CharacteristicPath characteristic_l12(double z, double w, const PhiMaps& phi,
                                             const SpeedCase& speed_case) {
    detail::require_in_e1(z, w);
    const double invariant = phi.phi1(w) + phi.phi2(z);

    CharacteristicPath path;
    double cw = 0.0, cz = 0.0;
    if (invariant >= -detail::kRegionTieTol || speed_case.tag != SpeedCaseTag::LambdaFaster) {
        const double ws = std::clamp(phi.phi3.inverse(invariant), 0.0, w);
        path.region_tag = RegionTag::T1;
        path.start_w = ws;
        path.start_z = ws;
        cw = phi.phi1(ws);
        cz = phi.phi2(ws);
    } else {
        TabulatedMonotone phi4(phi.phi4);
        const double w0 = std::clamp(phi4.inverse(invariant), 0.0, w);
        path.region_tag = RegionTag::T2;
        path.start_w = w0;
        path.start_z = -w0;
        cw = phi.phi1(w0);
        cz = phi.phi2(-w0);
    }
    path.t_final = std::max(0.0, phi.phi1(w) - cw);
    auto phi1 = std::make_shared<TabulatedMonotone>(phi.phi1);
    auto phi2 = std::make_shared<TabulatedMonotone>(phi.phi2);
    path.w_of_t = [phi1, cw](double t) { return phi1->inverse(t + cw); };
    path.z_of_t = [phi2, cz](double t) { return phi2->inverse(cz - t); };
    return path;
}

}  // namespace hypstab
