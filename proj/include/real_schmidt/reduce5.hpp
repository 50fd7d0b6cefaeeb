#pragma once

// Stage-1 reduction: a closed-form Ry(theta2) (x) I (x) Ry(theta0) that clears the
// |001> and |100> amplitudes of any real state.

#include <cmath>
#include <numbers>
#include <string>

#include "real_schmidt/core_states.hpp"

namespace real_schmidt {

struct Stage1Angles {
    double theta0 = 0.0;
    double theta2 = 0.0;
    // Coefficients of a1 sin(theta0) + a2 cos(theta0) = 0 and
    // b1 sin(theta2/2) + b2 cos(theta2/2) = 0.
    double a1 = 0.0;
    double a2 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
};

struct Stage1Result {
    S05State state;
    LocalOrthogonalGate gate;
    Stage1Angles angles;
};

namespace detail {

// Root of p*sin(phi) + q*cos(phi) = 0 in [0, pi); zero when p = q = 0.
inline double linear_trig_root(double p, double q) {
    if (p == 0.0 && q == 0.0) return 0.0;
    double phi = std::atan2(-q, p);
    if (phi < 0.0) phi += std::numbers::pi;
    if (phi >= std::numbers::pi) phi -= std::numbers::pi;
    return phi == 0.0 ? 0.0 : phi;
}

}  // namespace detail

inline Stage1Angles stage1_angles(const RealState8& s) {
    const double u0 = s[0], u1 = s[1], u4 = s[4], u5 = s[5];

    Stage1Angles out;
    out.a1 = -u0 * u0 + u1 * u1 - u4 * u4 + u5 * u5;
    out.a2 = -2.0 * (u0 * u1 + u4 * u5);
    out.theta0 = detail::linear_trig_root(out.a1, out.a2);

    const double h0 = out.theta0 / 2.0;
    out.b1 = -u4 * std::sin(h0) - u5 * std::cos(h0);
    out.b2 = u1 * std::cos(h0) + u0 * std::sin(h0);
    out.theta2 = 2.0 * detail::linear_trig_root(out.b1, out.b2);
    return out;
}

inline Stage1Result reduce_to_s05(const RealState8& s, const ToleranceConfig& cfg = {}) {
    const Stage1Angles angles = stage1_angles(s);
    const auto gate = LocalOrthogonalGate::rotations(angles.theta2, 0.0, angles.theta0);
    const RealState8 image = apply_local_gate(gate, s);

    const double u001 = std::abs(image[basis_index(0, 0, 1)]);
    const double u100 = std::abs(image[basis_index(1, 0, 0)]);
    if (!(u001 < cfg.zero_tol) || !(u100 < cfg.zero_tol))
        throw Error(ErrorKind::ReductionFailed,
                    "stage-1 gate left |u001| = " + format_real(u001) +
                        ", |u100| = " + format_real(u100));
    return {project_s05(image, cfg.zero_tol), gate, angles};
}

}  // namespace real_schmidt
