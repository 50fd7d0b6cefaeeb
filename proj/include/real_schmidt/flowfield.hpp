#pragma once

// Tangent vector field on M whose integral curves stay inside one local-orthogonal
// orbit, together with its angle rates, first integrals, equilibrium sets and a
// flow integrator that tracks the accumulated gate angles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/controlled_step_result.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>

#include "real_schmidt/core_states.hpp"

namespace real_schmidt {

/// Components X1..X6 in the 6-coordinate chart of M.
struct TangentVector6 {
    std::array<double, 6> v{};

    double operator[](std::size_t i) const { return v[i]; }

    double norm() const {
        double acc = 0.0;
        for (double c : v) acc += c * c;
        return std::sqrt(acc);
    }

    double dot(const S05State& x) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < 6; ++i) acc += v[i] * x[i];
        return acc;
    }
};

struct AngleRates {
    double l0 = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

struct InvariantVector {
    double i0 = 0.0;
    double i2 = 0.0;  // purity of qubit 0
    double i3 = 0.0;  // purity of qubit 1
    double i4 = 0.0;  // purity of qubit 2

    std::array<double, 4> as_array() const { return {i0, i2, i3, i4}; }
};

inline TangentVector6 vector_field(const S05State& x) {
    const auto [x1, x2, x3, x4, x5, x6] = x.coords();
    const double d14 = x1 * x1 - x4 * x4;
    const double p = x1 * x3 + x4 * x5;
    const double q = x3 * x4 + x1 * x5;
    return {{
        x2 * d14,
        -x1 * x1 * x1 + (x3 * x3 + x4 * x4 + x5 * x5) * x1 + 2.0 * x3 * x4 * x5,
        q * x6 - x2 * p,
        d14 * x6,
        p * x6 - x2 * q,
        2.0 * x4 * x4 * x4 + (x2 * x2 + x6 * x6 - 1.0) * x4 - 2.0 * x1 * x3 * x5,
    }};
}

inline AngleRates angle_rates(const S05State& x) {
    const auto [x1, x2, x3, x4, x5, x6] = x.coords();
    return {-2.0 * (x1 * x3 + x4 * x5), 2.0 * (x4 * x4 - x1 * x1), -2.0 * (x3 * x4 + x1 * x5)};
}

inline InvariantVector invariants(const S05State& x) {
    const auto [x1, x2, x3, x4, x5, x6] = x.coords();
    const double s1 = x1 * x1, s2 = x2 * x2, s3 = x3 * x3, s4 = x4 * x4, s5 = x5 * x5,
                 s6 = x6 * x6;

    InvariantVector out;
    const double p = x2 * x4 - x1 * x6;
    out.i0 = p * p + 4.0 * x1 * x3 * x4 * x5;
    out.i2 = 2.0 * s3 * s3 + 2.0 * (s2 + 2.0 * s4 + 2.0 * s6 - 1.0) * s3 + 4.0 * x2 * x5 * x6 * x3 +
             2.0 * s4 * s4 + 2.0 * s6 * s6 + 2.0 * s5 * s6 - 2.0 * s6 + s4 * (4.0 * s6 - 2.0) + 1.0;
    out.i3 = s1 * s1 + 2.0 * (s2 + s4) * s1 + 4.0 * x2 * x4 * x6 * x1 + s2 * s2 + s3 * s3 +
             s4 * s4 + s5 * s5 + s6 * s6 + 2.0 * s3 * s5 + 2.0 * s3 * s6 + 2.0 * s4 * s6 +
             2.0 * s5 * s6 + 2.0 * s2 * (s3 + s5 + s6);
    out.i4 = 2.0 * s4 * s4 + (4.0 * s5 + 4.0 * s6 - 2.0) * s4 + 2.0 * s5 * s5 + 2.0 * s6 * s6 +
             2.0 * s3 * s6 - 2.0 * s6 + 4.0 * x2 * x3 * x5 * x6 + 2.0 * s5 * (s2 + 2.0 * s6 - 1.0) +
             1.0;
    return out;
}

/// Closed-form gradients in R^6 of (I0, I2, I3, I4), in that order.
inline std::array<std::array<double, 6>, 4> invariant_gradients(const S05State& x) {
    const auto [x1, x2, x3, x4, x5, x6] = x.coords();
    const double s1 = x1 * x1, s2 = x2 * x2, s3 = x3 * x3, s4 = x4 * x4, s5 = x5 * x5,
                 s6 = x6 * x6;
    const double p = x2 * x4 - x1 * x6;

    std::array<std::array<double, 6>, 4> g{};
    g[0] = {
        -2.0 * p * x6 + 4.0 * x3 * x4 * x5,
        2.0 * p * x4,
        4.0 * x1 * x4 * x5,
        2.0 * p * x2 + 4.0 * x1 * x3 * x5,
        4.0 * x1 * x3 * x4,
        -2.0 * p * x1,
    };
    g[1] = {
        0.0,
        4.0 * x2 * s3 + 4.0 * x3 * x5 * x6,
        8.0 * s3 * x3 + 4.0 * (s2 + 2.0 * s4 + 2.0 * s6 - 1.0) * x3 + 4.0 * x2 * x5 * x6,
        8.0 * x4 * s3 + 8.0 * s4 * x4 + 2.0 * x4 * (4.0 * s6 - 2.0),
        4.0 * x2 * x3 * x6 + 4.0 * x5 * s6,
        8.0 * x6 * s3 + 4.0 * x2 * x3 * x5 + 8.0 * s6 * x6 + 4.0 * s5 * x6 - 4.0 * x6 +
            8.0 * s4 * x6,
    };
    g[2] = {
        4.0 * s1 * x1 + 4.0 * (s2 + s4) * x1 + 4.0 * x2 * x4 * x6,
        4.0 * x2 * s1 + 4.0 * x1 * x4 * x6 + 4.0 * s2 * x2 + 4.0 * x2 * (s3 + s5 + s6),
        4.0 * s3 * x3 + 4.0 * x3 * s5 + 4.0 * x3 * s6 + 4.0 * s2 * x3,
        4.0 * x4 * s1 + 4.0 * x1 * x2 * x6 + 4.0 * s4 * x4 + 4.0 * x4 * s6,
        4.0 * s5 * x5 + 4.0 * s3 * x5 + 4.0 * x5 * s6 + 4.0 * s2 * x5,
        4.0 * x1 * x2 * x4 + 4.0 * s6 * x6 + 4.0 * (s3 + s4 + s5 + s2) * x6,
    };
    g[3] = {
        0.0,
        4.0 * x3 * x5 * x6 + 4.0 * s5 * x2,
        4.0 * x3 * s6 + 4.0 * x2 * x5 * x6,
        8.0 * s4 * x4 + 2.0 * x4 * (4.0 * s5 + 4.0 * s6 - 2.0),
        8.0 * x5 * s4 + 8.0 * s5 * x5 + 4.0 * x2 * x3 * x6 + 4.0 * x5 * (s2 + 2.0 * s6 - 1.0),
        8.0 * x6 * s4 + 8.0 * s6 * x6 + 4.0 * s3 * x6 - 4.0 * x6 + 4.0 * x2 * x3 * x5 +
            8.0 * s5 * x6,
    };
    return g;
}

/// Single-qubit purities arranged like the invariants: (I2, I3, I4) = qubits (0, 1, 2).
inline std::array<double, 3> purities_in_invariant_order(const RealState8& s) {
    return reduced_purities(s);
}

// ---------------------------------------------------------------------------
// Equilibria
// ---------------------------------------------------------------------------

enum class EquilibriumTag { S1, S2, S3, P, NotEquilibrium };

inline const char* to_string(EquilibriumTag tag) {
    switch (tag) {
        case EquilibriumTag::S1: return "S1";
        case EquilibriumTag::S2: return "S2";
        case EquilibriumTag::S3: return "S3";
        case EquilibriumTag::P: return "P";
        case EquilibriumTag::NotEquilibrium: return "NotEquilibrium";
    }
    return "Unknown";
}

struct EquilibriumClass {
    EquilibriumTag tag = EquilibriumTag::NotEquilibrium;
    double distance = 0.0;
};

/// Max residual of the defining equations of one equilibrium set.
inline double equilibrium_residual(const S05State& x, EquilibriumTag tag) {
    const auto [x1, x2, x3, x4, x5, x6] = x.coords();
    switch (tag) {
        case EquilibriumTag::S1: return std::max(std::abs(x1 - x4), std::abs(x3 + x5));
        case EquilibriumTag::S2: return std::max(std::abs(x1 + x4), std::abs(x3 - x5));
        case EquilibriumTag::S3: return std::max(std::abs(x1), std::abs(x4));
        case EquilibriumTag::P:
            return std::max({std::abs(-2.0 * x1 * x1 * x1 + x1 + 2.0 * x3 * x4 * x5),
                             std::abs(2.0 * x4 * x4 * x4 - x4 - 2.0 * x1 * x3 * x5), std::abs(x2),
                             std::abs(x6)});
        case EquilibriumTag::NotEquilibrium: break;
    }
    return 0.0;
}

/// First match in the order S3, S1, S2, P. A match also needs |X(x)| < tol.
inline EquilibriumClass classify_equilibrium(const S05State& x, double tol) {
    const double speed = vector_field(x).norm();
    constexpr std::array order{EquilibriumTag::S3, EquilibriumTag::S1, EquilibriumTag::S2,
                               EquilibriumTag::P};
    for (auto tag : order) {
        const double r = equilibrium_residual(x, tag);
        if (r < tol && speed < tol) return {tag, r};
    }
    return {EquilibriumTag::NotEquilibrium, speed};
}

/// Nearby point lying exactly on the S1, S2 or S3 sphere (P is returned with x2 = x6 = 0).
inline S05State snap_to_equilibrium(const S05State& x, EquilibriumTag tag) {
    auto c = x.coords();
    switch (tag) {
        case EquilibriumTag::S1: {
            const double a = 0.5 * (c[0] + c[3]);
            const double b = 0.5 * (c[2] - c[4]);
            c[0] = a, c[3] = a, c[2] = b, c[4] = -b;
            break;
        }
        case EquilibriumTag::S2: {
            const double a = 0.5 * (c[0] - c[3]);
            const double b = 0.5 * (c[2] + c[4]);
            c[0] = a, c[3] = -a, c[2] = b, c[4] = b;
            break;
        }
        case EquilibriumTag::S3: c[0] = 0.0, c[3] = 0.0; break;
        case EquilibriumTag::P: c[1] = 0.0, c[5] = 0.0; break;
        case EquilibriumTag::NotEquilibrium: return x;
    }
    return S05State::normalized(c);
}

// ---------------------------------------------------------------------------
// Flow integration
// ---------------------------------------------------------------------------

enum class FlowOutcome { X2ZeroEvent, Stagnation, MaxTimeReached };

inline const char* to_string(FlowOutcome o) {
    switch (o) {
        case FlowOutcome::X2ZeroEvent: return "X2ZeroEvent";
        case FlowOutcome::Stagnation: return "Stagnation";
        case FlowOutcome::MaxTimeReached: return "MaxTimeReached";
    }
    return "Unknown";
}

/// Accumulated angles, ordered (theta0, theta1, theta2) by qubit.
using FlowAngles = std::array<double, 3>;

struct FlowTrace {
    std::vector<double> times;
    std::vector<S05State> states;
    std::vector<FlowAngles> angles;
    std::vector<InvariantVector> invariant_values;
    FlowOutcome outcome = FlowOutcome::MaxTimeReached;
    double end_time = 0.0;
    std::optional<double> first_x2_zero;
    double invariant_drift = 0.0;
    std::size_t accepted_steps = 0;
};

struct FlowOptions {
    std::optional<double> t_end;   // defaults to max_flow_time
    double sample_interval = 0.0;  // 0 records every accepted step
    bool stop_on_event = true;
    bool stop_on_stagnation = true;
};

/// Gate reached by flowing for the accumulated angles: Ry(theta2) (x) Ry(theta1) (x) Ry(theta0).
inline LocalOrthogonalGate flow_gate(const FlowAngles& a) {
    return LocalOrthogonalGate::rotations(a[2], a[1], a[0]);
}

namespace detail {

namespace odeint = boost::numeric::odeint;

// x1..x6 followed by theta0, theta1, theta2.
using FlowVector = std::array<double, 9>;

struct FlowSystem {
    double direction;

    void operator()(const FlowVector& y, FlowVector& dydt, double /*t*/) const {
        const S05State x({y[0], y[1], y[2], y[3], y[4], y[5]});
        const auto X = vector_field(x);
        const auto L = angle_rates(x);
        for (std::size_t i = 0; i < 6; ++i) dydt[i] = direction * X[i];
        dydt[6] = direction * L.l0;
        dydt[7] = direction * L.l1;
        dydt[8] = direction * L.l2;
    }
};

inline void renormalize_chart(FlowVector& y) {
    double n = 0.0;
    for (std::size_t i = 0; i < 6; ++i) n += y[i] * y[i];
    n = std::sqrt(n);
    for (std::size_t i = 0; i < 6; ++i) y[i] /= n;
}

}  // namespace detail

/// Steps x' = direction * X(x) together with theta_k' = direction * L_k(x) using
/// an adaptive Dormand-Prince 4(5) pair. The chart state is renormalised after
/// every accepted step; sign changes of x2 are located by bisection on the step length.
class FlowStepper {
public:
    struct StepReport {
        bool x2_zero = false;
        double event_time = 0.0;
    };

    FlowStepper(const S05State& x0, int direction, const ToleranceConfig& cfg)
        : cfg_(cfg), system_{direction >= 0 ? 1.0 : -1.0},
          controlled_(boost::numeric::odeint::make_controlled(cfg.ode_abs_tol, cfg.ode_rel_tol,
                                                              Dopri())) {
        cfg.validate();
        const auto& c = x0.coords();
        std::copy(c.begin(), c.end(), y_.begin());
        system_(y_, dydt_, 0.0);
    }

    double time() const noexcept { return t_; }
    S05State state() const { return S05State({y_[0], y_[1], y_[2], y_[3], y_[4], y_[5]}); }
    FlowAngles angles() const { return {y_[6], y_[7], y_[8]}; }
    std::size_t accepted_steps() const noexcept { return accepted_; }

    /// One accepted step, never past t_limit. When a sign change of x2 is found the
    /// state stops at the event if commit_event is set, otherwise at the step end.
    StepReport step(double t_limit, bool commit_event) {
        namespace odeint = boost::numeric::odeint;
        StepReport report;
        if (t_ >= t_limit) return report;

        const double natural_dt = dt_;
        for (int attempt = 0;; ++attempt) {
            const bool clamped = t_ + dt_ >= t_limit;
            double dt = clamped ? t_limit - t_ : dt_;
            double t = t_;
            detail::FlowVector out{}, dout{};
            const auto res = controlled_.try_step(system_, y_, dydt_, t, out, dout, dt);
            if (res == odeint::success) {
                const double t_new = clamped ? t_limit : t;
                dt_ = clamped ? std::max(dt, natural_dt) : dt;
                if (sign_change(y_[1], out[1])) {
                    auto [t_evt, y_evt] = locate_x2_zero(t_new - t_);
                    report = {true, t_evt};
                    if (commit_event) {
                        commit(t_evt, y_evt);
                        return report;
                    }
                }
                commit(t_new, out);
                return report;
            }
            dt_ = dt;
            if (dt_ < 1e-15 * std::max(1.0, std::abs(t_)) || attempt > 10000)
                throw Error(ErrorKind::StepSizeUnderflow,
                            "step size underflow at t = " + format_real(t_));
        }
    }

private:
    using Dopri = boost::numeric::odeint::runge_kutta_dopri5<detail::FlowVector>;
    using Controlled = boost::numeric::odeint::controlled_runge_kutta<Dopri>;

    static bool sign_change(double before, double after) {
        return before != 0.0 && (after == 0.0 || (before < 0.0) != (after < 0.0));
    }

    void commit(double t, detail::FlowVector y) {
        detail::renormalize_chart(y);
        y_ = y;
        t_ = t;
        system_(y_, dydt_, t_);
        ++accepted_;
    }

    // Bisects the step length h in (0, h_full] until |x2| < zero_tol.
    std::pair<double, detail::FlowVector> locate_x2_zero(double h_full) {
        const bool start_negative = y_[1] < 0.0;
        double lo = 0.0, hi = h_full;
        detail::FlowVector best{}, dout{};
        double best_abs = std::numeric_limits<double>::infinity();
        double best_h = h_full;
        for (int it = 0; it < 200; ++it) {
            const double mid = it == 0 ? h_full : 0.5 * (lo + hi);
            detail::FlowVector trial{};
            bisect_stepper_.do_step(system_, y_, dydt_, t_, trial, dout, mid);
            if (std::abs(trial[1]) < best_abs) {
                best_abs = std::abs(trial[1]);
                best = trial;
                best_h = mid;
            }
            if (best_abs < cfg_.zero_tol) break;
            if (it == 0) continue;
            if ((trial[1] < 0.0) == start_negative)
                lo = mid;
            else
                hi = mid;
            if (hi - lo <= 0.0) break;
        }
        return {t_ + best_h, best};
    }

    ToleranceConfig cfg_;
    detail::FlowSystem system_;
    Controlled controlled_;
    Dopri bisect_stepper_;
    detail::FlowVector y_{};
    detail::FlowVector dydt_{};
    double t_ = 0.0;
    double dt_ = 1e-2;
    std::size_t accepted_ = 0;
};

inline FlowTrace integrate_flow(const S05State& x0, int direction, const ToleranceConfig& cfg,
                                const FlowOptions& opts = {}) {
    cfg.validate();
    const double t_end = opts.t_end.value_or(cfg.max_flow_time);
    FlowStepper stepper(x0, direction, cfg);
    const InvariantVector initial = invariants(x0);

    FlowTrace trace;
    auto record = [&](const S05State& x, const InvariantVector& inv) {
        trace.times.push_back(stepper.time());
        trace.states.push_back(x);
        trace.angles.push_back(stepper.angles());
        trace.invariant_values.push_back(inv);
    };
    auto drift_of = [&](const InvariantVector& inv) {
        const auto a = inv.as_array();
        const auto b = initial.as_array();
        double d = 0.0;
        for (std::size_t k = 0; k < 4; ++k) d = std::max(d, std::abs(a[k] - b[k]));
        return d;
    };

    record(x0, initial);
    trace.outcome = FlowOutcome::MaxTimeReached;
    if (opts.stop_on_stagnation && vector_field(x0).norm() < cfg.stagnation_tol) {
        trace.outcome = FlowOutcome::Stagnation;
        return trace;
    }

    double next_sample = opts.sample_interval > 0.0 ? opts.sample_interval : t_end;
    std::size_t sample_index = 1;
    while (stepper.time() < t_end) {
        const double limit = std::min(next_sample, t_end);
        const auto report = stepper.step(limit, opts.stop_on_event);
        const S05State x = stepper.state();
        const InvariantVector inv = invariants(x);
        trace.invariant_drift = std::max(trace.invariant_drift, drift_of(inv));

        if (report.x2_zero && !trace.first_x2_zero) trace.first_x2_zero = report.event_time;
        if (report.x2_zero && opts.stop_on_event) {
            record(x, inv);
            trace.outcome = FlowOutcome::X2ZeroEvent;
            break;
        }

        const bool at_sample = opts.sample_interval <= 0.0 || stepper.time() >= limit;
        if (at_sample) {
            record(x, inv);
            if (opts.sample_interval > 0.0)
                next_sample = opts.sample_interval * static_cast<double>(++sample_index);
        }
        if (opts.stop_on_stagnation && vector_field(x).norm() < cfg.stagnation_tol) {
            if (!at_sample) record(x, inv);
            trace.outcome = FlowOutcome::Stagnation;
            break;
        }
    }
    trace.end_time = stepper.time();
    trace.accepted_steps = stepper.accepted_steps();
    return trace;
}

}  // namespace real_schmidt
