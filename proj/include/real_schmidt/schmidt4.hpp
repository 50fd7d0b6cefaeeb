#pragma once

// Stage-2 reduction to the five-term normal form
//   l1|000> + l2|011> + l3|101> + l4|110> + l5|111>
// starting from a point of S0^5: closed forms on the equilibrium sets of the
// vector field, flow integration everywhere else.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "real_schmidt/core_states.hpp"
#include "real_schmidt/flowfield.hpp"
#include "real_schmidt/reduce5.hpp"

namespace real_schmidt {

enum class NormalFormPath {
    AlreadyNormal,
    EquilibriumS1,
    EquilibriumS2,
    EquilibriumS3,
    EquilibriumP,
    FlowEvent,
    FlowStagnationThenEquilibrium,
};

inline const char* to_string(NormalFormPath p) {
    switch (p) {
        case NormalFormPath::AlreadyNormal: return "AlreadyNormal";
        case NormalFormPath::EquilibriumS1: return "EquilibriumS1";
        case NormalFormPath::EquilibriumS2: return "EquilibriumS2";
        case NormalFormPath::EquilibriumS3: return "EquilibriumS3";
        case NormalFormPath::EquilibriumP: return "EquilibriumP";
        case NormalFormPath::FlowEvent: return "FlowEvent";
        case NormalFormPath::FlowStagnationThenEquilibrium: return "FlowStagnationThenEquilibrium";
    }
    return "Unknown";
}

/// Amplitude indices of the target pattern, in lambda order.
inline constexpr std::array<std::size_t, 5> kNormalFormKets{
    basis_index(0, 0, 0), basis_index(0, 1, 1), basis_index(1, 0, 1), basis_index(1, 1, 0),
    basis_index(1, 1, 1)};

struct NormalFormResult {
    std::array<double, 5> lambdas{};
    LocalOrthogonalGate gate;
    double residual = 0.0;
    NormalFormPath path = NormalFormPath::AlreadyNormal;
    InvariantVector invariants;  // of the stage-1 reduced state
};

class NormalFormFailedError : public Error {
public:
    NormalFormFailedError(double best_residual, NormalFormPath path, const std::string& detail)
        : Error(ErrorKind::NormalFormFailed, detail + " (best residual " +
                                                 format_real(best_residual) + ", path " +
                                                 to_string(path) + ")"),
          best_residual_(best_residual), path_(path) {}

    double best_residual() const noexcept { return best_residual_; }
    NormalFormPath path() const noexcept { return path_; }

private:
    double best_residual_;
    NormalFormPath path_;
};

/// Norm of the |001>, |010>, |100> amplitudes.
inline double pattern_defect(const RealState8& v) {
    return std::sqrt(v[1] * v[1] + v[2] * v[2] + v[4] * v[4]);
}

// ---------------------------------------------------------------------------
// Equilibrium solvers
// ---------------------------------------------------------------------------

/// Root function for S1 points; its zero gives theta2 of the gate Ry(t2) (x) Ry(t1) (x) Ry(-t2).
inline double f_eval(const S05State& w, double theta2) {
    const auto [w1, w2, w3, w4, w5, w6] = w.coords();
    const double s = std::sin(theta2), c = std::cos(theta2);
    return w1 * w1 * s * c +
           0.25 * (2.0 * w3 * s + (w2 + w6) * c + w2 - w6) * ((w2 + w6) * s - 2.0 * w3 * c);
}

/// Counterpart of f_eval for S2 points and the gate Ry(t2) (x) Ry(t1) (x) Ry(t2).
inline double f_eval_s2(const S05State& w, double theta2) {
    const auto [w1, w2, w3, w4, w5, w6] = w.coords();
    const double s = std::sin(theta2), c = std::cos(theta2);
    return w1 * w1 * s * c -
           0.25 * ((w6 - w2) * s - 2.0 * w3 * c) * (-2.0 * w3 * s + (w2 - w6) * c + w2 + w6);
}

struct EquilibriumSolve {
    LocalOrthogonalGate gate;
    double theta2 = 0.0;
    double theta1 = 0.0;
    double root_value = 0.0;  // f at the chosen theta2
    bool degenerate_recovery = false;
    double z1 = 0.0;  // |001> amplitude after the gate
    double x2 = 0.0;  // |010> amplitude after the gate
};

namespace detail {

inline constexpr double kRootTol = 1e-14;

struct RootResult {
    double theta;
    double value;
};

// Zero of f on [0, 3pi/2]. The samples at multiples of pi/2 sum to zero, so one of
// them vanishes or two neighbours differ in sign.
template <class F>
RootResult quarter_bracket_root(F f) {
    constexpr double h = std::numbers::pi / 2.0;
    const std::array<double, 4> nodes{0.0, h, 2.0 * h, 3.0 * h};
    std::array<double, 4> vals{};
    for (std::size_t i = 0; i < 4; ++i) {
        vals[i] = f(nodes[i]);
        if (std::abs(vals[i]) < kRootTol) return {nodes[i], vals[i]};
    }
    for (std::size_t i = 0; i + 1 < 4; ++i) {
        if ((vals[i] < 0.0) == (vals[i + 1] < 0.0)) continue;
        double lo = nodes[i], hi = nodes[i + 1], f_lo = vals[i];
        RootResult best{std::abs(vals[i]) < std::abs(vals[i + 1]) ? lo : hi,
                        std::abs(vals[i]) < std::abs(vals[i + 1]) ? vals[i] : vals[i + 1]};
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const double f_mid = f(mid);
            if (std::abs(f_mid) < std::abs(best.value)) best = {mid, f_mid};
            if (std::abs(f_mid) < kRootTol) break;
            if ((f_mid < 0.0) == (f_lo < 0.0)) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        return best;
    }
    throw Error(ErrorKind::SolveFailed, "no sign change among the quarter samples");
}

inline EquilibriumSolve finish_equilibrium_solve(const S05State& w, EquilibriumSolve out,
                                                 double zero_tol, const char* name) {
    const RealState8 v = apply_local_gate(out.gate, embed_s05(w));
    out.z1 = v[1];
    out.x2 = v[2];
    const double worst = std::max({std::abs(v[1]), std::abs(v[2]), std::abs(v[4])});
    if (!(worst < zero_tol))
        throw Error(ErrorKind::SolveFailed, std::string(name) + " post-check failed, defect " +
                                                format_real(worst));
    return out;
}

// Half-angle recovery: sin(t1/2) ~ num, cos(t1/2) ~ den. When both vanish z1 is
// zero for every t1, and t1 is picked to clear x2 = w1 sin(t1/2) cos(t2) + q cos(t1/2).
inline double recover_theta1(double num, double den, double w1, double theta2, double q,
                             bool& degenerate) {
    degenerate = std::hypot(num, den) < 1e-12;
    if (!degenerate) return 2.0 * std::atan2(num, den);
    const double a = w1 * std::cos(theta2);
    if (std::hypot(a, q) < 1e-300) return 0.0;
    return 2.0 * std::atan2(-q, a);
}

}  // namespace detail

/// Closed form for points with w1 = w4, w3 = -w5. Gate pattern (theta2, theta1, -theta2).
inline EquilibriumSolve solve_equilibrium_s1(const S05State& w, double zero_tol = 1e-10) {
    const auto [w1, w2, w3, w4, w5, w6] = w.coords();
    const auto root = detail::quarter_bracket_root([&](double t) { return f_eval(w, t); });
    const double t2 = root.theta;
    const double s = std::sin(t2), c = std::cos(t2);

    EquilibriumSolve out;
    out.theta2 = t2;
    out.root_value = root.value;
    const double q = 0.5 * (2.0 * w3 * s + (w2 + w6) * c + w2 - w6);
    out.theta1 = detail::recover_theta1(w1 * s, 0.5 * ((w2 + w6) * s - 2.0 * w3 * c), w1, t2, q,
                                        out.degenerate_recovery);
    out.gate = LocalOrthogonalGate::rotations(t2, out.theta1, -t2);
    return detail::finish_equilibrium_solve(w, out, zero_tol, "S1 solver");
}

/// Closed form for points with w1 = -w4, w3 = w5. Gate pattern (theta2, theta1, +theta2).
inline EquilibriumSolve solve_equilibrium_s2(const S05State& w, double zero_tol = 1e-10) {
    const auto [w1, w2, w3, w4, w5, w6] = w.coords();
    const auto root = detail::quarter_bracket_root([&](double t) { return f_eval_s2(w, t); });
    const double t2 = root.theta;
    const double s = std::sin(t2), c = std::cos(t2);

    EquilibriumSolve out;
    out.theta2 = t2;
    out.root_value = root.value;
    // z1 = w1 s cos(t1/2) + b sin(t1/2)
    const double b = 0.5 * (w6 - w2) * s - w3 * c;
    const double q = 0.5 * (-2.0 * w3 * s + (w2 - w6) * c + w2 + w6);
    out.theta1 = detail::recover_theta1(w1 * s, -b, w1, t2, q, out.degenerate_recovery);
    out.gate = LocalOrthogonalGate::rotations(t2, out.theta1, t2);
    return detail::finish_equilibrium_solve(w, out, zero_tol, "S2 solver");
}

/// Closed form for points with w1 = w4 = 0: a single Ry on qubit 2.
inline EquilibriumSolve solve_equilibrium_s3(const S05State& w, double zero_tol = 1e-10) {
    const double w2 = w[1], w5 = w[4];
    EquilibriumSolve out;
    out.theta2 = (w2 == 0.0 && w5 == 0.0) ? 0.0 : 2.0 * std::atan2(w2, w5);
    out.gate = LocalOrthogonalGate::rotations(out.theta2, 0.0, 0.0);
    return detail::finish_equilibrium_solve(w, out, zero_tol, "S3 solver");
}

// ---------------------------------------------------------------------------
// Polishing
// ---------------------------------------------------------------------------

namespace detail {

inline std::array<double, 3> defect_vector(const RealState8& v) { return {v[1], v[2], v[4]}; }

inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3>& b) {
    for (std::size_t col = 0; col < 3; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < 3; ++r) {
            const double m = a[r][col] / a[col][col];
            for (std::size_t k = col; k < 3; ++k) a[r][k] -= m * a[col][k];
            b[r] -= m * b[col];
        }
    }
    for (std::size_t i = 3; i-- > 0;) {
        double acc = b[i];
        for (std::size_t k = i + 1; k < 3; ++k) acc -= a[i][k] * b[k];
        b[i] = acc / a[i][i];
    }
    return true;
}

}  // namespace detail

/// Damped Newton on the three rotation angles so that the |001>, |010>, |100>
/// amplitudes of gate * s vanish. Only rotation gates (no reflections) are polished.
inline LocalOrthogonalGate polish_gate(const RealState8& s, const LocalOrthogonalGate& start,
                                       int max_iterations = 60) {
    if (start.has_reflection()) return start;
    // angles indexed by qubit
    std::array<double, 3> theta{start.factor(0).theta, start.factor(1).theta,
                                start.factor(2).theta};
    auto image = [&](const std::array<double, 3>& t) {
        return apply_local_gate(LocalOrthogonalGate::rotations(t[2], t[1], t[0]), s);
    };
    auto defect_norm = [](const std::array<double, 3>& f) {
        return std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
    };

    auto f = detail::defect_vector(image(theta));
    double r = defect_norm(f);
    double mu = 1e-9;
    for (int it = 0; it < max_iterations && r > 1e-17; ++it) {
        // d/dt Ry(t) = Ry(t + pi) / 2
        std::array<std::array<double, 3>, 3> jac{};  // jac[row][qubit]
        for (std::size_t q = 0; q < 3; ++q) {
            Amplitudes amps = s.amplitudes();
            for (std::size_t k = 0; k < 3; ++k) {
                Matrix2 m = ry_matrix(k == q ? theta[k] + std::numbers::pi : theta[k]);
                if (k == q)
                    for (auto& row : m)
                        for (auto& e : row) e *= 0.5;
                apply_single_qubit(m, k, amps);
            }
            jac[0][q] = amps[1];
            jac[1][q] = amps[2];
            jac[2][q] = amps[4];
        }

        bool improved = false;
        for (int tries = 0; tries < 12 && !improved; ++tries) {
            std::array<std::array<double, 3>, 3> normal{};
            std::array<double, 3> rhs{};
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t j = 0; j < 3; ++j) {
                    for (std::size_t k = 0; k < 3; ++k) normal[i][j] += jac[k][i] * jac[k][j];
                }
                normal[i][i] += mu;
                for (std::size_t k = 0; k < 3; ++k) rhs[i] -= jac[k][i] * f[k];
            }
            if (!detail::solve3(normal, rhs)) {
                mu *= 10.0;
                continue;
            }
            std::array<double, 3> trial{theta[0] + rhs[0], theta[1] + rhs[1], theta[2] + rhs[2]};
            const auto f_trial = detail::defect_vector(image(trial));
            const double r_trial = defect_norm(f_trial);
            if (r_trial < r) {
                theta = trial;
                f = f_trial;
                r = r_trial;
                mu = std::max(mu * 0.1, 1e-15);
                improved = true;
            } else {
                mu *= 10.0;
            }
        }
        if (!improved) break;
    }
    return LocalOrthogonalGate::rotations(theta[2], theta[1], theta[0]);
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace detail {

inline NormalFormPath equilibrium_path(EquilibriumTag tag) {
    switch (tag) {
        case EquilibriumTag::S1: return NormalFormPath::EquilibriumS1;
        case EquilibriumTag::S2: return NormalFormPath::EquilibriumS2;
        case EquilibriumTag::S3: return NormalFormPath::EquilibriumS3;
        default: return NormalFormPath::EquilibriumP;
    }
}

// Gate for a point classified as `tag`, computed at its projection onto the set.
inline LocalOrthogonalGate solve_at_equilibrium(const S05State& w, EquilibriumTag tag,
                                                double zero_tol) {
    const S05State snapped = snap_to_equilibrium(w, tag);
    switch (tag) {
        case EquilibriumTag::S1: return solve_equilibrium_s1(snapped, zero_tol).gate;
        case EquilibriumTag::S2: return solve_equilibrium_s2(snapped, zero_tol).gate;
        case EquilibriumTag::S3: return solve_equilibrium_s3(snapped, zero_tol).gate;
        default: return LocalOrthogonalGate::identity();  // x2 = 0 on P
    }
}

inline NormalFormResult finish_normal_form(const RealState8& s, LocalOrthogonalGate gate,
                                           NormalFormPath path, const InvariantVector& inv,
                                           const ToleranceConfig& cfg) {
    RealState8 v = apply_local_gate(gate, s);
    double residual = pattern_defect(v);
    if (path != NormalFormPath::AlreadyNormal && residual > 1e-15) {
        const auto polished = polish_gate(s, gate);
        const RealState8 pv = apply_local_gate(polished, s);
        const double pr = pattern_defect(pv);
        if (pr < residual) {
            gate = polished;
            v = pv;
            residual = pr;
        }
    }
    if (!(residual < cfg.zero_tol))
        throw NormalFormFailedError(residual, path, "gate does not reach the target pattern");

    NormalFormResult out;
    for (std::size_t k = 0; k < 5; ++k) out.lambdas[k] = v[kNormalFormKets[k]];
    out.gate = gate;
    out.residual = residual;
    out.path = path;
    out.invariants = inv;
    return out;
}

}  // namespace detail

/// Full pipeline: stage-1 closed form, then an equilibrium solver or the flow.
inline NormalFormResult normal_form(const RealState8& s, const ToleranceConfig& cfg = {}) {
    cfg.validate();
    const Stage1Result stage1 = reduce_to_s05(s, cfg);
    const S05State& w = stage1.state;
    const InvariantVector inv = invariants(w);

    if (std::abs(w[1]) < cfg.zero_tol)
        return detail::finish_normal_form(s, stage1.gate, NormalFormPath::AlreadyNormal, inv, cfg);

    const EquilibriumClass cls = classify_equilibrium(w, cfg.class_tol);
    if (cls.tag != EquilibriumTag::NotEquilibrium) {
        const auto g = detail::solve_at_equilibrium(w, cls.tag, cfg.zero_tol);
        return detail::finish_normal_form(s, compose_gates(g, stage1.gate),
                                          detail::equilibrium_path(cls.tag), inv, cfg);
    }

    // Flow in both directions; always advance the one that is behind in time so
    // the earliest terminating event wins independently of scheduling.
    struct Branch {
        FlowStepper stepper;
        bool exhausted = false;
        std::optional<NormalFormPath> terminal;
        EquilibriumTag tag = EquilibriumTag::NotEquilibrium;
    };
    std::array<Branch, 2> branches{
        Branch{FlowStepper(w, +1, cfg), false, std::nullopt, EquilibriumTag::NotEquilibrium},
        Branch{FlowStepper(w, -1, cfg), false, std::nullopt, EquilibriumTag::NotEquilibrium}};
    const double relaxed_tol = 10.0 * cfg.class_tol;

    auto advance = [&](Branch& b) {
        const auto report = b.stepper.step(cfg.max_flow_time, true);
        if (report.x2_zero) {
            b.terminal = NormalFormPath::FlowEvent;
            return;
        }
        const S05State x = b.stepper.state();
        if (vector_field(x).norm() < cfg.stagnation_tol) {
            const auto c = classify_equilibrium(x, relaxed_tol);
            if (c.tag != EquilibriumTag::NotEquilibrium) {
                b.terminal = NormalFormPath::FlowStagnationThenEquilibrium;
                b.tag = c.tag;
                return;
            }
        }
        if (b.stepper.time() >= cfg.max_flow_time) b.exhausted = true;
    };
    auto active = [](const Branch& b) { return !b.terminal && !b.exhausted; };

    while (active(branches[0]) || active(branches[1])) {
        std::size_t pick;
        if (!active(branches[0]))
            pick = 1;
        else if (!active(branches[1]))
            pick = 0;
        else
            pick = branches[1].stepper.time() < branches[0].stepper.time() ? 1 : 0;

        // Once one branch has terminated, the other only runs up to that time.
        const Branch& other = branches[1 - pick];
        if (other.terminal && branches[pick].stepper.time() >= other.stepper.time()) break;
        advance(branches[pick]);
    }

    const Branch* winner = nullptr;
    for (const auto& b : branches) {
        if (!b.terminal) continue;
        if (!winner || b.stepper.time() < winner->stepper.time()) winner = &b;
    }
    if (!winner)
        throw NormalFormFailedError(std::abs(w[1]), NormalFormPath::FlowEvent,
                                    "flow reached max_flow_time without an event");

    LocalOrthogonalGate gate = compose_gates(flow_gate(winner->stepper.angles()), stage1.gate);
    if (*winner->terminal == NormalFormPath::FlowStagnationThenEquilibrium) {
        const auto g = detail::solve_at_equilibrium(winner->stepper.state(), winner->tag,
                                                    cfg.zero_tol);
        gate = compose_gates(g, gate);
    }
    return detail::finish_normal_form(s, gate, *winner->terminal, inv, cfg);
}

/// Flips the global sign (Ry(2pi) on qubit 2) so that lambda_1 >= 0.
inline NormalFormResult canonicalize_sign(NormalFormResult r) {
    if (r.lambdas[0] >= 0.0) return r;
    r.gate = compose_gates(LocalOrthogonalGate::rotations(2.0 * std::numbers::pi, 0.0, 0.0), r.gate);
    for (auto& l : r.lambdas) l = -l;
    return r;
}

}  // namespace real_schmidt
