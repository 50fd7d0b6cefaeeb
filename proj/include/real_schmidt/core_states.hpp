#pragma once

// State and gate algebra for real 3-qubit states.
//
// Basis convention: amplitude index i = 4*q2 + 2*q1 + q0 for the ket |q2 q1 q0>,
// so the leftmost ket symbol is qubit 2 and a gate F2 (x) F1 (x) F0 puts F2 on it.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>

#include "real_schmidt/errors.hpp"

namespace real_schmidt {

using Amplitudes = std::array<double, 8>;
using Matrix2 = std::array<std::array<double, 2>, 2>;

inline constexpr double kFourPi = 4.0 * std::numbers::pi;

constexpr std::size_t basis_index(int q2, int q1, int q0) {
    return static_cast<std::size_t>(4 * q2 + 2 * q1 + q0);
}

/// Wraps an angle into [0, 4pi), the period of Ry.
inline double wrap_angle(double theta) {
    double r = std::fmod(theta, kFourPi);
    if (r < 0.0) r += kFourPi;
    if (r >= kFourPi) r -= kFourPi;
    return r == 0.0 ? 0.0 : r;  // no negative zero
}

/// Unit vector of 8 real amplitudes.
///
/// The constructor trusts the caller about the norm; use normalize() for raw input.
class RealState8 {
public:
    RealState8() : amps_{1.0, 0, 0, 0, 0, 0, 0, 0} {}
    explicit RealState8(const Amplitudes& amps) : amps_(amps) {}

    const Amplitudes& amplitudes() const noexcept { return amps_; }
    double operator[](std::size_t i) const { return amps_[i]; }

    double norm() const {
        double acc = 0.0;
        for (double a : amps_) acc += a * a;
        return std::sqrt(acc);
    }

    static RealState8 basis(std::size_t index) {
        Amplitudes a{};
        a.at(index) = 1.0;
        return RealState8(a);
    }

    friend bool operator==(const RealState8&, const RealState8&) = default;

private:
    Amplitudes amps_;
};

/// Point of the 5-sphere M: (x1..x6) with embedding (x1, 0, x2, x3, 0, x4, x5, x6).
/// Stored 0-based, coords()[0] is x1.
class S05State {
public:
    using Coords = std::array<double, 6>;

    S05State() : x_{1.0, 0, 0, 0, 0, 0} {}
    explicit S05State(const Coords& x) : x_(x) {}

    const Coords& coords() const noexcept { return x_; }
    double operator[](std::size_t i) const { return x_[i]; }

    double norm() const {
        double acc = 0.0;
        for (double v : x_) acc += v * v;
        return std::sqrt(acc);
    }

    /// Rescales arbitrary coordinates onto the unit sphere.
    static S05State normalized(const Coords& raw) {
        double n = 0.0;
        for (double v : raw) n += v * v;
        n = std::sqrt(n);
        if (!(n >= 1e-14)) throw Error(ErrorKind::ZeroVector, "S0^5 coordinates have zero norm");
        Coords out{};
        for (std::size_t i = 0; i < 6; ++i) out[i] = raw[i] / n;
        return S05State(out);
    }

    friend bool operator==(const S05State&, const S05State&) = default;

private:
    Coords x_;
};

/// One O(2) element written as Ry(theta) * X^reflect.
struct QubitFactor {
    double theta = 0.0;
    bool reflect = false;

    Matrix2 matrix() const {
        const double c = std::cos(theta / 2.0);
        const double s = std::sin(theta / 2.0);
        if (!reflect) return {{{c, -s}, {s, c}}};
        // Ry(theta) * X swaps the columns of Ry(theta).
        return {{{-s, c}, {c, s}}};
    }

    friend bool operator==(const QubitFactor&, const QubitFactor&) = default;
};

inline Matrix2 ry_matrix(double theta) { return QubitFactor{theta, false}.matrix(); }

/// Local orthogonal gate F2 (x) F1 (x) F0, one O(2) factor per qubit.
class LocalOrthogonalGate {
public:
    LocalOrthogonalGate() = default;

    /// Factors indexed by qubit: factors[0] acts on qubit 0 (rightmost ket symbol).
    explicit LocalOrthogonalGate(const std::array<QubitFactor, 3>& factors) : factors_(factors) {
        for (auto& f : factors_) f.theta = wrap_angle(f.theta);
    }

    static LocalOrthogonalGate identity() { return {}; }

    /// Ry(theta2) (x) Ry(theta1) (x) Ry(theta0), arguments in ket (left-to-right) order.
    static LocalOrthogonalGate rotations(double theta2, double theta1, double theta0) {
        return LocalOrthogonalGate({QubitFactor{theta0, false}, QubitFactor{theta1, false},
                                    QubitFactor{theta2, false}});
    }

    const QubitFactor& factor(std::size_t qubit) const { return factors_.at(qubit); }
    const std::array<QubitFactor, 3>& factors() const noexcept { return factors_; }

    bool has_reflection() const {
        return factors_[0].reflect || factors_[1].reflect || factors_[2].reflect;
    }

    friend bool operator==(const LocalOrthogonalGate&, const LocalOrthogonalGate&) = default;

private:
    std::array<QubitFactor, 3> factors_{};
};

/// Numerical thresholds shared by the reduction pipeline.
struct ToleranceConfig {
    double zero_tol = 1e-10;
    double ode_rel_tol = 1e-10;
    double ode_abs_tol = 1e-12;
    double stagnation_tol = 1e-8;
    double class_tol = 1e-8;
    double max_flow_time = 1e4;

    void validate() const {
        const std::array<std::pair<const char*, double>, 6> fields{{
            {"zero_tol", zero_tol},
            {"ode_rel_tol", ode_rel_tol},
            {"ode_abs_tol", ode_abs_tol},
            {"stagnation_tol", stagnation_tol},
            {"class_tol", class_tol},
            {"max_flow_time", max_flow_time},
        }};
        for (const auto& [name, value] : fields) {
            if (!(value > 0.0) || !std::isfinite(value))
                throw Error(ErrorKind::InvalidConfig,
                            std::string(name) + " must be strictly positive and finite");
        }
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline RealState8 normalize(std::span<const double> raw) {
    if (raw.size() != 8)
        throw Error(ErrorKind::InvalidInput, "expected 8 amplitudes, got " + std::to_string(raw.size()));
    double acc = 0.0;
    for (double v : raw) {
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "amplitude is not finite");
        acc += v * v;
    }
    const double n = std::sqrt(acc);
    if (n < 1e-14) throw Error(ErrorKind::ZeroVector, "amplitude vector has zero norm");
    Amplitudes out{};
    for (std::size_t i = 0; i < 8; ++i) out[i] = raw[i] / n;
    return RealState8(out);
}

inline RealState8 normalize(const Amplitudes& raw) { return normalize(std::span<const double>(raw)); }

/// Applies a 2x2 matrix to one qubit of an amplitude vector in place.
inline void apply_single_qubit(const Matrix2& m, std::size_t qubit, Amplitudes& amps) {
    const std::size_t bit = std::size_t{1} << qubit;
    for (std::size_t i = 0; i < 8; ++i) {
        if (i & bit) continue;
        const double a0 = amps[i];
        const double a1 = amps[i | bit];
        amps[i] = m[0][0] * a0 + m[0][1] * a1;
        amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
    }
}

inline RealState8 apply_local_gate(const LocalOrthogonalGate& g, const RealState8& s) {
    Amplitudes amps = s.amplitudes();
    for (std::size_t q = 0; q < 3; ++q) apply_single_qubit(g.factor(q).matrix(), q, amps);
    return RealState8(amps);
}

/// Per-qubit O(2) product: outer * inner.
inline QubitFactor compose_factors(const QubitFactor& outer, const QubitFactor& inner) {
    // X Ry(b) = Ry(-b) X
    const double theta = outer.reflect ? outer.theta - inner.theta : outer.theta + inner.theta;
    return QubitFactor{wrap_angle(theta), outer.reflect != inner.reflect};
}

/// Gate equal to applying `inner` first, then `outer`.
inline LocalOrthogonalGate compose_gates(const LocalOrthogonalGate& outer,
                                         const LocalOrthogonalGate& inner) {
    std::array<QubitFactor, 3> f{};
    for (std::size_t q = 0; q < 3; ++q) f[q] = compose_factors(outer.factor(q), inner.factor(q));
    return LocalOrthogonalGate(f);
}

inline double overlap(const RealState8& a, const RealState8& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 8; ++i) acc += a[i] * b[i];
    return acc;
}

inline double distance(const RealState8& a, const RealState8& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 8; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

namespace detail {

template <std::size_t N>
using SquareMatrix = std::array<std::array<double, N>, N>;

// Traces out `qubit` of an n-qubit density matrix (dimension N = 2^n).
template <std::size_t N>
SquareMatrix<N / 2> partial_trace(const SquareMatrix<N>& rho, std::size_t qubit) {
    const std::size_t bit = std::size_t{1} << qubit;
    const std::size_t low_mask = bit - 1;
    // Maps a reduced index to the full index with a zero inserted at `qubit`.
    auto lift = [&](std::size_t r) { return ((r & ~low_mask) << 1) | (r & low_mask); };
    SquareMatrix<N / 2> out{};
    for (std::size_t r = 0; r < N / 2; ++r) {
        for (std::size_t c = 0; c < N / 2; ++c) {
            const std::size_t i = lift(r);
            const std::size_t j = lift(c);
            out[r][c] = rho[i][j] + rho[i | bit][j | bit];
        }
    }
    return out;
}

}  // namespace detail

/// tr(rho^2) of the single-qubit marginal of `qubit`, via dense partial traces 8 -> 4 -> 2.
inline double reduced_purity(const RealState8& s, std::size_t qubit) {
    if (qubit > 2) throw Error(ErrorKind::InvalidConfig, "qubit index must be 0, 1 or 2");
    detail::SquareMatrix<8> rho{};
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) rho[i][j] = s[i] * s[j];

    // Trace out the other two qubits, higher index first: removing the higher
    // one leaves the position of the lower one unchanged.
    std::array<std::size_t, 2> others{};
    std::size_t n = 0;
    for (std::size_t q = 3; q-- > 0;)
        if (q != qubit) others[n++] = q;

    const auto rho4 = detail::partial_trace<8>(rho, others[0]);
    const auto rho2 = detail::partial_trace<4>(rho4, others[1]);

    double purity = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) purity += rho2[i][j] * rho2[j][i];
    return purity;
}

inline std::array<double, 3> reduced_purities(const RealState8& s) {
    return {reduced_purity(s, 0), reduced_purity(s, 1), reduced_purity(s, 2)};
}

inline S05State project_s05(const RealState8& s, double tol) {
    const double u001 = std::abs(s[basis_index(0, 0, 1)]);
    const double u100 = std::abs(s[basis_index(1, 0, 0)]);
    if (!(u001 < tol) || !(u100 < tol)) throw NotInS05Error(u001, u100);
    return S05State::normalized({s[0], s[2], s[3], s[5], s[6], s[7]});
}

inline RealState8 embed_s05(const S05State& x) {
    const auto& c = x.coords();
    return RealState8(Amplitudes{c[0], 0.0, c[1], c[2], 0.0, c[3], c[4], c[5]});
}

}  // namespace real_schmidt
