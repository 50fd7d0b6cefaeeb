#pragma once

// Shared fixtures and independent reference computations for the test suites.
// The references deliberately avoid the library's own kernels: gates are applied
// as explicit 8x8 Kronecker products and purities come from the Gram matrix of
// the 2x4 unfolding.

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "real_schmidt/real_schmidt.hpp"

namespace rs_test {

using namespace real_schmidt;

inline const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

inline RealState8 ghz() { return RealState8(Amplitudes{kInvSqrt2, 0, 0, 0, 0, 0, 0, kInvSqrt2}); }

inline RealState8 xi() { return normalize(Amplitudes{1, 1, 0, 1, 0, 1, -1, 0}); }

// (|001> - |010> + |100> + |111>) / 2
inline RealState8 chi3() { return RealState8(Amplitudes{0, 0.5, -0.5, 0, 0.5, 0, 0, 0.5}); }

using Mat8 = std::array<std::array<double, 8>, 8>;
using Mat2 = std::array<std::array<double, 2>, 2>;

inline Mat2 ref_factor(double theta, bool reflect) {
    const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
    Mat2 ry{{{c, -s}, {s, c}}};
    if (!reflect) return ry;
    const Mat2 x{{{0, 1}, {1, 0}}};
    Mat2 out{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out[i][j] = ry[i][0] * x[0][j] + ry[i][1] * x[1][j];
    return out;
}

// F2 (x) F1 (x) F0 with row index 4*q2 + 2*q1 + q0.
inline Mat8 ref_kron(const LocalOrthogonalGate& g) {
    const Mat2 f0 = ref_factor(g.factor(0).theta, g.factor(0).reflect);
    const Mat2 f1 = ref_factor(g.factor(1).theta, g.factor(1).reflect);
    const Mat2 f2 = ref_factor(g.factor(2).theta, g.factor(2).reflect);
    Mat8 m{};
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            m[r][c] = f2[r >> 2][c >> 2] * f1[(r >> 1) & 1][(c >> 1) & 1] * f0[r & 1][c & 1];
    return m;
}

inline Amplitudes ref_apply(const LocalOrthogonalGate& g, const Amplitudes& v) {
    const Mat8 m = ref_kron(g);
    Amplitudes out{};
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) out[r] += m[r][c] * v[c];
    return out;
}

inline Amplitudes ref_apply(const LocalOrthogonalGate& g, const RealState8& s) {
    return ref_apply(g, s.amplitudes());
}

// tr(rho_q^2) = ||M M^T||_F^2 with M the 2x4 unfolding that keeps qubit q as row index.
inline double ref_purity(const Amplitudes& a, int qubit) {
    std::array<std::array<double, 4>, 2> m{};
    for (int i = 0; i < 8; ++i) {
        const int row = (i >> qubit) & 1;
        const int rest_hi = i >> (qubit + 1);
        const int rest_lo = i & ((1 << qubit) - 1);
        m[row][(rest_hi << qubit) | rest_lo] = a[i];
    }
    double acc = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double g = 0.0;
            for (int k = 0; k < 4; ++k) g += m[i][k] * m[j][k];
            acc += g * g;
        }
    return acc;
}

inline double ref_purity(const RealState8& s, int qubit) { return ref_purity(s.amplitudes(), qubit); }

inline double dist(const Amplitudes& a, const Amplitudes& b) {
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

inline S05State random_s05(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    S05State::Coords c{};
    for (auto& v : c) v = g(rng);
    return S05State::normalized(c);
}

inline LocalOrthogonalGate random_gate(std::mt19937_64& rng, bool with_reflections = true) {
    std::uniform_real_distribution<double> angle(0.0, kFourPi);
    std::bernoulli_distribution coin(0.5);
    std::array<QubitFactor, 3> f{};
    for (auto& q : f) q = QubitFactor{angle(rng), with_reflections && coin(rng)};
    return LocalOrthogonalGate(f);
}

// Random point of S1 (x1 = x4, x3 = -x5), S2 (x1 = -x4, x3 = x5) or S3 (x1 = x4 = 0).
inline S05State random_on_sphere(std::mt19937_64& rng, EquilibriumTag tag) {
    std::normal_distribution<double> g;
    const double a = g(rng), b = g(rng), x2 = g(rng), x6 = g(rng);
    switch (tag) {
        case EquilibriumTag::S1: return S05State::normalized({a, x2, b, a, -b, x6});
        case EquilibriumTag::S2: return S05State::normalized({a, x2, b, -a, b, x6});
        default: return S05State::normalized({0.0, x2, a, 0.0, b, x6});
    }
}

// x1 = x4 = a with x2 > 0 and the rest random; these orbits approach S1 slowly.
inline S05State s1_adjacent(std::mt19937_64& rng, double a = 0.4) {
    std::normal_distribution<double> g;
    std::array<double, 4> r{};
    double n = 0.0;
    for (auto& v : r) {
        v = g(rng);
        n += v * v;
    }
    n = std::sqrt(n) / std::sqrt(1.0 - 2.0 * a * a);
    return S05State({a, std::abs(r[0]) / n, r[1] / n, a, r[2] / n, r[3] / n});
}

}  // namespace rs_test
