#pragma once

// Brute-force search over the full local orthogonal group O(2)^{x3}: a grid over
// [0, 4pi)^3 in each of the 8 reflection sectors, then Nelder-Mead refinement.
// Used as an independent check on the normal-form pipeline and to exhibit
// patterns or states that local orthogonal gates cannot reach.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "real_schmidt/core_states.hpp"

namespace real_schmidt {

/// Set of basis kets allowed to carry amplitude.
class Pattern {
public:
    Pattern() = default;
    explicit Pattern(std::bitset<8> allowed) : allowed_(allowed) {
        if (allowed_.none()) throw Error(ErrorKind::InvalidPattern, "pattern must not be empty");
    }

    /// Parses comma-separated 3-bit kets such as "000,011,101".
    static Pattern parse(std::string_view csv) {
        std::bitset<8> bits;
        std::size_t pos = 0;
        while (pos <= csv.size()) {
            const std::size_t comma = std::min(csv.find(',', pos), csv.size());
            std::string_view token = csv.substr(pos, comma - pos);
            while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
            while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
            if (token.size() != 3 || token.find_first_not_of("01") != std::string_view::npos)
                throw Error(ErrorKind::InvalidPattern,
                            "ket '" + std::string(token) + "' is not a 3-bit string");
            bits.set(static_cast<std::size_t>(std::stoi(std::string(token), nullptr, 2)));
            pos = comma + 1;
        }
        return Pattern(bits);
    }

    bool allows(std::size_t index) const { return allowed_.test(index); }
    const std::bitset<8>& bits() const noexcept { return allowed_; }

    std::string to_string() const {
        std::string out;
        for (std::size_t i = 0; i < 8; ++i) {
            if (!allowed_.test(i)) continue;
            if (!out.empty()) out += ',';
            out += std::bitset<3>(i).to_string();
        }
        return out;
    }

private:
    std::bitset<8> allowed_{0xff};
};

/// {000, 011, 101, 110, 111}: reachable from every real state.
inline Pattern target_pattern() { return Pattern::parse("000,011,101,110,111"); }
/// {000, 100, 101, 110, 111}: the shape of the complex-amplitude five-term form.
inline Pattern complex_style_pattern() { return Pattern::parse("000,100,101,110,111"); }

struct SearchConfig {
    int grid_n = 48;
    int refine_iterations = 200;
    std::uint64_t seed = 0;
    int refine_starts = 64;  // lowest grid local minima refined per sector
    int extra_starts = 0;    // seeded random Nelder-Mead starts per sector
    unsigned threads = 0;  // 0: REAL_SCHMIDT_THREADS or hardware concurrency

    void validate() const {
        if (grid_n < 8) throw Error(ErrorKind::InvalidConfig, "grid_n must be at least 8");
        if (refine_starts < 1) throw Error(ErrorKind::InvalidConfig, "refine_starts must be at least 1");
        if (refine_iterations < 0 || extra_starts < 0)
            throw Error(ErrorKind::InvalidConfig, "iteration counts must be non-negative");
    }
};

struct SearchResult {
    double residual = 0.0;
    LocalOrthogonalGate best_gate;
    double grid_residual = 0.0;  // best value before refinement
    int grid_n = 0;
    double grid_spacing = 0.0;  // radians
};

namespace detail {

using Objective = std::function<double(const Amplitudes&)>;

inline unsigned oracle_threads(unsigned requested) {
    unsigned n = requested;
    if (n == 0) {
        if (const char* env = std::getenv("REAL_SCHMIDT_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v > 0) n = static_cast<unsigned>(v);
        }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return std::min(n, 8u);
}

inline void disable_gsl_abort() {
    static std::once_flag once;
    std::call_once(once, [] { gsl_set_error_handler_off(); });
}

inline std::array<bool, 3> sector_reflections(int sector) {
    return {(sector & 1) != 0, (sector & 2) != 0, (sector & 4) != 0};
}

inline LocalOrthogonalGate sector_gate(int sector, const std::array<double, 3>& theta) {
    const auto r = sector_reflections(sector);
    return LocalOrthogonalGate(
        {QubitFactor{theta[0], r[0]}, QubitFactor{theta[1], r[1]}, QubitFactor{theta[2], r[2]}});
}

struct SectorBest {
    double value = std::numeric_limits<double>::infinity();
    double grid_value = std::numeric_limits<double>::infinity();
    std::array<double, 3> theta{};
};

struct NelderMeadContext {
    const Objective* objective;
    const RealState8* state;
    int sector;
};

inline double nelder_mead_trampoline(const gsl_vector* v, void* params) {
    const auto* ctx = static_cast<const NelderMeadContext*>(params);
    const std::array<double, 3> t{gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2)};
    return (*ctx->objective)(apply_local_gate(sector_gate(ctx->sector, t), *ctx->state).amplitudes());
}

// Simplex descent from `start`; returns the best point found and its value.
inline std::pair<std::array<double, 3>, double> nelder_mead(const Objective& objective,
                                                            const RealState8& s, int sector,
                                                            const std::array<double, 3>& start,
                                                            double step, int max_iterations) {
    NelderMeadContext ctx{&objective, &s, sector};
    gsl_multimin_function fn{&nelder_mead_trampoline, 3, &ctx};

    using VecPtr = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;
    VecPtr x(gsl_vector_alloc(3), &gsl_vector_free);
    VecPtr steps(gsl_vector_alloc(3), &gsl_vector_free);
    for (std::size_t i = 0; i < 3; ++i) {
        gsl_vector_set(x.get(), i, start[i]);
        gsl_vector_set(steps.get(), i, step);
    }
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> m(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3),
        &gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(m.get(), &fn, x.get(), steps.get());

    for (int it = 0; it < max_iterations; ++it) {
        if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), 1e-13) == GSL_SUCCESS)
            break;
    }
    const gsl_vector* best = gsl_multimin_fminimizer_x(m.get());
    const double value = gsl_multimin_fminimizer_minimum(m.get());
    const std::array<double, 3> theta{gsl_vector_get(best, 0), gsl_vector_get(best, 1),
                                      gsl_vector_get(best, 2)};
    if (!std::isfinite(value))
        return {start, objective(apply_local_gate(sector_gate(sector, start), s).amplitudes())};
    return {theta, value};
}

inline SectorBest search_sector(const Objective& objective, const RealState8& s, int sector,
                                const SearchConfig& cfg) {
    const auto refl = sector_reflections(sector);
    const int n = cfg.grid_n;
    const double spacing = kFourPi / n;

    std::array<std::vector<Matrix2>, 3> factors;
    for (std::size_t q = 0; q < 3; ++q) {
        factors[q].reserve(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) factors[q].push_back(QubitFactor{spacing * k, refl[q]}.matrix());
    }

    // values[(i0 * n + i1) * n + i2] for the cell (i0, i1, i2).
    const auto un = static_cast<std::size_t>(n);
    std::vector<double> values(un * un * un);
    for (std::size_t i0 = 0; i0 < un; ++i0) {
        Amplitudes a0 = s.amplitudes();
        apply_single_qubit(factors[0][i0], 0, a0);
        for (std::size_t i1 = 0; i1 < un; ++i1) {
            Amplitudes a1 = a0;
            apply_single_qubit(factors[1][i1], 1, a1);
            for (std::size_t i2 = 0; i2 < un; ++i2) {
                Amplitudes a2 = a1;
                apply_single_qubit(factors[2][i2], 2, a2);
                values[(i0 * un + i1) * un + i2] = objective(a2);
            }
        }
    }

    // Periodic local minima of the grid over the six face neighbours. A single
    // descent from the best cell can stall in a spurious basin, so several of the
    // lowest minima are refined; ordering is (value, cell index) for determinism.
    auto cell = [&](std::size_t i0, std::size_t i1, std::size_t i2) {
        return values[(i0 * un + i1) * un + i2];
    };
    std::vector<std::pair<double, std::size_t>> minima;
    for (std::size_t i0 = 0; i0 < un; ++i0)
        for (std::size_t i1 = 0; i1 < un; ++i1)
            for (std::size_t i2 = 0; i2 < un; ++i2) {
                const double v = cell(i0, i1, i2);
                const auto up = [&](std::size_t i) { return (i + 1) % un; };
                const auto dn = [&](std::size_t i) { return (i + un - 1) % un; };
                if (v <= cell(up(i0), i1, i2) && v <= cell(dn(i0), i1, i2) &&
                    v <= cell(i0, up(i1), i2) && v <= cell(i0, dn(i1), i2) &&
                    v <= cell(i0, i1, up(i2)) && v <= cell(i0, i1, dn(i2)))
                    minima.emplace_back(v, (i0 * un + i1) * un + i2);
            }
    const std::size_t keep = std::min(minima.size(), static_cast<std::size_t>(cfg.refine_starts));
    std::partial_sort(minima.begin(), minima.begin() + static_cast<std::ptrdiff_t>(keep), minima.end());
    minima.resize(keep);

    auto theta_of = [&](std::size_t flat) {
        return std::array<double, 3>{spacing * static_cast<double>(flat / (un * un)),
                                     spacing * static_cast<double>((flat / un) % un),
                                     spacing * static_cast<double>(flat % un)};
    };

    // The global grid minimum is always a local minimum, so minima[0] is the best cell.
    SectorBest best;
    best.grid_value = minima.front().first;
    best.value = best.grid_value;
    best.theta = theta_of(minima.front().second);

    auto refine_from = [&](const std::array<double, 3>& start) {
        if (cfg.refine_iterations == 0) return;
        const auto [theta, value] =
            nelder_mead(objective, s, sector, start, spacing, cfg.refine_iterations);
        if (value < best.value) {
            best.value = value;
            best.theta = theta;
        }
    };
    for (const auto& m : minima) refine_from(theta_of(m.second));

    if (cfg.extra_starts > 0) {
        std::mt19937_64 rng(cfg.seed * 8u + static_cast<std::uint64_t>(sector));
        std::uniform_real_distribution<double> angle(0.0, kFourPi);
        for (int k = 0; k < cfg.extra_starts; ++k) refine_from({angle(rng), angle(rng), angle(rng)});
    }
    return best;
}

inline SearchResult search_group(const Objective& objective, const RealState8& s,
                                 const SearchConfig& cfg) {
    cfg.validate();
    disable_gsl_abort();

    std::array<SectorBest, 8> per_sector;
    const unsigned workers = oracle_threads(cfg.threads);
    if (workers <= 1) {
        for (int sector = 0; sector < 8; ++sector)
            per_sector[static_cast<std::size_t>(sector)] = search_sector(objective, s, sector, cfg);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (unsigned sector = w; sector < 8; sector += workers)
                    per_sector[sector] = search_sector(objective, s, static_cast<int>(sector), cfg);
            });
        }
        for (auto& t : pool) t.join();
    }

    // Lowest sector index wins ties.
    int best_sector = 0;
    double grid_best = per_sector[0].grid_value;
    for (int sector = 1; sector < 8; ++sector) {
        const auto& b = per_sector[static_cast<std::size_t>(sector)];
        if (b.value < per_sector[static_cast<std::size_t>(best_sector)].value) best_sector = sector;
        grid_best = std::min(grid_best, b.grid_value);
    }

    const auto& b = per_sector[static_cast<std::size_t>(best_sector)];
    SearchResult out;
    out.best_gate = sector_gate(best_sector, b.theta);
    // Report the residual of the gate actually returned.
    out.residual = std::sqrt(objective(apply_local_gate(out.best_gate, s).amplitudes()));
    out.grid_residual = std::sqrt(grid_best);
    out.grid_n = cfg.grid_n;
    out.grid_spacing = kFourPi / cfg.grid_n;
    return out;
}

}  // namespace detail

/// Smallest norm of the amplitudes outside `p` over the searched gates (an upper
/// bound on the true minimum).
inline SearchResult pattern_residual(const RealState8& s, const Pattern& p,
                                     const SearchConfig& cfg = {}) {
    const detail::Objective objective = [p](const Amplitudes& v) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
            if (!p.allows(i)) acc += v[i] * v[i];
        return acc;
    };
    return detail::search_group(objective, s, cfg);
}

/// Smallest ||U a - b|| over the searched gates U.
inline SearchResult equivalence_residual(const RealState8& a, const RealState8& b,
                                         const SearchConfig& cfg = {}) {
    const Amplitudes target = b.amplitudes();
    const detail::Objective objective = [target](const Amplitudes& v) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 8; ++i) acc += (v[i] - target[i]) * (v[i] - target[i]);
        return acc;
    };
    return detail::search_group(objective, a, cfg);
}

/// Residuals at grid sizes n/2, n and 2n; a stable triple is the evidence that a
/// positive minimum is real and not a grid artefact.
struct StabilityReport {
    std::array<int, 3> grid_sizes{};
    std::array<double, 3> residuals{};

    double max_relative_change() const {
        const double ref = residuals[2];
        if (!(ref > 0.0)) return std::numeric_limits<double>::infinity();
        return std::max(std::abs(residuals[1] - residuals[0]), std::abs(residuals[2] - residuals[1])) /
               ref;
    }
};

template <class Search>
StabilityReport stability_triple(Search&& search, const SearchConfig& cfg) {
    StabilityReport rep;
    rep.grid_sizes = {std::max(8, cfg.grid_n / 2), cfg.grid_n, cfg.grid_n * 2};
    for (std::size_t k = 0; k < 3; ++k) {
        SearchConfig c = cfg;
        c.grid_n = rep.grid_sizes[k];
        rep.residuals[k] = search(c).residual;
    }
    return rep;
}

/// Seeded Gaussian sample normalised onto the 7-sphere.
inline RealState8 random_state(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Amplitudes a{};
    for (;;) {
        for (auto& v : a) v = gauss(rng);
        double n = 0.0;
        for (double v : a) n += v * v;
        if (n > 1e-20) break;
    }
    return normalize(a);
}

}  // namespace real_schmidt
