// Runs the library end to end on the state
// xi = (|000> + |001> + |011> + |101> - |110>) / sqrt(5):
// stage-1 reduction, the five-term normal form, and a brute-force
// cross-check of which amplitude patterns are reachable.

#include <cstdio>

#include "real_schmidt/real_schmidt.hpp"

using namespace real_schmidt;

int main() {
    const RealState8 xi = normalize(Amplitudes{1, 1, 0, 1, 0, 1, -1, 0});

    const Stage1Result s1 = reduce_to_s05(xi);
    std::printf("stage 1: theta0 = %.6f, theta2 = %.6f\n", s1.angles.theta0, s1.angles.theta2);

    const NormalFormResult nf = normal_form(xi);
    std::printf("path %s, residual %.3g\n", to_string(nf.path), nf.residual);
    const char* kets[] = {"000", "011", "101", "110", "111"};
    for (std::size_t k = 0; k < 5; ++k) std::printf("  %+.9f |%s>\n", nf.lambdas[k], kets[k]);
    for (std::size_t q = 3; q-- > 0;)
        std::printf("  qubit %zu: theta = %.9f%s\n", q, nf.gate.factor(q).theta,
                    nf.gate.factor(q).reflect ? " (reflected)" : "");

    const auto pur = reduced_purities(xi);
    std::printf("purities: %.6f %.6f %.6f\n", pur[0], pur[1], pur[2]);

    SearchConfig cfg;
    cfg.grid_n = 24;
    std::printf("oracle, target pattern:        %.3g\n",
                pattern_residual(xi, target_pattern(), cfg).residual);
    std::printf("oracle, |000>,|1xx> pattern:   %.6f\n",
                pattern_residual(xi, complex_style_pattern(), cfg).residual);
    return 0;
}
