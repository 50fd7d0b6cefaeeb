#pragma once

// Subcommands of the real_schmidt command-line tool, kept in a header so the
// test suite can drive them without spawning processes.
//
// Exit codes: 0 success, 2 invalid input or arguments, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "real_schmidt/real_schmidt.hpp"

namespace real_schmidt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

/// Malformed state/result file or argument; maps to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

struct StateFile {
    RealState8 state;
    std::optional<std::string> label;
    double raw_norm = 1.0;
};

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

/// Parses {"amplitudes": [8 numbers], "label": "..."}; normalises the amplitudes.
inline StateFile parse_state_json(const std::string& text, const std::string& source = "input") {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(source + ": invalid JSON (" + e.what() + ")");
    }
    if (!doc.is_object()) throw InputError(source + ": top level must be a JSON object");
    if (!doc.contains("amplitudes")) throw InputError(source + ": missing field 'amplitudes'");
    const auto& amps = doc["amplitudes"];
    if (!amps.is_array() || amps.size() != 8)
        throw InputError(source + ": field 'amplitudes' must be an array of exactly 8 numbers (got " +
                         std::to_string(amps.is_array() ? amps.size() : 0) + ")");

    Amplitudes raw{};
    for (std::size_t i = 0; i < 8; ++i) {
        if (!amps[i].is_number())
            throw InputError(source + ": field 'amplitudes'[" + std::to_string(i) + "] is not a number");
        raw[i] = amps[i].get<double>();
    }

    StateFile out;
    if (doc.contains("label")) {
        if (!doc["label"].is_string()) throw InputError(source + ": field 'label' must be a string");
        out.label = doc["label"].get<std::string>();
    }
    double n = 0.0;
    for (double v : raw) n += v * v;
    out.raw_norm = std::sqrt(n);
    try {
        out.state = normalize(raw);
    } catch (const Error& e) {
        throw InputError(source + ": field 'amplitudes': " + e.what());
    }
    return out;
}

inline StateFile load_state_file(const std::string& path) {
    return parse_state_json(read_text_file(path), path);
}

inline std::string state_to_json(const RealState8& s, const std::optional<std::string>& label) {
    std::ostringstream os;
    os << "{\n";
    if (label) os << "  \"label\": " << nlohmann::json(*label).dump() << ",\n";
    os << "  \"amplitudes\": [";
    for (std::size_t i = 0; i < 8; ++i) os << (i ? ", " : "") << format_number(s[i]);
    os << "]\n}\n";
    return os.str();
}

inline std::string result_to_json(const NormalFormResult& r, const std::optional<std::string>& label) {
    std::ostringstream os;
    os << "{\n";
    if (label) os << "  \"label\": " << nlohmann::json(*label).dump() << ",\n";
    os << "  \"lambdas\": [";
    for (std::size_t k = 0; k < 5; ++k) os << (k ? ", " : "") << format_number(r.lambdas[k]);
    os << "],\n  \"gate\": {\n";
    for (std::size_t q = 3; q-- > 0;) {
        const auto& f = r.gate.factor(q);
        os << "    \"q" << q << "\": {\"theta\": " << format_number(f.theta)
           << ", \"reflect\": " << (f.reflect ? "true" : "false") << "}" << (q ? "," : "") << "\n";
    }
    os << "  },\n";
    os << "  \"residual\": " << format_number(r.residual) << ",\n";
    os << "  \"path\": \"" << to_string(r.path) << "\",\n";
    os << "  \"invariants\": {\"I0\": " << format_number(r.invariants.i0)
       << ", \"I2\": " << format_number(r.invariants.i2)
       << ", \"I3\": " << format_number(r.invariants.i3)
       << ", \"I4\": " << format_number(r.invariants.i4) << "}\n";
    os << "}\n";
    return os.str();
}

struct ParsedResult {
    std::array<double, 5> lambdas{};
    LocalOrthogonalGate gate;
    double residual = 0.0;
    std::string path;
    InvariantVector invariants;
};

inline ParsedResult parse_result_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("result file: invalid JSON (") + e.what() + ")");
    }
    try {
        ParsedResult out;
        const auto& l = doc.at("lambdas");
        if (l.size() != 5) throw InputError("result file: 'lambdas' must have 5 entries");
        for (std::size_t k = 0; k < 5; ++k) out.lambdas[k] = l.at(k).get<double>();
        std::array<QubitFactor, 3> f{};
        for (std::size_t q = 0; q < 3; ++q) {
            const auto& g = doc.at("gate").at("q" + std::to_string(q));
            f[q] = QubitFactor{g.at("theta").get<double>(), g.at("reflect").get<bool>()};
        }
        out.gate = LocalOrthogonalGate(f);
        out.residual = doc.at("residual").get<double>();
        out.path = doc.at("path").get<std::string>();
        const auto& inv = doc.at("invariants");
        out.invariants = {inv.at("I0").get<double>(), inv.at("I2").get<double>(),
                          inv.at("I3").get<double>(), inv.at("I4").get<double>()};
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("result file: ") + e.what());
    }
}

inline void write_flow_csv(std::ostream& os, const FlowTrace& trace) {
    os << "t,x1,x2,x3,x4,x5,x6,theta0,theta1,theta2,I0,I2,I3,I4\n";
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        os << format_number(trace.times[i]);
        for (double x : trace.states[i].coords()) os << ',' << format_number(x);
        for (double a : trace.angles[i]) os << ',' << format_number(a);
        for (double v : trace.invariant_values[i].as_array()) os << ',' << format_number(v);
        os << '\n';
    }
}

inline std::string describe_gate(const LocalOrthogonalGate& g) {
    std::ostringstream os;
    for (std::size_t q = 3; q-- > 0;) {
        const auto& f = g.factor(q);
        os << "q" << q << ": theta=" << format_number(f.theta) << (f.reflect ? " reflect" : "")
           << (q ? "  " : "");
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline StateFile load_with_warning(const std::string& path, std::ostream& err) {
    StateFile f = load_state_file(path);
    if (std::abs(f.raw_norm - 1.0) > 1e-9)
        err << "warning: " << path << ": amplitudes had norm " << format_number(f.raw_norm)
            << ", normalised\n";
    return f;
}

struct NormalFormOptions {
    std::string input;
    std::optional<double> tol;
    bool canonical_sign = false;
    std::optional<std::string> out;
};

inline int cmd_normal_form(const NormalFormOptions& opt, std::ostream& out, std::ostream& err) {
    const StateFile in = load_with_warning(opt.input, err);
    ToleranceConfig cfg;
    if (opt.tol) cfg.zero_tol = *opt.tol;
    cfg.validate();

    NormalFormResult r;
    try {
        r = normal_form(in.state, cfg);
    } catch (const NormalFormFailedError& e) {
        err << "normal form failed: " << e.what() << "\n";
        return kExitNumerical;
    }
    if (opt.canonical_sign) r = canonicalize_sign(r);

    out << "path:     " << to_string(r.path) << "\n";
    out << "lambdas:  ";
    for (std::size_t k = 0; k < 5; ++k) out << (k ? " " : "") << format_number(r.lambdas[k]);
    out << "\n         (|000>, |011>, |101>, |110>, |111>)\n";
    out << "gate:     " << describe_gate(r.gate) << "\n";
    out << "residual: " << format_number(r.residual) << "\n";

    const std::string json = result_to_json(r, in.label);
    if (opt.out)
        write_text_file(*opt.out, json);
    else
        out << json;
    return kExitOk;
}

inline int cmd_invariants(const std::string& input, std::ostream& out, std::ostream& err) {
    const StateFile in = load_with_warning(input, err);
    const Stage1Result stage1 = reduce_to_s05(in.state);
    const InvariantVector inv = invariants(stage1.state);
    const auto pur = reduced_purities(in.state);
    out << "I0 = " << format_number(inv.i0) << "\n";
    out << "I2 = " << format_number(inv.i2) << "\n";
    out << "I3 = " << format_number(inv.i3) << "\n";
    out << "I4 = " << format_number(inv.i4) << "\n";
    for (std::size_t q = 0; q < 3; ++q)
        out << "purity(qubit " << q << ") = " << format_number(pur[q]) << "\n";
    return kExitOk;
}

struct FlowCmdOptions {
    std::string input;
    double t_max = 10.0;
    int direction = 1;
    int samples = 100;
    bool stop_at_event = false;
    std::optional<std::string> csv;
};

inline int cmd_flow(const FlowCmdOptions& opt, std::ostream& out, std::ostream& err) {
    if (opt.direction != 1 && opt.direction != -1) throw InputError("--direction must be 1 or -1");
    if (!(opt.t_max > 0.0)) throw InputError("--t-max must be positive");
    if (opt.samples < 0) throw InputError("--samples must be non-negative");
    const StateFile in = load_with_warning(opt.input, err);
    const Stage1Result stage1 = reduce_to_s05(in.state);

    ToleranceConfig cfg;
    FlowOptions fo;
    fo.t_end = opt.t_max;
    fo.sample_interval = opt.samples > 0 ? opt.t_max / opt.samples : 0.0;
    fo.stop_on_event = opt.stop_at_event;
    FlowTrace trace;
    try {
        trace = integrate_flow(stage1.state, opt.direction, cfg, fo);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::StepSizeUnderflow) throw;
        err << "flow failed: " << e.what() << "\n";
        return kExitNumerical;
    }

    if (opt.csv) {
        std::ofstream f(*opt.csv, std::ios::binary);
        if (!f) throw InputError("cannot write '" + *opt.csv + "'");
        write_flow_csv(f, trace);
    } else {
        write_flow_csv(out, trace);
    }
    out << "outcome: " << to_string(trace.outcome) << " at t = " << format_number(trace.end_time)
        << "\n";
    if (trace.first_x2_zero) out << "first x2 zero: t = " << format_number(*trace.first_x2_zero) << "\n";
    out << "invariant drift: " << format_number(trace.invariant_drift) << "\n";
    out << "rows: " << trace.times.size() << "\n";
    return kExitOk;
}

struct OracleOptions {
    std::string input;
    std::string pattern = "000,011,101,110,111";
    int grid = 48;
    std::uint64_t seed = 0;
    bool verify_stability = false;
};

inline void print_search(std::ostream& out, const SearchResult& r) {
    out << "residual: " << format_number(r.residual) << "\n";
    out << "grid residual: " << format_number(r.grid_residual) << " (grid " << r.grid_n
        << " per angle, spacing " << format_number(r.grid_spacing) << " rad)\n";
    out << "best gate: " << describe_gate(r.best_gate) << "\n";
}

inline void print_stability(std::ostream& out, const StabilityReport& rep) {
    out << "stability:";
    for (std::size_t k = 0; k < 3; ++k)
        out << " grid " << rep.grid_sizes[k] << " -> " << format_number(rep.residuals[k]) << ";";
    out << " max relative change " << format_number(rep.max_relative_change()) << "\n";
    out << "note: a grid search only bounds the minimum from above; agreement across grid sizes is "
           "evidence of a positive gap, not a proof.\n";
}

inline int cmd_oracle(const OracleOptions& opt, std::ostream& out, std::ostream& err) {
    Pattern pattern;
    try {
        pattern = Pattern::parse(opt.pattern);
    } catch (const Error& e) {
        throw InputError(std::string("--pattern: ") + e.what());
    }
    const StateFile in = load_with_warning(opt.input, err);
    SearchConfig cfg;
    cfg.grid_n = opt.grid;
    cfg.seed = opt.seed;
    cfg.validate();

    out << "pattern: " << pattern.to_string() << "\n";
    print_search(out, pattern_residual(in.state, pattern, cfg));
    if (opt.verify_stability)
        print_stability(out, stability_triple([&](const SearchConfig& c) {
                            return pattern_residual(in.state, pattern, c);
                        }, cfg));
    return kExitOk;
}

struct EquivOptions {
    std::string a;
    std::string b;
    int grid = 48;
    bool verify_stability = false;
};

inline int cmd_equiv(const EquivOptions& opt, std::ostream& out, std::ostream& err) {
    const StateFile a = load_with_warning(opt.a, err);
    const StateFile b = load_with_warning(opt.b, err);
    SearchConfig cfg;
    cfg.grid_n = opt.grid;
    cfg.validate();
    print_search(out, equivalence_residual(a.state, b.state, cfg));
    if (opt.verify_stability)
        print_stability(out, stability_triple([&](const SearchConfig& c) {
                            return equivalence_residual(a.state, b.state, c);
                        }, cfg));
    return kExitOk;
}

inline int cmd_random(std::uint64_t seed, const std::optional<std::string>& path, std::ostream& out) {
    const std::string json = state_to_json(random_state(seed), "random seed " + std::to_string(seed));
    if (path)
        write_text_file(*path, json);
    else
        out << json;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Normal forms of real 3-qubit states under local orthogonal gates"};
    app.require_subcommand(1);

    NormalFormOptions nf;
    auto* nf_cmd = app.add_subcommand("normal-form", "Reduce a state to the five-term normal form");
    nf_cmd->add_option("input", nf.input, "State JSON file")->required();
    nf_cmd->add_option("--tol", nf.tol, "Zero tolerance for the eliminated amplitudes");
    nf_cmd->add_flag("--canonical-sign", nf.canonical_sign, "Flip the global sign so lambda1 >= 0");
    nf_cmd->add_option("--out", nf.out, "Write the result JSON here instead of stdout");

    std::string inv_input;
    auto* inv_cmd = app.add_subcommand("invariants", "First integrals and single-qubit purities");
    inv_cmd->add_option("input", inv_input, "State JSON file")->required();

    FlowCmdOptions fl;
    auto* fl_cmd = app.add_subcommand("flow", "Integrate the orbit flow and write a CSV trace");
    fl_cmd->add_option("input", fl.input, "State JSON file")->required();
    fl_cmd->add_option("--t-max", fl.t_max, "Final time");
    fl_cmd->add_option("--direction", fl.direction, "1 or -1");
    fl_cmd->add_option("--samples", fl.samples, "Uniform output rows (0: every step)");
    fl_cmd->add_option("--csv", fl.csv, "CSV output path (default stdout)");
    fl_cmd->add_flag("--stop-at-event", fl.stop_at_event, "Stop at the first zero of x2");

    OracleOptions orc;
    auto* orc_cmd = app.add_subcommand("oracle", "Brute-force pattern reachability");
    orc_cmd->add_option("input", orc.input, "State JSON file")->required();
    orc_cmd->add_option("--pattern", orc.pattern, "Comma-separated allowed kets");
    orc_cmd->add_option("--grid", orc.grid, "Grid points per angle");
    orc_cmd->add_option("--seed", orc.seed, "Seed for extra random starts");
    orc_cmd->add_flag("--verify-stability", orc.verify_stability, "Repeat at grid N/2 and 2N");

    EquivOptions eq;
    auto* eq_cmd = app.add_subcommand("equiv", "Brute-force local orthogonal equivalence of two states");
    eq_cmd->add_option("a", eq.a, "First state JSON file")->required();
    eq_cmd->add_option("b", eq.b, "Second state JSON file")->required();
    eq_cmd->add_option("--grid", eq.grid, "Grid points per angle");
    eq_cmd->add_flag("--verify-stability", eq.verify_stability, "Repeat at grid N/2 and 2N");

    std::uint64_t seed = 0;
    std::optional<std::string> random_out;
    auto* rnd_cmd = app.add_subcommand("random", "Emit a reproducible random state");
    rnd_cmd->add_option("--seed", seed, "Generator seed")->required();
    rnd_cmd->add_option("--out", random_out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    }

    try {
        if (*nf_cmd) return cmd_normal_form(nf, out, err);
        if (*inv_cmd) return cmd_invariants(inv_input, out, err);
        if (*fl_cmd) return cmd_flow(fl, out, err);
        if (*orc_cmd) return cmd_oracle(orc, out, err);
        if (*eq_cmd) return cmd_equiv(eq, out, err);
        if (*rnd_cmd) return cmd_random(seed, random_out, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::InvalidConfig || e.kind() == ErrorKind::InvalidPattern ||
                       e.kind() == ErrorKind::InvalidInput
                   ? kExitInvalid
                   : kExitNumerical;
    }
    return kExitInvalid;
}

}  // namespace real_schmidt::cli
