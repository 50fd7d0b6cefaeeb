#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "cli_commands.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace rs_test;
using real_schmidt::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome call(std::initializer_list<std::string> args) {
    std::vector<std::string> storage{"real_schmidt"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : storage) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("real_schmidt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p.string();
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    static std::string slurp(const std::string& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string ghz_file() {
        return write("ghz.json", R"({"label": "GHZ", "amplitudes": [0.7071067811865476, 0, 0, 0, 0, 0, 0, 0.7071067811865476]})");
    }
    std::string xi_file() { return write("xi.json", R"({"amplitudes": [1, 1, 0, 1, 0, 1, -1, 0]})"); }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, NormalFormGhz) {
    const auto r = call({"normal-form", ghz_file(), "--out", path("out.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto parsed = real_schmidt::cli::parse_result_json(slurp(path("out.json")));
    EXPECT_EQ(parsed.path, "AlreadyNormal");
    EXPECT_NEAR(parsed.lambdas[0], kInvSqrt2, 1e-15);
    EXPECT_NEAR(parsed.lambdas[4], kInvSqrt2, 1e-15);
    for (int k = 1; k < 4; ++k) EXPECT_EQ(parsed.lambdas[k], 0.0);
    EXPECT_NE(r.out.find("AlreadyNormal"), std::string::npos);
}

TEST_F(CliTest, NormalFormXiRoundTrip) {
    const std::string in = xi_file();
    const auto r = call({"normal-form", in, "--out", path("xi_nf.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos);  // unnormalised input

    const auto parsed = real_schmidt::cli::parse_result_json(slurp(path("xi_nf.json")));
    EXPECT_LT(parsed.residual, 1e-8);
    const auto state = real_schmidt::cli::load_state_file(in).state;
    const Amplitudes v = ref_apply(parsed.gate, state);
    Amplitudes want{};
    for (std::size_t k = 0; k < 5; ++k) want[kNormalFormKets[k]] = parsed.lambdas[k];
    EXPECT_LE(dist(v, want), parsed.residual + 1e-9);
}

TEST_F(CliTest, OutputIsByteIdentical) {
    const std::string in = xi_file();
    ASSERT_EQ(call({"normal-form", in, "--out", path("a.json")}).code, 0);
    ASSERT_EQ(call({"normal-form", in, "--out", path("b.json")}).code, 0);
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
    EXPECT_EQ(call({"random", "--seed", "5"}).out, call({"random", "--seed", "5"}).out);
}

TEST_F(CliTest, CanonicalSign) {
    for (int seed = 0; seed < 20; ++seed) {
        const std::string f = path("r.json");
        ASSERT_EQ(call({"random", "--seed", std::to_string(seed), "--out", f}).code, 0);
        ASSERT_EQ(call({"normal-form", f, "--canonical-sign", "--out", path("nf.json")}).code, 0);
        EXPECT_GE(real_schmidt::cli::parse_result_json(slurp(path("nf.json"))).lambdas[0], 0.0);
    }
}

TEST_F(CliTest, SevenAmplitudesRejected) {
    const auto f = write("bad.json", R"({"amplitudes": [1, 0, 0, 0, 0, 0, 0]})");
    const auto r = call({"normal-form", f});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("amplitudes"), std::string::npos);
}

TEST_F(CliTest, MalformedInputsExitTwo) {
    EXPECT_EQ(call({"normal-form", write("a.json", "{not json")}).code, 2);
    EXPECT_EQ(call({"normal-form", write("b.json", R"({"amps": []})")}).code, 2);
    EXPECT_EQ(call({"normal-form", write("c.json", R"({"amplitudes": [0,0,0,0,0,0,0,0]})")}).code, 2);
    EXPECT_EQ(call({"normal-form", write("d.json", R"({"amplitudes": [1,0,0,0,0,0,0,"x"]})")}).code, 2);
    EXPECT_EQ(call({"normal-form", path("missing.json")}).code, 2);
    EXPECT_EQ(call({"no-such-command"}).code, 2);
    EXPECT_EQ(call({"normal-form", ghz_file(), "--tol", "-1"}).code, 2);
}

// A tolerance below rounding level cannot be met by any gate.
TEST_F(CliTest, NumericalFailureExitThree) {
    const auto r = call({"normal-form", xi_file(), "--tol", "1e-300"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("error: "), std::string::npos) << r.err;
}

TEST_F(CliTest, Invariants) {
    const auto g = call({"invariants", ghz_file()});
    ASSERT_EQ(g.code, 0);
    EXPECT_NE(g.out.find("I0 = 0.25"), std::string::npos) << g.out;
    EXPECT_NE(g.out.find("purity(qubit 2) = 0.5"), std::string::npos) << g.out;

    const auto z = call({"invariants", write("z.json", R"({"amplitudes": [1,0,0,0,0,0,0,0]})")});
    EXPECT_NE(z.out.find("I0 = 0\n"), std::string::npos) << z.out;
    EXPECT_NE(z.out.find("I4 = 1\n"), std::string::npos) << z.out;

    const auto c = call({"invariants", write("c.json", R"({"amplitudes": [0, 0.5, -0.5, 0, 0.5, 0, 0, 0.5]})")});
    EXPECT_NE(c.out.find("I0 = -0.25"), std::string::npos) << c.out;
}

TEST_F(CliTest, FlowEquilibriumSingleRow) {
    // (|000> + |101>) / sqrt(2) lies on S1
    const auto f = write("eq.json", R"({"amplitudes": [1, 0, 0, 0, 0, 1, 0, 0]})");
    const auto r = call({"flow", f, "--csv", path("t.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("Stagnation"), std::string::npos);
    std::ifstream in(path("t.csv"));
    std::string header, row, extra;
    std::getline(in, header);
    EXPECT_EQ(header, "t,x1,x2,x3,x4,x5,x6,theta0,theta1,theta2,I0,I2,I3,I4");
    EXPECT_TRUE(static_cast<bool>(std::getline(in, row)));
    EXPECT_FALSE(static_cast<bool>(std::getline(in, extra)));
}

TEST_F(CliTest, FlowDriftSmall) {
    const std::string f = path("r.json");
    ASSERT_EQ(call({"random", "--seed", "3", "--out", f}).code, 0);
    const auto r = call({"flow", f, "--t-max", "10", "--samples", "50", "--csv", path("t.csv")});
    ASSERT_EQ(r.code, 0) << r.err;

    std::ifstream in(path("t.csv"));
    std::string line;
    std::getline(in, line);
    std::vector<std::array<double, 4>> inv;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::vector<double> cols;
        for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(std::stod(cell));
        ASSERT_EQ(cols.size(), 14u);
        inv.push_back({cols[10], cols[11], cols[12], cols[13]});
    }
    ASSERT_GT(inv.size(), 40u);
    for (const auto& row : inv)
        for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(row[k] - inv[0][k]), 1e-8);
}

TEST_F(CliTest, FlowRejectsBadDirection) {
    EXPECT_EQ(call({"flow", ghz_file(), "--direction", "0"}).code, 2);
}

TEST_F(CliTest, OracleAndEquiv) {
    const std::string in = xi_file();
    const auto bad = call({"oracle", in, "--pattern", "000,01"});
    EXPECT_EQ(bad.code, 2);

    const auto target = call({"oracle", in, "--pattern", "000,011,101,110,111", "--grid", "16"});
    ASSERT_EQ(target.code, 0) << target.err;
    const auto pos = target.out.find("residual: ");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_LT(std::stod(target.out.substr(pos + 10)), 1e-6);

    const auto cs = call({"oracle", in, "--pattern", "000,100,101,110,111", "--grid", "16",
                          "--verify-stability"});
    ASSERT_EQ(cs.code, 0);
    EXPECT_GT(std::stod(cs.out.substr(cs.out.find("residual: ") + 10)), 0.01);
    EXPECT_NE(cs.out.find("not a proof"), std::string::npos);

    const auto same = call({"equiv", in, in, "--grid", "16"});
    ASSERT_EQ(same.code, 0);
    EXPECT_LT(std::stod(same.out.substr(same.out.find("residual: ") + 10)), 1e-10);
}

TEST_F(CliTest, RandomStateFile) {
    const auto r = call({"random", "--seed", "11", "--out", path("s.json")});
    ASSERT_EQ(r.code, 0);
    const auto f = real_schmidt::cli::load_state_file(path("s.json"));
    EXPECT_LT(distance(f.state, random_state(11)), 1e-15);
    EXPECT_EQ(call({"random"}).code, 2);
}
