#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nratio/io.hpp"
#include "nratio/nratio.hpp"

using namespace nratio;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status;
    std::string out;
};

// Runs the CLI through the shell; `redirect` is appended verbatim (e.g. "2>&1").
Run cli(const std::string& args, const std::string& redirect = "2>/dev/null") {
    const std::string cmd = std::string(NRATIO_CLI_PATH) + " " + args + " " + redirect;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return {-1, ""};
    std::string out;
    std::array<char, 4096> buf;
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe))
        out.append(buf.data(), n);
    const int raw = pclose(pipe);
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::string doc(const std::string& name) { return std::string("--model ") + NRATIO_DOCS_DIR + "/" + name; }

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

std::vector<double> csv_row(const std::string& line) { return io::parse_list(line, "csv"); }

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("nratio_cli_" + std::to_string(::getpid()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

TEST(CliDensity, CentralModels) {
    auto r = cli(doc("central2.json") + " density --point 0");
    EXPECT_EQ(r.status, 0);
    EXPECT_NEAR(std::stod(r.out), 1.0 / std::numbers::pi, 1e-16);
    EXPECT_EQ(r.out.back(), '\n');

    r = cli(doc("central3.json") + " density --point 0,0");
    EXPECT_EQ(r.status, 0);
    EXPECT_NEAR(std::stod(r.out), 0.5 / std::numbers::pi, 1e-16);
}

TEST(CliDensity, SeventeenSignificantDigits) {
    const auto r = cli(doc("central2.json") + " density --point 0");
    EXPECT_EQ(r.out, "0.31830988618379075\n");
}

TEST(CliDensity, LogFlag) {
    const auto r = cli(doc("central2.json") + " density --point 0 --log");
    EXPECT_EQ(r.status, 0);
    EXPECT_NEAR(std::stod(r.out), -std::log(std::numbers::pi), 1e-15);
}

TEST(CliDensity, MalformedPointNamesToken) {
    const auto r = cli(doc("central2.json") + " density --point 0,,1", "2>&1");
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.out.find("''"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("position 2"), std::string::npos) << r.out;
}

TEST(CliDensity, InputErrors) {
    EXPECT_EQ(cli(doc("central2.json") + " density --point 1,2").status, 2);
    EXPECT_EQ(cli("--model /nonexistent.json density --point 0").status, 2);
    EXPECT_EQ(cli("density --point 0").status, 2);
    EXPECT_EQ(cli(doc("central2.json") + " density").status, 2);
    EXPECT_EQ(cli("no-such-command").status, 2);

    TempDir tmp;
    std::ofstream(tmp.file("bad.json")) << R"({"mu": [0, 0], "sigma": [[1, 0], [0, 1]], "nu": 3})";
    const auto r = cli("--model " + tmp.file("bad.json") + " density --point 0", "2>&1");
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.out.find("unknown key 'nu'"), std::string::npos);

    std::ofstream(tmp.file("notspd.json")) << R"({"mu": [0, 0], "sigma": [[1, 2], [2, 1]]})";
    EXPECT_EQ(cli("--model " + tmp.file("notspd.json") + " density --point 0").status, 2);
}

TEST(CliGrid, OneDimensionalSymmetric) {
    const auto r = cli(doc("central2.json") + " density-grid --lo -5 --hi 5 --steps 101");
    ASSERT_EQ(r.status, 0);
    const auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 102u);
    EXPECT_EQ(ls[0], "y1,density");
    for (std::size_t i = 1; i <= 101; ++i) {
        const auto a = csv_row(ls[i]), b = csv_row(ls[102 - i]);
        EXPECT_EQ(a[0], -b[0]);
        EXPECT_NEAR(a[1], b[1], 1e-12);
    }
}

TEST(CliGrid, TwoDimensionalCount) {
    TempDir tmp;
    const auto r = cli(doc("central3.json") + " --out " + tmp.file("g.csv") + " density-grid --lo -2,-2 --hi 2,2 --steps 51");
    ASSERT_EQ(r.status, 0);
    const auto ls = lines(slurp(tmp.file("g.csv")));
    ASSERT_EQ(ls.size(), 2602u);
    EXPECT_EQ(ls[0], "y1,y2,density");
    // Row order is lexicographic over (i, j).
    EXPECT_EQ(csv_row(ls[1]), (Vector{-2, -2, csv_row(ls[1])[2]}));
    EXPECT_EQ(csv_row(ls[2])[1], -2 + 4.0 / 50);
    EXPECT_EQ(csv_row(ls[52])[0], -2 + 4.0 / 50);
}

TEST(CliGrid, JsonFormat) {
    const auto r = cli(doc("central2.json") + " --format json density-grid --lo -1 --hi 1 --steps 5");
    ASSERT_EQ(r.status, 0);
    const auto j = nlohmann::json::parse(r.out);
    ASSERT_EQ(j.size(), 5u);
    EXPECT_EQ(j[2]["y"][0].get<double>(), 0.0);
    EXPECT_DOUBLE_EQ(j[2]["density"].get<double>(), 1.0 / std::numbers::pi);
}

TEST(CliGrid, RiemannSumMatchesQuadrature) {
    // Price elasticity alone: the p = 2 sub-model (y, b1 p).
    const auto m = io::load_model(std::string(NRATIO_DOCS_DIR) + "/elasticity.json");
    const NormalRatioModel slice(Vector{m.mu()[0], m.mu()[1]},
                                 Matrix::from_rows({{m.sigma()(0, 0), m.sigma()(0, 1)},
                                                    {m.sigma()(1, 0), m.sigma()(1, 1)}}));
    TempDir tmp;
    std::ofstream(tmp.file("slice.json")) << io::model_to_json(slice);
    const auto g = cli("--model " + tmp.file("slice.json") + " density-grid --lo -1 --hi 0.5 --steps 3001");
    ASSERT_EQ(g.status, 0);
    const auto ls = lines(g.out);
    const double h = 1.5 / 3000;
    double trap = 0.0;
    for (std::size_t i = 1; i < ls.size(); ++i)
        trap += csv_row(ls[i])[1] * ((i == 1 || i + 1 == ls.size()) ? 0.5 : 1.0);
    trap *= h;
    const auto q = quad::integrate([&](double y) { return density(slice, RatioPoint({y})); }, -1.0, 0.5);
    EXPECT_NEAR(trap, q.value, 1e-5);
    EXPECT_GT(q.value, 0.99);
}

TEST(CliGrid, Errors) {
    EXPECT_EQ(cli(doc("central2.json") + " density-grid --lo -1 --hi 1 --steps 1").status, 2);
    EXPECT_EQ(cli(doc("central2.json") + " density-grid --lo 1 --hi -1").status, 2);
    EXPECT_EQ(cli(doc("central2.json") + " --format xml density-grid --lo -1 --hi 1").status, 2);
    EXPECT_EQ(cli(doc("central2.json") + " --out /nonexistent/dir/g.csv density-grid --lo -1 --hi 1").status, 2);
    TempDir tmp;
    std::ofstream(tmp.file("p4.json")) << R"({"mu":[1,0,0,0],"sigma":[[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]})";
    EXPECT_EQ(cli("--model " + tmp.file("p4.json") + " density-grid --lo 0,0,0 --hi 1,1,1").status, 2);
}

TEST(CliCdf, WorkedExampleApprox) {
    const auto r = cli(doc("worked_example.json") + " cdf --t 2,3 --method approx", "2>&1");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(r.out.find("warning"), std::string::npos);
    EXPECT_NEAR(std::stod(r.out), 1.0, 1e-12);
    EXPECT_NE(r.out.find(" +/- "), std::string::npos);
}

TEST(CliCdf, WarnsWhenDenominatorCanBeNegative) {
    const auto r = cli(doc("central2.json") + " cdf --t 0 --method approx", "2>&1");
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("warning"), std::string::npos);
}

TEST(CliCdf, ExactAgreesWithMonteCarlo) {
    const auto e = cli(doc("elasticity.json") + " --format json cdf --t -0.3,1.1 --method exact");
    const auto m = cli(doc("elasticity.json") + " --format json cdf --t -0.3,1.1 --method mc --n 1000000");
    ASSERT_EQ(e.status, 0);
    ASSERT_EQ(m.status, 0);
    const auto je = nlohmann::json::parse(e.out), jm = nlohmann::json::parse(m.out);
    const double se = jm["error_estimate"].get<double>();
    EXPECT_GT(se, 0.0);
    EXPECT_NEAR(je["value"].get<double>(), jm["value"].get<double>(), 3.0 * se + je["error_estimate"].get<double>());
    EXPECT_EQ(je["method"], "exact/qmc");
}

TEST(CliCdf, Errors) {
    EXPECT_EQ(cli(doc("worked_example.json") + " cdf --t 2").status, 2);
    EXPECT_EQ(cli(doc("worked_example.json") + " cdf --t 2,3 --method magic").status, 2);

    TempDir tmp;
    std::ofstream(tmp.file("fragile.json"))
        << R"({"mu":[1,0,0],"sigma":[[1,0,0],[0,1,1],[0,1,1.0000000000000002]]})";
    EXPECT_EQ(cli("--model " + tmp.file("fragile.json") + " cdf --t 1,1").status, 3);
}

TEST(CliSample, DeterministicFiles) {
    TempDir tmp;
    const std::string base = doc("elasticity.json") + " --seed 42 --out ";
    ASSERT_EQ(cli(base + tmp.file("a.csv") + " sample --n 5").status, 0);
    ASSERT_EQ(cli(base + tmp.file("b.csv") + " sample --n 5").status, 0);
    const std::string a = slurp(tmp.file("a.csv"));
    EXPECT_EQ(a, slurp(tmp.file("b.csv")));
    const auto ls = lines(a);
    ASSERT_EQ(ls.size(), 6u);
    EXPECT_EQ(ls[0], "y1,y2");
    for (std::size_t i = 1; i < ls.size(); ++i)
        EXPECT_EQ(csv_row(ls[i]).size(), 2u);
}

TEST(CliSample, Errors) {
    EXPECT_EQ(cli(doc("central2.json") + " sample --n 0").status, 2);
    EXPECT_EQ(cli(doc("central2.json") + " sample --n -3").status, 2);
}

TEST(CliSample, RoundTripReproducesEmpiricalCdf) {
    TempDir tmp;
    const std::string model = std::string(NRATIO_DOCS_DIR) + "/elasticity.json";
    ASSERT_EQ(cli("--model " + model + " --seed 7 --out " + tmp.file("s.csv") + " sample --n 20000").status, 0);
    const auto ls = lines(slurp(tmp.file("s.csv")));
    Matrix x(ls.size() - 1, 3);
    for (std::size_t r = 1; r < ls.size(); ++r) {
        const auto v = csv_row(ls[r]);
        x(r - 1, 0) = 1.0;
        x(r - 1, 1) = v[0];
        x(r - 1, 2) = v[1];
    }
    const auto from_file = to_ratios(x, 7);
    const auto in_process = sample_ratios(io::load_model(model), 20000, 7);
    EXPECT_EQ(from_file.ratios, in_process.ratios);
    for (const Vector& t : {Vector{-0.4, 1.0}, Vector{-0.3, 1.2}, Vector{0.0, 0.0}})
        EXPECT_EQ(empirical_cdf(from_file, t), empirical_cdf(in_process, t));
}

TEST(CliValidate, CentralModelPasses) {
    const auto r = cli(doc("central2.json") + " validate --cases 20 --tol 1e-12");
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("cauchy"), std::string::npos);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
    EXPECT_EQ(r.out.find('\x1b'), std::string::npos);
}

TEST(CliValidate, RandomCasesJson) {
    const auto r = cli("validate --cases 200 --json");
    ASSERT_EQ(r.status, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["pass"].get<bool>());
    EXPECT_LE(j["max_rel_error"].get<double>(), 1e-8);
    EXPECT_GE(j["checks"].size(), 200u);
    std::set<int> ps;
    for (const auto& c : j["checks"])
        ps.insert(c["p"].get<int>());
    EXPECT_EQ(ps, (std::set<int>{2, 3, 4, 5}));
}

TEST(CliValidate, ZeroToleranceFailsHonestly) {
    const auto r = cli("validate --cases 50 --tol 0 --json");
    EXPECT_EQ(r.status, 3);
    EXPECT_FALSE(nlohmann::json::parse(r.out)["pass"].get<bool>());
}

TEST(CliModelInfo, Json) {
    const auto r = cli(doc("worked_example.json") + " --format json model-info");
    ASSERT_EQ(r.status, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["p"], 3);
    EXPECT_NEAR(j["validity_diagnostic"].get<double>(), 7.619853024160526066e-24, 1e-26);
    EXPECT_EQ(j["model"]["mu"][0], 10.0);
}

TEST(CliModelInfo, Text) {
    const auto r = cli(doc("elasticity.json") + " model-info");
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("p: 3"), std::string::npos);
}

TEST(Cli, LocaleIndependentOutput) {
    const auto plain = cli(doc("central2.json") + " density --point 0.5");
    ::setenv("LC_ALL", "de_DE.UTF-8", 1);
    const auto german = cli(doc("central2.json") + " density --point 0.5");
    ::unsetenv("LC_ALL");
    EXPECT_NE(plain.out.find('.'), std::string::npos);
    EXPECT_EQ(plain.out.find(','), std::string::npos);
    EXPECT_EQ(plain.out, german.out);
}

} // namespace
