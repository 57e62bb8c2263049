#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "sublin/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace sublin;
using namespace sublin::cli;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sublin_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = scratch(name + ".ini");
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> summary_map(const std::string& csv) {
    std::map<std::string, std::string> m;
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    while (std::getline(ss, line)) {
        const auto comma = line.find(',');
        m[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return m;
}

int run_cli(const std::string& args, const fs::path& stderr_file) {
    const std::string cmd = std::string(SUBLIN_CLI_PATH) + " " + args + " 2> " + stderr_file.string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string example(const std::string& name) { return std::string(SUBLIN_EXAMPLES_DIR) + "/" + name; }

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

}  // namespace

TEST(Config, DefaultsAndValues) {
    auto c = parse("[band]\nsigma_low = 0.1\nsigma_high = 0.3\n[lattice]\nn_steps = 40\n[solve]\nmethod = penalized\n"
                   "schedule = 1, 10, 100\n");
    EXPECT_DOUBLE_EQ(c.band.sigma_low, 0.1);
    EXPECT_EQ(c.lattice.n_steps, 40);
    EXPECT_EQ(c.solve.method, Method::penalized);
    EXPECT_EQ(c.solve.schedule, (std::vector<double>{1, 10, 100}));
    EXPECT_EQ(c.check.suite, check_groups());
}

TEST(Config, RejectsUnknownKeysAndSections) {
    EXPECT_THROW(parse("[band]\nsigma_mid = 0.3\n"), ConfigError);
    EXPECT_THROW(parse("[grid]\nn = 3\n"), ConfigError);
    EXPECT_THROW(parse("n_steps = 3\n[band]\nsigma_low = 0.2\n"), ConfigError);
    EXPECT_THROW(parse("[terminal]\nkind = digital\n"), ConfigError);
    EXPECT_THROW(parse("[solve]\nmethod = newton\n"), ConfigError);
}

TEST(Config, RejectsMalformedValues) {
    EXPECT_THROW(parse("[lattice]\nn_steps = 12x\n"), ConfigError);
    EXPECT_THROW(parse("[band]\nsigma_low = abc\n"), ConfigError);
    EXPECT_THROW(parse("[band]\nsigma_low = 0.6\nsigma_high = 0.5\n"), ConfigError);
    EXPECT_THROW(parse("[solve]\nschedule = 4, 2\n"), ConfigError);
    EXPECT_THROW(parse("[lattice]\ncfl_number = 1.5\n"), ConfigError);
    EXPECT_THROW(parse("[study]\nsteps = 50, 100\n"), ConfigError);
    EXPECT_THROW(parse("[band\nsigma_low = 0.2\n"), ConfigError);
}

TEST(Config, EmptySuiteSelection) {
    auto c = parse("[check]\nsuite =\n");
    EXPECT_TRUE(c.check.suite.empty());
    EXPECT_THROW(cmd_check(c), ConfigError);
    EXPECT_EQ(parse("[check]\n").check.suite, check_groups());
}

TEST(Solve, SummaryMatchesLibraryCall) {
    auto c = load_config(example("hlog_square.ini"));
    auto res = cmd_solve(c);
    auto summary = summary_map(res.outputs.files().at("summary.csv"));
    auto p = make_problem(c);
    auto direct = solve_picard(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    EXPECT_EQ(summary.at("y0"), num(direct.surface.y0()));
    EXPECT_EQ(summary.at("complementarity_pass"), "true");
}

TEST(Solve, InactiveLipschitzMatchesGbsde) {
    auto c = load_config(example("smooth_refinement.ini"));
    auto summary = summary_map(cmd_solve(c).outputs.files().at("summary.csv"));
    auto p = make_problem(c);
    EXPECT_EQ(summary.at("y0"), num(solve_gbsde(p.spec, p.terminal, p.band, p.lattice).y0()));
}

TEST(Solve, CollapsedPutReportsOracle) {
    auto summary = summary_map(cmd_solve(load_config(example("put_collapsed.ini"))).outputs.files().at("summary.csv"));
    ASSERT_TRUE(summary.count("oracle_price"));
    EXPECT_LT(std::stod(summary.at("oracle_rel_error")), 1e-2);
}

TEST(Solve, SurfaceColumns) {
    auto c = load_config(example("tent_y_free.ini"));
    c.lattice.n_steps = 20;
    auto csv = cmd_solve(c).outputs.files().at("surface.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "time_index,space_index,x,Y,Z,lift,policy_variance");
    auto p = make_problem(c);
    const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    EXPECT_EQ(lines, 1 + (p.lattice.n_steps + 1) * p.lattice.size());
}

TEST(Study, PenalizationGapNonincreasing) {
    auto c = load_config(example("put_band.ini"));
    c.lattice.n_steps = 100;
    auto csv = cmd_study(c, "penalization").outputs.files().at("study.csv");
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    double prev = HUGE_VAL;
    int rows = 0;
    while (std::getline(ss, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        const double gap = std::stod(cells[2]);
        EXPECT_LE(gap, prev);
        prev = gap;
        ++rows;
    }
    EXPECT_EQ(rows, 11);
}

TEST(Study, PicardYFreeSingleRow) {
    auto c = load_config(example("tent_y_free.ini"));
    c.lattice.n_steps = 40;
    auto res = cmd_study(c, "picard");
    const auto& csv = res.outputs.files().at("study.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    EXPECT_NE(csv.find("picard,1,,0,"), std::string::npos);
    EXPECT_EQ(res.outputs.files().at("study.svg").rfind("<svg", 0), 0u);
}

TEST(Study, RefinementOrder) {
    auto csv = cmd_study(load_config(example("smooth_refinement.ini")), "refinement").outputs.files().at("study.csv");
    std::stringstream ss(csv);
    std::string line, last;
    while (std::getline(ss, line)) last = line;
    const double order = std::stod(last.substr(last.rfind(',') + 1));
    EXPECT_GE(order, 0.9);
}

TEST(Check, DefaultSuitePasses) {
    auto res = cmd_check(load_config(example("checks.ini")));
    EXPECT_EQ(res.exit_code, 0) << res.failure;
    const auto& csv = res.outputs.files().at("checks.csv");
    EXPECT_EQ(csv.find(",false,"), std::string::npos);
}

TEST(Check, NegativeControlFails) {
    auto res = cmd_check(load_config(example("negative_control.ini")));
    EXPECT_EQ(res.exit_code, ExitCode::numerical_error);
    EXPECT_NE(res.failure.find("divergence_power"), std::string::npos);
}

TEST(Report, CsvQuotingAndNumbers) {
    CsvTable t({"a", "b"});
    t.add({"x,y", "say \"hi\""});
    EXPECT_EQ(t.str(), "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    EXPECT_THROW(t.add({"only"}), Error);
    EXPECT_EQ(num(0.1), "0.10000000000000001");
    EXPECT_EQ(std::stod(num(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Report, OutputSetCommitsAtomically) {
    const auto dir = scratch("commit");
    OutputSet o;
    o.put("a.csv", "1\n");
    o.put("b.svg", "<svg/>\n");
    o.commit(dir);
    EXPECT_EQ(slurp(dir / "a.csv"), "1\n");
    for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(Report, SvgHandlesNonPositive) {
    auto svg = loglog_svg("t", "x", "y", {Series{"s", {1, 2}, {0, 0}}});
    EXPECT_NE(svg.find("no positive values"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Process-level behaviour
// ---------------------------------------------------------------------------

TEST(Process, SolveWritesFiles) {
    const auto out = scratch("solve_ok");
    const auto err = scratch("solve_ok.err");
    EXPECT_EQ(run_cli("solve --config " + example("tent_y_free.ini") + " --out " + out.string(), err), 0);
    EXPECT_TRUE(fs::exists(out / "surface.csv"));
    EXPECT_TRUE(fs::exists(out / "summary.csv"));
}

TEST(Process, MalformedKeyExitsOneWithoutFiles) {
    const auto cfg = write_config("bad", "[band]\nsigma_low = 0.5\nsigma_hgih = 1.0\n");
    const auto out = scratch("bad_out");
    const auto err = scratch("bad.err");
    EXPECT_EQ(run_cli("solve --config " + cfg.string() + " --out " + out.string(), err), 1);
    EXPECT_FALSE(fs::exists(out));
    const auto msg = slurp(err);
    EXPECT_EQ(msg.rfind("error: code=1 kind=config", 0), 0u) << msg;
    EXPECT_NE(msg.find("band.sigma_hgih"), std::string::npos);
}

TEST(Process, NumericalFailureExitsTwo) {
    const auto cfg = write_config("overflow", "[terminal]\nkind = exp\nscale = 400\n[obstacle]\nkind = none\n");
    const auto out = scratch("overflow_out");
    const auto err = scratch("overflow.err");
    EXPECT_EQ(run_cli("solve --config " + cfg.string() + " --out " + out.string(), err), 2);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_EQ(slurp(err).rfind("error: code=2 kind=numerical", 0), 0u);
}

TEST(Process, ConvergenceFailureExitsThree) {
    const auto cfg = write_config("noconv",
                                  "[generator]\nkind = hlog_abs\n[terminal]\nkind = square\n[obstacle]\nkind = square\n"
                                  "shift = -1\n[solve]\nmethod = picard\nmax_iter = 2\n");
    const auto out = scratch("noconv_out");
    const auto err = scratch("noconv.err");
    EXPECT_EQ(run_cli("solve --config " + cfg.string() + " --out " + out.string(), err), 3);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_EQ(slurp(err).rfind("error: code=3 kind=convergence", 0), 0u);
}

TEST(Process, EmptySuiteExitsOne) {
    const auto cfg = write_config("empty_suite", "[check]\nsuite =\n");
    const auto out = scratch("empty_suite_out");
    EXPECT_EQ(run_cli("check --config " + cfg.string() + " --out " + out.string(), scratch("empty.err")), 1);
    EXPECT_FALSE(fs::exists(out));
}

TEST(Process, NegativeControlExitsNonzeroWithTable) {
    const auto out = scratch("neg_out");
    const auto err = scratch("neg.err");
    EXPECT_EQ(run_cli("check --config " + example("negative_control.ini") + " --out " + out.string(), err), 2);
    EXPECT_NE(slurp(out / "checks.csv").find(",false,"), std::string::npos);
    EXPECT_EQ(slurp(err).rfind("error: code=2 kind=check", 0), 0u);
}

TEST(Process, UsageErrorsExitOne) {
    EXPECT_EQ(run_cli("solve --out /tmp", scratch("usage.err")), 1);
    EXPECT_EQ(run_cli("frobnicate", scratch("usage2.err")), 1);
    EXPECT_EQ(run_cli("study --config x --kind sideways", scratch("usage3.err")), 1);
    EXPECT_EQ(run_cli("solve --config /nonexistent/cfg.ini --out /tmp/x", scratch("usage4.err")), 1);
}

TEST(Process, ByteIdenticalAcrossThreadCounts) {
    const auto cfg = write_config("threads",
                                  "[band]\nsigma_low = 0.1\nsigma_high = 0.3\n[lattice]\nn_steps = 60\n"
                                  "[generator]\nkind = discount\n[terminal]\nkind = put\n[obstacle]\nkind = put\n"
                                  "[solve]\nmethod = penalized\n");
    const auto wide = write_config("threads_wide",
                                   "[lattice]\nn_steps = 8\ncoverage = 1200\n[generator]\nkind = constant\nvalue = -1\n"
                                   "[terminal]\nkind = tent\n[obstacle]\nkind = tent\n[solve]\nmethod = lipschitz\n");
    for (const auto& c : {cfg, wide}) {
        const auto a = scratch("t1"), b = scratch("t4");
        ASSERT_EQ(run_cli("solve --threads 1 --config " + c.string() + " --out " + a.string(), scratch("t1.err")), 0);
        ASSERT_EQ(run_cli("solve --threads 4 --config " + c.string() + " --out " + b.string(), scratch("t4.err")), 0);
        EXPECT_EQ(slurp(a / "surface.csv"), slurp(b / "surface.csv"));
        EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
    }
}
