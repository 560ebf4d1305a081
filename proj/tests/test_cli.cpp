#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string output; // stdout and stderr interleaved
};

std::string cli_binary() {
    const char* env = std::getenv("WITNESS_CLI_BIN");
    REQUIRE_MESSAGE(env != nullptr, "WITNESS_CLI_BIN must point at the witness binary");
    return env;
}

RunResult run(const std::string& args) {
    std::string command = cli_binary() + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string output;
    char buffer[512];
    while (std::size_t n = std::fread(buffer, 1, sizeof(buffer), pipe)) output.append(buffer, n);
    int status = pclose(pipe);
    return RunResult{WEXITSTATUS(status), std::move(output)};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("witness_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) const {
        fs::path p = path / name;
        std::ofstream out(p);
        out << content;
        return p.string();
    }
    std::string at(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string model_flags(const TempDir& dir, const char* tra, const char* lab) {
    return "--tra " + dir.file("m.tra", tra) + " --lab " + dir.file("m.lab", lab) +
           " --init init --goal goal";
}

} // namespace

using witness::tests::kD1Lab;
using witness::tests::kD1Tra;
using witness::tests::kM1Lab;
using witness::tests::kM1Tra;

TEST_CASE("minimize milp finds the two-state witness of M1") {
    TempDir dir;
    auto result = run("minimize " + model_flags(dir, kM1Tra, kM1Lab) +
                      " --mode max --threshold 0.55 --method milp --out " + dir.at("out"));
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("subsys states:2, value: 2") != std::string::npos);
    CHECK(fs::exists(dir.path / "out" / "subsys.tra"));
    CHECK(fs::exists(dir.path / "out" / "subsys.cert"));
    std::string csv = slurp(dir.at("out/runs.csv"));
    CHECK(csv.rfind("command,digest,mode,sense,threshold,method,iteration,states,value,seconds,"
                    "status\n",
                    0) == 0);
    CHECK(csv.find(",milp,0,2,2,") != std::string::npos);
}

TEST_CASE("minimize reports unsatisfied properties") {
    TempDir dir;
    auto result = run("minimize " + model_flags(dir, kM1Tra, kM1Lab) +
                      " --mode min --threshold 0.55 --method qs --out " + dir.at("out"));
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("Property is not satisfied!") != std::string::npos);
}

TEST_CASE("missing required flags are usage errors") {
    TempDir dir;
    auto result = run("minimize --tra " + dir.file("m.tra", kM1Tra) + " --lab " +
                      dir.file("m.lab", kM1Lab) +
                      " --init init --mode max --threshold 0.5 --method milp");
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("--goal") != std::string::npos);
}

TEST_CASE("certify then check round-trips") {
    TempDir dir;
    std::string flags = model_flags(dir, kM1Tra, kM1Lab);
    auto certify = run("certify " + flags + " --mode max --sense ge --threshold 0.55 --out " +
                       dir.at("cert.cert"));
    REQUIRE(certify.exit_code == 0);
    auto check = run("check " + flags + " --mode max --sense ge --threshold 0.55 --cert " +
                     dir.at("cert.cert"));
    CHECK(check.exit_code == 0);
    CHECK(check.output.find("True") != std::string::npos);

    // Zero out the certificate body; only the header line stays.
    std::string text = slurp(dir.at("cert.cert"));
    dir.file("zero.cert", text.substr(0, text.find('\n') + 1));
    auto zero = run("check " + flags + " --mode max --sense ge --threshold 0.55 --cert " +
                    dir.at("zero.cert"));
    CHECK(zero.exit_code == 2);
    CHECK(zero.output.find("False") != std::string::npos);
    CHECK(zero.output.find("threshold") != std::string::npos);
}

TEST_CASE("certify refuses unsatisfied thresholds") {
    TempDir dir;
    auto result = run("certify " + model_flags(dir, kM1Tra, kM1Lab) +
                      " --mode min --sense ge --threshold 0.55 --out " + dir.at("cert.cert"));
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("Property is not satisfied!") != std::string::npos);
}

TEST_CASE("check rejects certificates for a different model") {
    TempDir dir;
    auto certify = run("certify " + model_flags(dir, kM1Tra, kM1Lab) +
                       " --mode max --sense ge --threshold 0.55 --out " + dir.at("cert.cert"));
    REQUIRE(certify.exit_code == 0);
    TempDir other;
    auto check = run("check " + model_flags(other, kD1Tra, kD1Lab) +
                     " --mode max --sense ge --threshold 0.55 --cert " + dir.at("cert.cert"));
    CHECK(check.exit_code == 1);
    CHECK(check.output.find("digest") != std::string::npos);
}

TEST_CASE("render emits a digraph and validates the mask") {
    TempDir dir;
    std::string tra = dir.file("m.tra", kD1Tra);
    std::string lab = dir.file("m.lab", kD1Lab);
    auto render = run("render --tra " + tra + " --lab " + lab + " --out " + dir.at("model.dot"));
    CHECK(render.exit_code == 0);
    std::string dot = slurp(dir.at("model.dot"));
    CHECK(dot.find("digraph") != std::string::npos);
    for (int s = 0; s < 4; ++s)
        CHECK(dot.find("s" + std::to_string(s) + " [") != std::string::npos);

    dir.file("bad.mask", "99\n");
    auto bad = run("render --tra " + tra + " --lab " + lab + " --mask " + dir.at("bad.mask") +
                   " --out " + dir.at("bad.dot"));
    CHECK(bad.exit_code == 1);
}

TEST_CASE("minimize output files are re-readable by render") {
    TempDir dir;
    auto minimize = run("minimize " + model_flags(dir, kM1Tra, kM1Lab) +
                        " --mode max --threshold 0.55 --method qs --iterations 2 --out " +
                        dir.at("out"));
    REQUIRE(minimize.exit_code == 0);
    auto render = run("render --tra " + dir.at("out/subsys_1.tra") + " --lab " +
                      dir.at("out/subsys_1.lab") + " --mask " + dir.at("out/subsys_1.mask") +
                      " --cert " + dir.at("out/subsys_1.cert") + " --out " + dir.at("sub.dot"));
    CHECK(render.exit_code == 0);
    CHECK(slurp(dir.at("sub.dot")).find("digraph") != std::string::npos);
}

TEST_CASE("bench sweeps thresholds and appends a max-time row") {
    TempDir dir;
    auto bench = run("bench " + model_flags(dir, kM1Tra, kM1Lab) +
                     " --mode max --thresholds 0.1:0.6:0.1 --methods qs-ao,milp --iterations 2"
                     " --out " +
                     dir.at("bench"));
    CHECK(bench.exit_code == 0);
    std::string csv = slurp(dir.at("bench/runs.csv"));
    std::size_t qs_rows = 0, milp_rows = 0, unsat_rows = 0;
    std::istringstream lines(csv);
    std::string line;
    double previous_milp = -1.0;
    bool milp_monotone = true;
    while (std::getline(lines, line)) {
        if (line.find(",qs-ao,") != std::string::npos) ++qs_rows;
        if (line.find(",milp,") != std::string::npos) {
            ++milp_rows;
            auto status_at = line.rfind(',');
            if (line.substr(status_at + 1) == "ok") {
                // column 8 is the objective value
                std::istringstream cells(line);
                std::string cell;
                for (int i = 0; i < 9 && std::getline(cells, cell, ','); ++i) {
                }
                double value = std::stod(cell);
                milp_monotone &= value >= previous_milp - 1e-9;
                previous_milp = value;
            }
        }
        if (line.find("unsatisfied") != std::string::npos) ++unsat_rows;
    }
    CHECK(qs_rows == 6 * 2);  // six thresholds, two iterations each
    CHECK(milp_rows == 6);
    CHECK(unsat_rows == 0);   // Pr^max = 0.6 covers the whole sweep
    CHECK(milp_monotone);
    CHECK(csv.find("max-time") != std::string::npos);

    auto empty = run("bench " + model_flags(dir, kM1Tra, kM1Lab) +
                     " --mode max --thresholds 0.6:0.1:0.1 --methods milp --out " +
                     dir.at("bench2"));
    CHECK(empty.exit_code == 1);
}

TEST_CASE("bench records unsatisfied cells") {
    TempDir dir;
    auto bench = run("bench " + model_flags(dir, kM1Tra, kM1Lab) +
                     " --mode max --thresholds 0.5:0.7:0.1 --methods milp --out " +
                     dir.at("bench"));
    CHECK(bench.exit_code == 0);
    std::string csv = slurp(dir.at("bench/runs.csv"));
    CHECK(csv.find("0.7,milp") != std::string::npos);
    CHECK(csv.find("unsatisfied") != std::string::npos);
}

TEST_CASE("generated models feed straight back into the pipeline") {
    TempDir dir;
    auto gen = run("gen --kind layered --states 200 --width 10 --seed 7 --out-tra " +
                   dir.at("gen.tra") + " --out-lab " + dir.at("gen.lab"));
    REQUIRE(gen.exit_code == 0);
    auto minimize = run("minimize --tra " + dir.at("gen.tra") + " --lab " + dir.at("gen.lab") +
                        " --init init --goal goal --mode min --threshold 0.05 --method qs " +
                        "--iterations 2 --out " + dir.at("out"));
    CHECK(minimize.exit_code == 0);
    CHECK(minimize.output.find("subsys states:") != std::string::npos);
}

TEST_CASE("label-based minimization through the CLI") {
    TempDir dir;
    // D1 with red/blue labels on top of init/goal.
    const char* lab = "0=\"init\" 1=\"goal\" 2=\"red\" 3=\"blue\"\n0: 0 2\n1: 2\n2: 1 3\n";
    auto result = run("minimize --tra " + dir.file("m.tra", kD1Tra) + " --lab " +
                      dir.file("m.lab", lab) +
                      " --init init --goal goal --mode min --threshold 0.7 --method milp"
                      " --labels red,blue --out " +
                      dir.at("out"));
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("value: 2") != std::string::npos);
}
