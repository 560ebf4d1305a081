#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "generators.hpp"
#include "witness/lp.hpp"
#include "witness/reachform.hpp"

using namespace witness;
using namespace witness::tests;
using lp::LinearProblem;
using lp::ObjectiveSense;
using lp::Relation;
using lp::Solution;
using lp::SolveStatus;

TEST_CASE("one-variable maximization") {
    LinearProblem p;
    p.objective_sense = ObjectiveSense::Maximize;
    p.add_variable(0.0);
    p.set_objective(0, 1.0);
    p.add_constraint({{0, 1.0}}, Relation::LessEqual, 0.6);
    auto sol = lp::solve_lp(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.values[0] == doctest::Approx(0.6));
    CHECK(sol.objective_value == doctest::Approx(0.6));
}

TEST_CASE("contradictory constraints are infeasible") {
    LinearProblem p;
    p.add_variable(0.0);
    p.add_constraint({{0, 1.0}}, Relation::GreaterEqual, 1.0);
    p.add_constraint({{0, 1.0}}, Relation::LessEqual, 0.0);
    CHECK(lp::solve_lp(p).status == SolveStatus::Infeasible);
}

TEST_CASE("unbounded direction is detected") {
    LinearProblem p;
    p.objective_sense = ObjectiveSense::Maximize;
    p.add_variable(0.0);
    p.set_objective(0, 1.0);
    CHECK(lp::solve_lp(p).status == SolveStatus::Unbounded);
    p.add_constraint({{0, 1.0}}, Relation::GreaterEqual, 1.0);
    CHECK(lp::solve_lp(p).status == SolveStatus::Unbounded);
}

TEST_CASE("minimization over the D1 certificate polytope") {
    auto rf = d1_rf();
    LinearProblem p;
    for (int i = 0; i < 3; ++i) p.add_variable(0.0);
    auto rows = reachform::matrix_rows(rf);
    for (int r = 0; r < 3; ++r) p.add_constraint(rows[r], Relation::LessEqual, rf.to_goal(r));
    p.add_constraint({{0, 1.0}}, Relation::GreaterEqual, 0.7);
    p.set_objective(0, 1.0);
    p.set_objective(1, 1.0);
    auto sol = lp::solve_lp(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(1.4).epsilon(1e-9));
    CHECK(sol.values[0] == doctest::Approx(0.7));
    CHECK(sol.values[1] == doctest::Approx(0.7));
    CHECK(sol.values[2] == doctest::Approx(1.0));
}

TEST_CASE("set cover of one") {
    LinearProblem p;
    p.add_variable(0.0, 1.0, true);
    p.add_variable(0.0, 1.0, true);
    p.set_objective(0, 1.0);
    p.set_objective(1, 1.0);
    p.add_constraint({{0, 1.0}, {1, 1.0}}, Relation::GreaterEqual, 1.0);
    auto sol = lp::solve_milp(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(1.0));
    CHECK(std::abs(sol.values[0] + sol.values[1] - 1.0) < 1e-9);
}

TEST_CASE("state-minimization MILP over a two-state chain") {
    // z0 <= z1, z1 <= 0.7, z0 >= 0.7, z <= sigma coupling, sigma binary.
    LinearProblem p;
    int z0 = p.add_variable(0.0), z1 = p.add_variable(0.0);
    int s0 = p.add_variable(0.0, 1.0, true), s1 = p.add_variable(0.0, 1.0, true);
    p.add_constraint({{z0, 1.0}, {z1, -1.0}}, Relation::LessEqual, 0.0);
    p.add_constraint({{z1, 1.0}}, Relation::LessEqual, 0.7);
    p.add_constraint({{z0, 1.0}}, Relation::GreaterEqual, 0.7);
    p.add_constraint({{z0, 1.0}, {s0, -1.0}}, Relation::LessEqual, 0.0);
    p.add_constraint({{z1, 1.0}, {s1, -1.0}}, Relation::LessEqual, 0.0);
    p.set_objective(s0, 1.0);
    p.set_objective(s1, 1.0);
    auto sol = lp::solve_milp(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(2.0));
    auto reference = brute_force_milp(p);
    CHECK(reference.objective_value == doctest::Approx(sol.objective_value));
}

TEST_CASE("root relaxation infeasibility propagates") {
    LinearProblem p;
    p.add_variable(0.0, 1.0, true);
    p.add_constraint({{0, 1.0}}, Relation::GreaterEqual, 2.0);
    CHECK(lp::solve_milp(p).status == SolveStatus::Infeasible);
}

TEST_CASE("binary variables come back exactly integral") {
    LinearProblem p;
    int x = p.add_variable(0.0);
    int b0 = p.add_variable(0.0, 1.0, true);
    int b1 = p.add_variable(0.0, 1.0, true);
    p.objective_sense = ObjectiveSense::Maximize;
    p.set_objective(x, 1.0);
    p.add_constraint({{x, 1.0}, {b0, -0.25}, {b1, -0.5}}, Relation::LessEqual, 0.0);
    p.add_constraint({{b0, 1.0}, {b1, 1.0}}, Relation::LessEqual, 1.0);
    auto sol = lp::solve_milp(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(0.5));
    for (int j : {b0, b1}) CHECK(std::abs(sol.values[j] - std::round(sol.values[j])) <= 1e-9);
}

TEST_CASE("primal optimum equals the explicit dual optimum") {
    std::mt19937_64 rng(test_seed(43));
    std::uniform_real_distribution<double> coeff(-1.0, 2.0);
    std::uniform_real_distribution<double> positive(0.1, 2.0);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 4);
        const int m = 2 + static_cast<int>(rng() % 4);
        // min c x  s.t.  A x >= b, x >= 0 with c >= 0 and b = A x_hat - slack,
        // so the problem is feasible and bounded.
        std::vector<std::vector<double>> a(m, std::vector<double>(n));
        std::vector<double> c(n), b(m), x_hat(n);
        for (int j = 0; j < n; ++j) {
            c[j] = positive(rng);
            x_hat[j] = positive(rng);
        }
        for (int i = 0; i < m; ++i) {
            double lhs = 0.0;
            for (int j = 0; j < n; ++j) {
                a[i][j] = coeff(rng);
                lhs += a[i][j] * x_hat[j];
            }
            b[i] = lhs - positive(rng);
        }
        LinearProblem primal;
        for (int j = 0; j < n; ++j) {
            primal.add_variable(0.0);
            primal.set_objective(j, c[j]);
        }
        for (int i = 0; i < m; ++i) {
            std::vector<std::pair<int, double>> row;
            for (int j = 0; j < n; ++j) row.emplace_back(j, a[i][j]);
            primal.add_constraint(row, Relation::GreaterEqual, b[i]);
        }
        LinearProblem dual;
        dual.objective_sense = ObjectiveSense::Maximize;
        for (int i = 0; i < m; ++i) {
            dual.add_variable(0.0);
            dual.set_objective(i, b[i]);
        }
        for (int j = 0; j < n; ++j) {
            std::vector<std::pair<int, double>> row;
            for (int i = 0; i < m; ++i) row.emplace_back(i, a[i][j]);
            dual.add_constraint(row, Relation::LessEqual, c[j]);
        }
        auto ps = lp::solve_lp(primal);
        auto ds = lp::solve_lp(dual);
        REQUIRE(ps.status == SolveStatus::Optimal);
        REQUIRE(ds.status == SolveStatus::Optimal);
        REQUIRE(std::abs(ps.objective_value - ds.objective_value) <= 1e-7);
    }
}

TEST_CASE("branch and bound matches binary enumeration") {
    std::mt19937_64 rng(test_seed(47));
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::uniform_int_distribution<int> rhs_pick(0, 3);
    int solved = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const int nb = 3 + static_cast<int>(rng() % 7); // binaries
        const int nc = 1 + static_cast<int>(rng() % 2); // continuous
        LinearProblem p;
        for (int j = 0; j < nb; ++j) {
            p.add_variable(0.0, 1.0, true);
            p.set_objective(j, coeff(rng));
        }
        for (int j = 0; j < nc; ++j) {
            p.add_variable(0.0, 2.0);
            p.set_objective(nb + j, coeff(rng));
        }
        const int rows = 2 + static_cast<int>(rng() % 3);
        for (int i = 0; i < rows; ++i) {
            std::vector<std::pair<int, double>> row;
            for (int j = 0; j < nb + nc; ++j) row.emplace_back(j, coeff(rng));
            p.add_constraint(row, rng() % 2 ? Relation::LessEqual : Relation::GreaterEqual,
                             0.5 * rhs_pick(rng));
        }
        auto fast = lp::solve_milp(p);
        auto slow = brute_force_milp(p);
        REQUIRE(fast.status == slow.status);
        if (fast.status == SolveStatus::Optimal) {
            ++solved;
            REQUIRE(std::abs(fast.objective_value - slow.objective_value) <= 1e-6);
        }
    }
    CHECK(solved > 5);
}

TEST_CASE("equal inputs give bit-identical solutions") {
    auto rf = m1_rf();
    LinearProblem p;
    for (int i = 0; i < 3; ++i) p.add_variable(0.0);
    auto cols = reachform::matrix_columns(rf);
    for (int t = 0; t < 2; ++t)
        p.add_constraint(cols[t], Relation::LessEqual, t == rf.initial ? 1.0 : 0.0);
    p.add_constraint({{2, 1.0}}, Relation::GreaterEqual, 0.55);
    p.set_objective(0, 1.0);
    p.set_objective(1, 1.0);
    p.set_objective(2, 1.0);
    auto a = lp::solve_lp(p);
    auto b = lp::solve_lp(p);
    REQUIRE(a.status == b.status);
    REQUIRE(a.values.size() == b.values.size());
    CHECK(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(&a.objective_value, &b.objective_value, sizeof(double)) == 0);
}

TEST_CASE("lp format export") {
    LinearProblem p;
    p.objective_sense = ObjectiveSense::Maximize;
    p.add_variable(0.0);
    p.set_objective(0, 1.0);
    p.add_constraint({{0, 1.0}}, Relation::LessEqual, 0.6);
    std::string text = lp::export_lp_format(p);
    CHECK(text.find("Maximize") != std::string::npos);
    CHECK(text.find("x0 <= 0.6") != std::string::npos);
    CHECK(text.find("End") != std::string::npos);

    LinearProblem q;
    q.add_variable(0.0, 1.0, true);
    q.add_variable(0.0);
    q.set_objective(0, 1.0);
    std::string binary_text = lp::export_lp_format(q);
    auto section = binary_text.find("Binary");
    REQUIRE(section != std::string::npos);
    CHECK(binary_text.find("x0", section) != std::string::npos);

    LinearProblem empty;
    empty.add_variable(0.0);
    std::string empty_text = lp::export_lp_format(empty);
    CHECK(empty_text.find("Subject To") != std::string::npos);
    CHECK(empty_text.find("End") != std::string::npos);
}
