#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "witness/errors.hpp"

namespace witness::lp {

enum class ObjectiveSense { Minimize, Maximize };
enum class Relation { LessEqual, GreaterEqual, Equal };
enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Constraint {
    std::vector<std::pair<int, double>> coefficients; // (variable, coefficient)
    Relation relation = Relation::LessEqual;
    double rhs = 0.0;
};

/// Sparse LP/MILP instance. All variables carry finite lower bounds (zero
/// unless stated otherwise); binary variables must have bounds within [0,1].
struct LinearProblem {
    ObjectiveSense objective_sense = ObjectiveSense::Minimize;
    int num_variables = 0;
    std::vector<std::pair<int, double>> objective;
    std::vector<Constraint> constraints;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<char> binary;

    int add_variable(double lo = 0.0, double hi = kInfinity, bool is_binary = false);
    void set_objective(int var, double coefficient);
    void add_constraint(std::vector<std::pair<int, double>> coefficients, Relation relation,
                        double rhs);
    bool has_binaries() const;
};

/// Throws ValidationError when the problem is malformed (references to
/// undeclared variables, infinite lower bounds, binary bounds outside [0,1]).
void validate(const LinearProblem& problem);

struct Solution {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> values;
    double objective_value = 0.0;
};

/// Revised simplex over the sparse standard form, deterministic pivoting
/// (Dantzig rule, Bland's rule after 10*(m+n) degenerate pivots), pivot and
/// feasibility tolerances 1e-9, at most 1e6 pivots. Requires a problem
/// without binary variables.
Solution solve_lp(const LinearProblem& problem);

/// Exact best-first branch-and-bound over LP relaxations; branches on the
/// most fractional binary (ties by lowest index), integrality tolerance 1e-6,
/// zero optimality gap, node limit 1e6 (the incumbent is returned with
/// IterationLimit status when the limit is hit). Defers to solve_lp when
/// there is no binary variable.
Solution solve_milp(const LinearProblem& problem);

/// Text in the de-facto LP file format (Minimize/Maximize, Subject To,
/// Bounds, Binary, End) with variables named x0..x(n-1).
std::string export_lp_format(const LinearProblem& problem);

} // namespace witness::lp
