#include "witness/lp.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <queue>
#include <sstream>

namespace witness::lp {

int LinearProblem::add_variable(double lo, double hi, bool is_binary) {
    lower.push_back(lo);
    upper.push_back(hi);
    binary.push_back(is_binary ? 1 : 0);
    return num_variables++;
}

void LinearProblem::set_objective(int var, double coefficient) {
    objective.emplace_back(var, coefficient);
}

void LinearProblem::add_constraint(std::vector<std::pair<int, double>> coefficients,
                                   Relation relation, double rhs) {
    constraints.push_back(Constraint{std::move(coefficients), relation, rhs});
}

bool LinearProblem::has_binaries() const {
    return std::any_of(binary.begin(), binary.end(), [](char b) { return b != 0; });
}

void validate(const LinearProblem& problem) {
    const int n = problem.num_variables;
    if (static_cast<int>(problem.lower.size()) != n ||
        static_cast<int>(problem.upper.size()) != n ||
        static_cast<int>(problem.binary.size()) != n)
        throw ValidationError("bound/integrality tables do not match the variable count");
    for (int j = 0; j < n; ++j) {
        if (!std::isfinite(problem.lower[j]))
            throw ValidationError("variable x" + std::to_string(j) + " has no finite lower bound");
        if (problem.upper[j] < problem.lower[j])
            throw ValidationError("variable x" + std::to_string(j) + " has crossing bounds");
        if (problem.binary[j] && (problem.lower[j] < 0.0 || problem.upper[j] > 1.0))
            throw ValidationError("binary variable x" + std::to_string(j) +
                                  " has bounds outside [0,1]");
    }
    auto check_refs = [&](const std::vector<std::pair<int, double>>& coeffs) {
        for (auto [j, c] : coeffs) {
            if (j < 0 || j >= n)
                throw ValidationError("reference to undeclared variable x" + std::to_string(j));
            if (!std::isfinite(c)) throw ValidationError("non-finite coefficient");
        }
    };
    check_refs(problem.objective);
    for (const auto& row : problem.constraints) {
        check_refs(row.coefficients);
        if (!std::isfinite(row.rhs)) throw ValidationError("non-finite right-hand side");
    }
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-9;
constexpr double kDegenerateStep = 1e-12;
constexpr double kIntegralityTol = 1e-6;
constexpr long kPivotLimit = 1000000;
constexpr long kNodeLimit = 1000000;
constexpr int kRefactorInterval = 64;

std::vector<std::pair<int, double>> merged(const std::vector<std::pair<int, double>>& coeffs) {
    std::map<int, double> sum;
    for (auto [j, c] : coeffs) sum[j] += c;
    std::vector<std::pair<int, double>> out;
    for (auto [j, c] : sum)
        if (c != 0.0) out.emplace_back(j, c);
    return out;
}

// min cost.x over { E x = rhs, x >= 0 } with structural variables first,
// then slacks/surpluses, then artificials; rhs is nonnegative.
struct StandardForm {
    int m = 0;
    int n_struct = 0;
    int total_cols = 0;
    int first_artificial = 0;
    Eigen::SparseMatrix<double> cols;
    Eigen::VectorXd rhs;
    Eigen::VectorXd cost;
    std::vector<int> initial_basis;
    bool trivially_infeasible = false;
};

StandardForm build_standard_form(const LinearProblem& problem, const std::vector<double>& lower,
                                 const std::vector<double>& upper) {
    struct Row {
        std::vector<std::pair<int, double>> coeffs;
        Relation rel;
        double rhs;
    };
    StandardForm sf;
    sf.n_struct = problem.num_variables;

    std::vector<Row> rows;
    for (const auto& c : problem.constraints) {
        Row row{merged(c.coefficients), c.relation, c.rhs};
        for (auto [j, v] : row.coeffs) row.rhs -= v * lower[j];
        if (row.coeffs.empty()) {
            // Presolve is limited to dropping empty rows.
            bool ok = (row.rel == Relation::LessEqual && row.rhs >= -kFeasTol) ||
                      (row.rel == Relation::GreaterEqual && row.rhs <= kFeasTol) ||
                      (row.rel == Relation::Equal && std::abs(row.rhs) <= kFeasTol);
            if (!ok) sf.trivially_infeasible = true;
            continue;
        }
        rows.push_back(std::move(row));
    }
    for (int j = 0; j < problem.num_variables; ++j) {
        if (upper[j] == kInfinity) continue;
        double width = upper[j] - lower[j];
        if (width < 0.0) {
            sf.trivially_infeasible = true;
            continue;
        }
        rows.push_back(Row{{{j, 1.0}}, Relation::LessEqual, width});
    }
    for (auto& row : rows) {
        if (row.rhs < 0.0) {
            row.rhs = -row.rhs;
            for (auto& [j, v] : row.coeffs) v = -v;
            if (row.rel == Relation::LessEqual)
                row.rel = Relation::GreaterEqual;
            else if (row.rel == Relation::GreaterEqual)
                row.rel = Relation::LessEqual;
        }
    }

    sf.m = static_cast<int>(rows.size());
    int slack_cols = 0;
    int artificial_cols = 0;
    for (const auto& row : rows) {
        if (row.rel != Relation::Equal) ++slack_cols;
        if (row.rel != Relation::LessEqual) ++artificial_cols;
    }
    sf.first_artificial = sf.n_struct + slack_cols;
    sf.total_cols = sf.first_artificial + artificial_cols;

    std::vector<Eigen::Triplet<double>> triplets;
    sf.rhs.resize(sf.m);
    sf.initial_basis.resize(sf.m);
    int next_slack = sf.n_struct;
    int next_artificial = sf.first_artificial;
    for (int i = 0; i < sf.m; ++i) {
        const Row& row = rows[i];
        for (auto [j, v] : row.coeffs) triplets.emplace_back(i, j, v);
        sf.rhs(i) = row.rhs;
        if (row.rel == Relation::LessEqual) {
            triplets.emplace_back(i, next_slack, 1.0);
            sf.initial_basis[i] = next_slack++;
        } else if (row.rel == Relation::GreaterEqual) {
            triplets.emplace_back(i, next_slack, -1.0);
            ++next_slack;
            triplets.emplace_back(i, next_artificial, 1.0);
            sf.initial_basis[i] = next_artificial++;
        } else {
            triplets.emplace_back(i, next_artificial, 1.0);
            sf.initial_basis[i] = next_artificial++;
        }
    }
    sf.cols.resize(sf.m, sf.total_cols);
    sf.cols.setFromTriplets(triplets.begin(), triplets.end());
    sf.cols.makeCompressed();

    sf.cost = Eigen::VectorXd::Zero(sf.total_cols);
    const double sense = problem.objective_sense == ObjectiveSense::Maximize ? -1.0 : 1.0;
    for (auto [j, c] : merged(problem.objective)) sf.cost(j) += sense * c;
    return sf;
}

class SimplexEngine {
public:
    SimplexEngine(const StandardForm& sf, long bland_threshold)
        : sf_(sf),
          bland_threshold_(bland_threshold),
          basis_(sf.initial_basis),
          is_basic_(sf.total_cols, 0),
          banned_(sf.total_cols, 0),
          xb_(sf.m),
          work_(sf.m),
          cb_(sf.m),
          pi_(sf.m),
          entering_(sf.m) {
        for (int j : basis_) is_basic_[j] = 1;
    }

    SolveStatus solve() {
        refactor();
        if (sf_.first_artificial < sf_.total_cols) {
            Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(sf_.total_cols);
            for (int j = sf_.first_artificial; j < sf_.total_cols; ++j) phase1_cost(j) = 1.0;
            SolveStatus st = run_phase(phase1_cost, false);
            if (st == SolveStatus::IterationLimit) return st;
            if (st == SolveStatus::Unbounded)
                throw SolverError("phase-1 subproblem reported unbounded");
            double infeasibility = 0.0;
            for (int i = 0; i < sf_.m; ++i)
                if (basis_[i] >= sf_.first_artificial) infeasibility += std::max(0.0, xb_(i));
            double scale = 1.0 + (sf_.m > 0 ? sf_.rhs.lpNorm<Eigen::Infinity>() : 0.0);
            if (infeasibility > kFeasTol * scale * 100.0) return SolveStatus::Infeasible;
            for (int j = sf_.first_artificial; j < sf_.total_cols; ++j) banned_[j] = 1;
        }
        return run_phase(sf_.cost, true);
    }

    // Structural part of the current basic solution.
    std::vector<double> structural_values() const {
        std::vector<double> values(sf_.n_struct, 0.0);
        for (int i = 0; i < sf_.m; ++i)
            if (basis_[i] < sf_.n_struct) values[basis_[i]] = std::max(0.0, xb_(i));
        return values;
    }

private:
    struct Eta {
        int row;
        double diag;
        std::vector<std::pair<int, double>> off; // nonzeros of the pivot column, row excluded
    };

    void refactor() {
        std::vector<Eigen::Triplet<double>> triplets;
        for (int i = 0; i < sf_.m; ++i)
            for (Eigen::SparseMatrix<double>::InnerIterator it(sf_.cols, basis_[i]); it; ++it)
                triplets.emplace_back(it.row(), i, it.value());
        Eigen::SparseMatrix<double> b(sf_.m, sf_.m);
        b.setFromTriplets(triplets.begin(), triplets.end());
        b.makeCompressed();
        lu_.compute(b);
        if (lu_.info() != Eigen::Success) throw SolverError("basis factorization failed");
        Eigen::SparseMatrix<double> bt = b.transpose();
        lut_.compute(bt);
        if (lut_.info() != Eigen::Success) throw SolverError("basis factorization failed");
        etas_.clear();
        xb_ = solve_basis(sf_.rhs);
    }

    Eigen::VectorXd solve_basis(const Eigen::VectorXd& v) const {
        Eigen::VectorXd x = lu_.solve(v);
        for (const Eta& e : etas_) {
            double pivot = x(e.row) / e.diag;
            for (auto [i, c] : e.off) x(i) -= c * pivot;
            x(e.row) = pivot;
        }
        return x;
    }

    // In-place variant reusing work_; result lands in entering_.
    void solve_basis_into_entering(int column) {
        work_.setZero();
        for (Eigen::SparseMatrix<double>::InnerIterator it(sf_.cols, column); it; ++it)
            work_(it.row()) = it.value();
        entering_ = lu_.solve(work_);
        for (const Eta& e : etas_) {
            double pivot = entering_(e.row) / e.diag;
            for (auto [i, c] : e.off) entering_(i) -= c * pivot;
            entering_(e.row) = pivot;
        }
    }

    void solve_basis_transposed_into_pi() {
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            double s = cb_(it->row);
            for (auto [i, c] : it->off) s -= c * cb_(i);
            cb_(it->row) = s / it->diag;
        }
        pi_ = lut_.solve(cb_);
    }

    double column_dot(int j, const Eigen::VectorXd& v) const {
        double sum = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(sf_.cols, j); it; ++it)
            sum += it.value() * v(it.row());
        return sum;
    }

    int price(const Eigen::VectorXd& costs) {
        for (int i = 0; i < sf_.m; ++i) cb_(i) = costs(basis_[i]);
        solve_basis_transposed_into_pi();
        const int total = sf_.total_cols;
        if (bland_) {
            for (int j = 0; j < total; ++j) {
                if (is_basic_[j] || banned_[j]) continue;
                if (costs(j) - column_dot(j, pi_) < -kPivotTol) return j;
            }
            return -1;
        }
        int entering = -1;
        double best = -kPivotTol;
        for (int j = 0; j < total; ++j) {
            if (is_basic_[j] || banned_[j]) continue;
            double dj = costs(j) - column_dot(j, pi_);
            if (dj < best) {
                best = dj;
                entering = j;
            }
        }
        return entering;
    }

    std::pair<int, double> ratio_test(const Eigen::VectorXd& w, bool phase2) const {
        double theta = kInfinity;
        for (int i = 0; i < sf_.m; ++i) {
            if (w(i) > kPivotTol) {
                theta = std::min(theta, std::max(0.0, xb_(i)) / w(i));
            } else if (phase2 && w(i) < -kPivotTol && basis_[i] >= sf_.first_artificial) {
                // A basic artificial would grow above zero; it must leave now.
                theta = 0.0;
            }
        }
        if (theta == kInfinity) return {-1, 0.0};
        int leaving = -1;
        for (int i = 0; i < sf_.m; ++i) {
            bool candidate = false;
            if (w(i) > kPivotTol)
                candidate = std::max(0.0, xb_(i)) / w(i) <= theta + 1e-12;
            else if (phase2 && w(i) < -kPivotTol && basis_[i] >= sf_.first_artificial)
                candidate = theta <= 1e-12;
            if (!candidate) continue;
            if (leaving == -1)
                leaving = i;
            else if (bland_ ? basis_[i] < basis_[leaving] : false)
                leaving = i;
        }
        return {leaving, theta};
    }

    SolveStatus run_phase(const Eigen::VectorXd& costs, bool phase2) {
        while (true) {
            if (pivots_ >= kPivotLimit) return SolveStatus::IterationLimit;
            if (!bland_ && degenerate_pivots_ > bland_threshold_) bland_ = true;
            int q = price(costs);
            if (q < 0) return SolveStatus::Optimal;
            solve_basis_into_entering(q);
            const Eigen::VectorXd& w = entering_;
            auto [r, theta] = ratio_test(w, phase2);
            if (r < 0) return SolveStatus::Unbounded;
            if (theta < kDegenerateStep) ++degenerate_pivots_;
            ++pivots_;
            xb_ -= theta * w;
            xb_(r) = theta;
            for (int i = 0; i < sf_.m; ++i)
                if (xb_(i) < 0.0 && xb_(i) > -kFeasTol) xb_(i) = 0.0;
            Eta eta;
            eta.row = r;
            eta.diag = w(r);
            for (int i = 0; i < sf_.m; ++i)
                if (i != r && w(i) != 0.0) eta.off.emplace_back(i, w(i));
            etas_.push_back(std::move(eta));
            is_basic_[basis_[r]] = 0;
            is_basic_[q] = 1;
            basis_[r] = q;
            if (static_cast<int>(etas_.size()) >= kRefactorInterval) refactor();
        }
    }

    const StandardForm& sf_;
    long bland_threshold_;
    std::vector<int> basis_;
    std::vector<char> is_basic_;
    std::vector<char> banned_;
    Eigen::VectorXd xb_;
    Eigen::VectorXd work_, cb_, pi_, entering_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lut_;
    std::vector<Eta> etas_;
    long pivots_ = 0;
    long degenerate_pivots_ = 0;
    bool bland_ = false;
};

double objective_of(const LinearProblem& problem, const std::vector<double>& values) {
    double sum = 0.0;
    for (auto [j, c] : problem.objective) sum += c * values[j];
    return sum;
}

Solution solve_lp_bounds(const LinearProblem& problem, const std::vector<double>& lower,
                         const std::vector<double>& upper) {
    StandardForm sf = build_standard_form(problem, lower, upper);
    Solution sol;
    sol.values.assign(problem.num_variables, 0.0);
    if (sf.trivially_infeasible) {
        sol.status = SolveStatus::Infeasible;
        return sol;
    }
    if (sf.m == 0) {
        // Only bounds; optimize each variable independently.
        const double sense = problem.objective_sense == ObjectiveSense::Maximize ? -1.0 : 1.0;
        std::vector<double> cost(problem.num_variables, 0.0);
        for (auto [j, c] : merged(problem.objective)) cost[j] = sense * c;
        for (int j = 0; j < problem.num_variables; ++j) {
            if (cost[j] < 0.0) {
                if (upper[j] == kInfinity) {
                    sol.status = SolveStatus::Unbounded;
                    return sol;
                }
                sol.values[j] = upper[j];
            } else {
                sol.values[j] = lower[j];
            }
        }
        sol.status = SolveStatus::Optimal;
        sol.objective_value = objective_of(problem, sol.values);
        return sol;
    }

    SimplexEngine engine(sf, 10L * (sf.m + sf.n_struct));
    SolveStatus status = engine.solve();
    sol.status = status;
    if (status == SolveStatus::Optimal || status == SolveStatus::IterationLimit) {
        auto shifted = engine.structural_values();
        for (int j = 0; j < problem.num_variables; ++j) sol.values[j] = lower[j] + shifted[j];
        sol.objective_value = objective_of(problem, sol.values);
    }
    return sol;
}

} // namespace

Solution solve_lp(const LinearProblem& problem) {
    validate(problem);
    if (problem.has_binaries())
        throw ValidationError("solve_lp requires a problem without binary variables");
    return solve_lp_bounds(problem, problem.lower, problem.upper);
}

Solution solve_milp(const LinearProblem& problem) {
    validate(problem);
    if (!problem.has_binaries()) return solve_lp(problem);

    const bool maximize = problem.objective_sense == ObjectiveSense::Maximize;
    auto better = [&](double a, double b) { return maximize ? a > b + 1e-9 : a < b - 1e-9; };
    auto prunable = [&](double bound, double best) {
        return maximize ? bound <= best + 1e-9 : bound >= best - 1e-9;
    };

    struct Node {
        double bound;
        long id;
        std::vector<double> lower, upper;
        std::vector<double> relax_values;
    };
    auto node_after = [&](const Node& a, const Node& b) {
        double ka = maximize ? -a.bound : a.bound;
        double kb = maximize ? -b.bound : b.bound;
        return ka != kb ? ka > kb : a.id > b.id;
    };
    std::priority_queue<Node, std::vector<Node>, decltype(node_after)> open(node_after);

    bool have_incumbent = false;
    Solution incumbent;
    long nodes_created = 0;
    bool hit_node_limit = false;

    std::vector<int> binaries;
    for (int j = 0; j < problem.num_variables; ++j)
        if (problem.binary[j]) binaries.push_back(j);

    auto relax = [&](const std::vector<double>& lo, const std::vector<double>& hi) {
        return solve_lp_bounds(problem, lo, hi);
    };

    // Accept an integral relaxation: re-solve with the binaries pinned so the
    // reported solution carries exact {0,1} values.
    auto try_incumbent = [&](const Node& node) {
        std::vector<double> lo = node.lower, hi = node.upper;
        for (int j : binaries) {
            double bit = node.relax_values[j] > 0.5 ? 1.0 : 0.0;
            lo[j] = hi[j] = bit;
        }
        Solution pinned = relax(lo, hi);
        if (pinned.status != SolveStatus::Optimal) return false;
        if (!have_incumbent || better(pinned.objective_value, incumbent.objective_value)) {
            incumbent = pinned;
            have_incumbent = true;
        }
        return true;
    };

    std::optional<SolveStatus> failure;
    auto expand = [&](std::vector<double> lo, std::vector<double> hi) {
        if (hit_node_limit || failure) return;
        if (++nodes_created > kNodeLimit) {
            hit_node_limit = true;
            return;
        }
        Solution rel = relax(lo, hi);
        if (rel.status == SolveStatus::Infeasible) return;
        if (rel.status == SolveStatus::Unbounded || rel.status == SolveStatus::IterationLimit) {
            failure = rel.status;
            return;
        }
        if (have_incumbent && prunable(rel.objective_value, incumbent.objective_value)) return;
        Node node{rel.objective_value, nodes_created, std::move(lo), std::move(hi),
                  std::move(rel.values)};
        bool integral = true;
        for (int j : binaries)
            if (std::abs(node.relax_values[j] - std::round(node.relax_values[j])) >
                kIntegralityTol) {
                integral = false;
                break;
            }
        if (integral) {
            if (try_incumbent(node)) return;
        }
        open.push(std::move(node));
    };

    expand(problem.lower, problem.upper);
    while (!open.empty() && !hit_node_limit && !failure) {
        Node node = open.top();
        open.pop();
        if (have_incumbent && prunable(node.bound, incumbent.objective_value)) continue;
        int branch = -1;
        double most = -1.0;
        for (int j : binaries) {
            double frac = std::abs(node.relax_values[j] - std::round(node.relax_values[j]));
            if (frac > kIntegralityTol && frac > most) {
                most = frac;
                branch = j;
            }
        }
        if (branch < 0) {
            if (try_incumbent(node)) continue;
            // The relaxation is integral within tolerance but its rounding is
            // infeasible (the noise was load-bearing). Branch on the noisiest
            // binary instead of dropping the subtree.
            for (int j : binaries) {
                double frac = std::abs(node.relax_values[j] - std::round(node.relax_values[j]));
                if (frac > 0.0 && frac > most) {
                    most = frac;
                    branch = j;
                }
            }
            if (branch < 0) continue; // exactly integral; nothing to explore
        }
        auto lo0 = node.lower;
        auto hi0 = node.upper;
        hi0[branch] = 0.0;
        expand(std::move(lo0), std::move(hi0));
        auto lo1 = node.lower;
        auto hi1 = node.upper;
        lo1[branch] = 1.0;
        expand(std::move(lo1), std::move(hi1));
    }

    if (failure && *failure == SolveStatus::Unbounded && !have_incumbent) {
        Solution sol;
        sol.status = SolveStatus::Unbounded;
        sol.values.assign(problem.num_variables, 0.0);
        return sol;
    }
    if (hit_node_limit || failure) {
        Solution sol = have_incumbent ? incumbent : Solution{};
        sol.status = SolveStatus::IterationLimit;
        if (sol.values.empty()) sol.values.assign(problem.num_variables, 0.0);
        return sol;
    }
    if (!have_incumbent) {
        Solution sol;
        sol.status = SolveStatus::Infeasible;
        sol.values.assign(problem.num_variables, 0.0);
        return sol;
    }
    incumbent.status = SolveStatus::Optimal;
    return incumbent;
}

namespace {

std::string format_coefficient(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

void append_terms(std::ostringstream& out, const std::vector<std::pair<int, double>>& coeffs) {
    bool first = true;
    for (auto [j, c] : coeffs) {
        if (first) {
            out << format_coefficient(c) << " x" << j;
            first = false;
        } else if (c < 0.0) {
            out << " - " << format_coefficient(-c) << " x" << j;
        } else {
            out << " + " << format_coefficient(c) << " x" << j;
        }
    }
    if (first) out << "0 x0";
}

} // namespace

std::string export_lp_format(const LinearProblem& problem) {
    validate(problem);
    std::ostringstream out;
    out << (problem.objective_sense == ObjectiveSense::Maximize ? "Maximize" : "Minimize") << '\n';
    out << " obj: ";
    append_terms(out, merged(problem.objective));
    out << '\n';
    out << "Subject To\n";
    int row_id = 0;
    for (const auto& row : problem.constraints) {
        out << " c" << row_id++ << ": ";
        append_terms(out, merged(row.coefficients));
        out << (row.relation == Relation::LessEqual      ? " <= "
                : row.relation == Relation::GreaterEqual ? " >= "
                                                         : " = ")
            << format_coefficient(row.rhs) << '\n';
    }
    std::ostringstream bounds;
    for (int j = 0; j < problem.num_variables; ++j) {
        const double lo = problem.lower[j];
        const double hi = problem.upper[j];
        if (lo == 0.0 && hi == kInfinity) continue;
        bounds << ' ';
        if (hi == kInfinity)
            bounds << 'x' << j << " >= " << format_coefficient(lo);
        else if (lo == 0.0)
            bounds << 'x' << j << " <= " << format_coefficient(hi);
        else
            bounds << format_coefficient(lo) << " <= x" << j << " <= " << format_coefficient(hi);
        bounds << '\n';
    }
    if (!bounds.str().empty()) out << "Bounds\n" << bounds.str();
    if (problem.has_binaries()) {
        out << "Binary\n";
        for (int j = 0; j < problem.num_variables; ++j)
            if (problem.binary[j]) out << " x" << j << '\n';
    }
    out << "End\n";
    return out.str();
}

} // namespace witness::lp
