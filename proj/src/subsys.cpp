#include "witness/subsys.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace witness::subsys {

using certify::Certificate;
using certify::CertificateKind;
using certify::PropertyQuery;
using certify::Sense;
using lp::LinearProblem;
using lp::ObjectiveSense;
using lp::Relation;
using lp::SolveStatus;
using model::ActionRow;
using model::Mdp;
using reachform::ReachabilityForm;

LabelMap LabelMap::unit(int num_states) {
    LabelMap map;
    map.labels.reserve(num_states);
    map.assignment.resize(num_states);
    for (int s = 0; s < num_states; ++s) {
        map.labels.push_back("s" + std::to_string(s));
        map.assignment[s] = {s};
    }
    return map;
}

void validate(const LabelMap& labels, int num_states) {
    if (static_cast<int>(labels.assignment.size()) != num_states)
        throw DimensionError("label assignment covers " +
                             std::to_string(labels.assignment.size()) + " states, expected " +
                             std::to_string(num_states));
    for (const auto& of_state : labels.assignment)
        for (int l : of_state)
            if (l < 0 || l >= static_cast<int>(labels.labels.size()))
                throw ValidationError("label id " + std::to_string(l) + " is not declared");
}

int SubsystemResult::states() const {
    return static_cast<int>(std::count(state_mask.begin(), state_mask.end(), true));
}

std::string summary_line(const SubsystemResult& result) {
    char value[32];
    std::snprintf(value, sizeof(value), "%.6g", result.objective_value);
    return "states=" + std::to_string(result.states()) + " value=" + value +
           " iteration=" + std::to_string(result.iteration);
}

namespace {

int polytope_dimension(const ReachabilityForm& rf, Mode mode) {
    return mode == Mode::Min ? rf.num_interior() : rf.index.rows();
}

// Constraints of the lower-bound certificate polytope P^mode(threshold) over
// variables [0, dim); with_threshold_row controls the lambda constraint.
LinearProblem polytope_problem(const ReachabilityForm& rf, Mode mode, double threshold,
                               bool with_threshold_row) {
    LinearProblem problem;
    const int dim = polytope_dimension(rf, mode);
    for (int i = 0; i < dim; ++i) problem.add_variable(0.0);
    if (mode == Mode::Min) {
        auto rows = reachform::matrix_rows(rf);
        for (int r = 0; r < static_cast<int>(rows.size()); ++r)
            problem.add_constraint(rows[r], Relation::LessEqual, rf.to_goal(r));
        if (with_threshold_row)
            problem.add_constraint({{rf.initial, 1.0}}, Relation::GreaterEqual, threshold);
    } else {
        auto cols = reachform::matrix_columns(rf);
        for (int t = 0; t < static_cast<int>(cols.size()); ++t)
            problem.add_constraint(cols[t], Relation::LessEqual, t == rf.initial ? 1.0 : 0.0);
        if (with_threshold_row) {
            std::vector<std::pair<int, double>> b_terms;
            for (int r = 0; r < rf.index.rows(); ++r)
                if (rf.to_goal(r) != 0.0) b_terms.emplace_back(r, rf.to_goal(r));
            problem.add_constraint(b_terms, Relation::GreaterEqual, threshold);
        }
    }
    return problem;
}

std::vector<double> inverted(const std::vector<double>& values, double big_constant,
                             double zero_cutoff) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = values[i] > zero_cutoff ? 1.0 / values[i] : big_constant;
    return out;
}

} // namespace

std::vector<double> initial_objective(const ReachabilityForm& rf, QSConfig::InitialObjective kind,
                                      Mode mode, double big_constant, double zero_cutoff) {
    const int dim = polytope_dimension(rf, mode);
    if (kind == QSConfig::InitialObjective::AO) return std::vector<double>(dim, 1.0);
    if (kind == QSConfig::InitialObjective::InvF && mode != Mode::Max)
        throw ModeMismatch("InvF derives from the max-mode polytope and applies to max queries");
    if (kind == QSConfig::InitialObjective::InvP && mode != Mode::Min)
        throw ModeMismatch("InvP derives from the min-mode polytope and applies to min queries");

    // lambda = 0 discards the threshold constraint.
    LinearProblem problem = polytope_problem(rf, mode, 0.0, false);
    problem.objective_sense = ObjectiveSense::Maximize;
    if (mode == Mode::Max) {
        for (int r = 0; r < rf.index.rows(); ++r)
            if (rf.to_goal(r) != 0.0) problem.set_objective(r, rf.to_goal(r));
    } else {
        for (int i = 0; i < dim; ++i) problem.set_objective(i, 1.0);
    }
    lp::Solution solution = lp::solve_lp(problem);
    if (solution.status != SolveStatus::Optimal)
        throw SolverError("initial-objective LP did not solve to optimality");
    return inverted(solution.values, big_constant, zero_cutoff);
}

std::optional<double> compute_K(const ReachabilityForm& rf, double threshold) {
    LinearProblem problem = polytope_problem(rf, Mode::Max, threshold, true);
    problem.objective_sense = ObjectiveSense::Maximize;
    for (int r = 0; r < rf.index.rows(); ++r) problem.set_objective(r, 1.0);
    lp::Solution solution = lp::solve_lp(problem);
    if (solution.status == SolveStatus::Infeasible) return std::nullopt;
    if (solution.status != SolveStatus::Optimal)
        throw SolverError("K-bound LP did not solve to optimality");
    return solution.objective_value;
}

namespace {

// Subsystem over the unchanged state space: excluded interior states lose
// their actions, and every edge into one is redirected to fail.
SubsystemResult make_subsystem(const ReachabilityForm& rf, std::vector<bool> mask,
                               Certificate certificate) {
    const int interior = rf.num_interior();
    Mdp sub;
    sub.num_states = rf.system.num_states;
    sub.initial = rf.initial;
    sub.labels = rf.system.labels;
    sub.choices.resize(sub.num_states);
    const int fail = rf.fail_state();
    for (int s = 0; s < sub.num_states; ++s) {
        if (s < interior && !mask[s]) {
            sub.choices[s].push_back(ActionRow{0, {{fail, 1.0}}});
            continue;
        }
        for (const auto& row : rf.system.choices[s]) {
            std::map<int, double> mass;
            for (auto [t, p] : row.targets)
                mass[(t < interior && !mask[t]) ? fail : t] += p;
            sub.choices[s].push_back(ActionRow{row.action, {mass.begin(), mass.end()}});
        }
    }
    bool single_action = true;
    for (const auto& c : sub.choices) single_action &= c.size() == 1;
    sub.dtmc = rf.system.dtmc && single_action;

    SubsystemResult result;
    result.state_mask = std::move(mask);
    result.subsystem = std::move(sub);
    result.certificate = std::move(certificate);
    result.objective_value = result.states();
    return result;
}

} // namespace

SubsystemResult certificate_to_subsystem(const ReachabilityForm& rf,
                                         const Certificate& certificate, double zero_cutoff) {
    if (!certify::is_lower_bound(certificate.query.sense))
        throw KindMismatch("only lower-bound certificates induce subsystems");
    const int interior = rf.num_interior();

    std::vector<bool> mask(interior, false);
    if (certificate.kind == CertificateKind::StateVector) {
        if (static_cast<int>(certificate.values.size()) != interior)
            throw DimensionError("certificate length does not match the state count");
        for (int s = 0; s < interior; ++s) mask[s] = certificate.values[s] > zero_cutoff;
    } else {
        if (static_cast<int>(certificate.values.size()) != rf.index.rows())
            throw DimensionError("certificate length does not match the state-action count");
        for (int r = 0; r < rf.index.rows(); ++r)
            if (certificate.values[r] > zero_cutoff) mask[rf.index.pairs[r].first] = true;
    }
    // Guard against cutoff artifacts: a positive threshold needs the initial
    // state present.
    if (certificate.query.threshold > 0.0) mask[rf.initial] = true;

    return make_subsystem(rf, std::move(mask), certificate);
}

bool check_witness(const SubsystemResult& result, Mode mode, double threshold) {
    const int goal = result.subsystem.num_states - 2;
    auto values = model::reachability_probabilities(result.subsystem, mode, {goal});
    return values[result.subsystem.initial] >= threshold - 1e-7;
}

namespace {

// Couples certificate entries to label indicators: z(s) <= sigma(l) in min
// mode, y(s,a) <= K sigma(l) in max mode, for every label l of s.
void add_label_coupling(LinearProblem& problem, const ReachabilityForm& rf, Mode mode,
                        const LabelMap& labels, int sigma_base, double k_bound) {
    if (mode == Mode::Min) {
        for (int s = 0; s < rf.num_interior(); ++s)
            for (int l : labels.assignment[s])
                problem.add_constraint({{s, 1.0}, {sigma_base + l, -1.0}}, Relation::LessEqual,
                                       0.0);
    } else {
        for (int r = 0; r < rf.index.rows(); ++r)
            for (int l : labels.assignment[rf.index.pairs[r].first])
                problem.add_constraint({{r, 1.0}, {sigma_base + l, -k_bound}},
                                       Relation::LessEqual, 0.0);
    }
}

SubsystemResult result_from_vector(const ReachabilityForm& rf, Mode mode, double threshold,
                                   const std::vector<double>& vector, double zero_cutoff) {
    Certificate certificate;
    certificate.kind = mode == Mode::Min ? CertificateKind::StateVector
                                         : CertificateKind::PairVector;
    certificate.values = vector;
    certificate.query = PropertyQuery{mode, Sense::Ge, threshold};
    return certificate_to_subsystem(rf, certificate, zero_cutoff);
}

} // namespace

bool qs_heuristic_iterate(const ReachabilityForm& rf, Mode mode, double threshold,
                          const QSConfig& config, const std::optional<LabelMap>& labels,
                          const std::function<bool(SubsystemResult)>& on_result) {
    if (threshold < 0.0 || threshold > 1.0)
        throw ValidationError("threshold must lie in [0,1]");
    if (config.iterations < 1) throw ValidationError("iteration count must be positive");
    if (labels) validate(*labels, rf.num_interior());
    if (labels && config.initial_objective != QSConfig::InitialObjective::AO)
        throw ModeMismatch("label-based minimization supports only the all-ones initial objective");

    const int dim = polytope_dimension(rf, mode);
    const int num_labels = labels ? static_cast<int>(labels->labels.size()) : 0;

    double k_bound = 1.0;
    if (labels && mode == Mode::Max) {
        auto k = compute_K(rf, threshold);
        if (!k) return false; // empty polytope: property does not hold
        k_bound = std::max(1.0, *k);
    }

    std::vector<double> objective =
        labels ? std::vector<double>(num_labels, 1.0)
               : initial_objective(rf, config.initial_objective, mode, config.big_constant,
                                   config.zero_cutoff);

    for (int iteration = 1; iteration <= config.iterations; ++iteration) {
        LinearProblem problem = polytope_problem(rf, mode, threshold, true);
        int sigma_base = 0;
        if (labels) {
            sigma_base = problem.num_variables;
            for (int l = 0; l < num_labels; ++l) problem.add_variable(0.0, 1.0);
            add_label_coupling(problem, rf, mode, *labels, sigma_base, k_bound);
            for (int l = 0; l < num_labels; ++l)
                problem.set_objective(sigma_base + l, objective[l]);
        } else {
            for (int i = 0; i < dim; ++i) problem.set_objective(i, objective[i]);
        }

        lp::Solution solution = lp::solve_lp(problem);
        if (solution.status == SolveStatus::Infeasible) {
            if (iteration > 1) throw SolverError("polytope became infeasible across iterations");
            return false;
        }
        if (solution.status != SolveStatus::Optimal)
            throw SolverError("quotient-sum LP did not solve to optimality");

        std::vector<double> vector(solution.values.begin(), solution.values.begin() + dim);
        SubsystemResult result =
            result_from_vector(rf, mode, threshold, vector, config.zero_cutoff);
        result.iteration = iteration;
        if (labels) {
            double sum = 0.0;
            for (int l = 0; l < num_labels; ++l) sum += solution.values[sigma_base + l];
            result.objective_value = sum;
        }
        if (!check_witness(result, mode, threshold))
            throw SolverError("quotient-sum iterate is not a witness");

        // Quotient update on the minimized variables.
        if (labels) {
            for (int l = 0; l < num_labels; ++l) {
                double v = solution.values[sigma_base + l];
                objective[l] = v > config.zero_cutoff ? 1.0 / v : config.big_constant;
            }
        } else {
            objective = inverted(vector, config.big_constant, config.zero_cutoff);
        }

        if (!on_result(std::move(result))) return true;
    }
    return true;
}

std::optional<std::vector<SubsystemResult>> qs_heuristic(const ReachabilityForm& rf, Mode mode,
                                                         double threshold, const QSConfig& config,
                                                         const std::optional<LabelMap>& labels) {
    std::vector<SubsystemResult> results;
    bool satisfied = qs_heuristic_iterate(rf, mode, threshold, config, labels,
                                          [&](SubsystemResult r) {
                                              results.push_back(std::move(r));
                                              return true;
                                          });
    if (!satisfied) return std::nullopt;
    return results;
}

std::optional<SubsystemResult> milp_exact(const ReachabilityForm& rf, Mode mode, double threshold,
                                          const std::optional<LabelMap>& labels) {
    if (threshold < 0.0 || threshold > 1.0)
        throw ValidationError("threshold must lie in [0,1]");
    const LabelMap label_map = labels ? *labels : LabelMap::unit(rf.num_interior());
    validate(label_map, rf.num_interior());
    const int dim = polytope_dimension(rf, mode);
    const int num_labels = static_cast<int>(label_map.labels.size());

    double k_bound = 1.0;
    if (mode == Mode::Max) {
        auto k = compute_K(rf, threshold);
        if (!k) return std::nullopt;
        k_bound = std::max(1.0, *k);
    }

    LinearProblem problem = polytope_problem(rf, mode, threshold, true);
    const int sigma_base = problem.num_variables;
    for (int l = 0; l < num_labels; ++l) problem.add_variable(0.0, 1.0, true);
    add_label_coupling(problem, rf, mode, label_map, sigma_base, k_bound);
    for (int l = 0; l < num_labels; ++l) problem.set_objective(sigma_base + l, 1.0);

    lp::Solution solution = lp::solve_milp(problem);
    if (solution.status == SolveStatus::Infeasible) return std::nullopt;
    bool optimal = solution.status == SolveStatus::Optimal;
    if (!optimal && solution.status != SolveStatus::IterationLimit)
        throw SolverError("label-minimization MILP failed");
    if (!optimal && solution.values.empty())
        throw SolverError("node limit hit before any witnessing incumbent was found");

    std::set<int> active;
    for (int l = 0; l < num_labels; ++l)
        if (solution.values[sigma_base + l] > 0.5) active.insert(l);

    // The subsystem keeps every state all of whose labels are active; the
    // certificate support is contained in that set by the coupling rows.
    // Unlabeled states ride along for free and never count toward the
    // objective.
    std::vector<bool> mask(rf.num_interior(), false);
    for (int s = 0; s < rf.num_interior(); ++s) {
        bool allowed = true;
        for (int l : label_map.assignment[s]) allowed &= active.count(l) > 0;
        mask[s] = allowed;
    }

    Certificate certificate;
    certificate.kind =
        mode == Mode::Min ? CertificateKind::StateVector : CertificateKind::PairVector;
    certificate.values.assign(solution.values.begin(), solution.values.begin() + dim);
    certificate.query = PropertyQuery{mode, Sense::Ge, threshold};

    SubsystemResult result = make_subsystem(rf, std::move(mask), std::move(certificate));
    result.objective_value = static_cast<double>(active.size());
    result.iteration = 0;
    result.optimal = optimal;
    if (!check_witness(result, mode, threshold))
        throw SolverError("MILP result is not a witness");
    return result;
}

} // namespace witness::subsys
