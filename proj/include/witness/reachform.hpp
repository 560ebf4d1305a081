#pragma once

#include <Eigen/SparseCore>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "witness/model.hpp"

namespace witness::reachform {

/// A maximal end component: the states it spans and the state-action pairs
/// staying inside it.
struct Mec {
    std::set<int> states;
    std::vector<std::pair<int, int>> pairs; // (state, action id)
};

/// Exactly the maximal end components of the MDP, pairwise disjoint, ordered
/// by minimal contained state index. Computed by iterated SCC refinement.
std::vector<Mec> mec_decomposition(const model::Mdp& mdp);

/// Correspondence between original and reduced state spaces. States whose
/// forward image is empty were removed; a reduced state maps back to every
/// original state that was merged into it.
struct StateMaps {
    std::vector<std::optional<int>> forward;
    std::vector<std::vector<int>> backward;

    static StateMaps identity(int n);
    StateMaps then(const StateMaps& next) const;
};

/// Collapses maximal end components. A MEC meeting goal_states (fail_states)
/// is merged into its goal (fail) representative, which keeps its own
/// transitions; any other MEC becomes a single state whose actions are the
/// MEC-exiting pairs plus one action modelling the choice to stay inside the
/// component forever, wired to the fail representative (a fresh absorbing
/// sink is appended when fail_states is empty). Throws ValidationError when a
/// MEC meets both goal_states and fail_states.
std::pair<model::Mdp, StateMaps> quotient_mecs(const model::Mdp& mdp,
                                               const std::set<int>& goal_states,
                                               const std::set<int>& fail_states);

/// Normalized model for reachability analysis. The last two states of
/// `system` are the distinguished goal and fail states (both absorbing);
/// every other state is reachable from `initial` and reaches goal; the only
/// maximal end components are {goal} and {fail}. `matrix_A` and `to_goal`
/// form the Farkas system over the interior states.
struct ReachabilityForm {
    model::Mdp system;
    int initial = 0;
    model::StateActionIndex index;        // over the interior states
    Eigen::SparseMatrix<double> matrix_A; // rows: index.pairs, cols: interior states
    Eigen::VectorXd to_goal;

    int num_interior() const { return system.num_states - 2; }
    int goal_state() const { return system.num_states - 2; }
    int fail_state() const { return system.num_states - 1; }
};

/// Builds the reachability form: removes states unreachable from the
/// init-labeled state or unable to reach a goal-labeled state, wires every
/// original target to a fresh goal state through a single probability-one
/// action (keeping their incoming edges), redirects all removed mass to a
/// fresh fail state, and collapses remaining end components. Throws
/// ValidationError when init_label is not unique or no goal-labeled state is
/// reachable.
std::pair<ReachabilityForm, StateMaps> reduce(const model::Mdp& mdp, const std::string& init_label,
                                              const std::string& goal_label);

/// The stored sparse system (A, b) together with the initial-state basis
/// vector; pure accessor.
struct FarkasSystem {
    const Eigen::SparseMatrix<double>& matrix_A;
    const Eigen::VectorXd& to_goal;
    Eigen::VectorXd initial_basis;
};

FarkasSystem farkas_system(const ReachabilityForm& rf);

using SparseRows = std::vector<std::vector<std::pair<int, double>>>;

/// Coefficient lists of A by row (one per state-action pair) and by column
/// (one per interior state).
SparseRows matrix_rows(const ReachabilityForm& rf);
SparseRows matrix_columns(const ReachabilityForm& rf);

} // namespace witness::reachform
