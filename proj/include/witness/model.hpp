#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "witness/errors.hpp"

namespace witness::model {

enum class Mode { Min, Max };

inline const char* to_string(Mode m) { return m == Mode::Min ? "min" : "max"; }

/// One enabled action of a state: the action id as given in the .tra file and
/// the probability distribution over successor states.
struct ActionRow {
    int action = 0;
    std::vector<std::pair<int, double>> targets; // (state, probability), file order
};

/// Explicit-state MDP. DTMCs are the special case of exactly one action per
/// state (action id 0); the `dtmc` flag records how the model was declared.
/// Instances are treated as immutable after construction; all operations on
/// them are pure functions.
struct Mdp {
    int num_states = 0;
    bool dtmc = false;
    int initial = 0;
    std::vector<std::vector<ActionRow>> choices;   // [state] -> enabled actions, file order
    std::map<std::string, std::set<int>> labels;   // label -> states carrying it

    const ActionRow& row(int state, int action) const;
    int num_choice_rows() const;
    int num_transition_entries() const;
};

/// Bijection between enabled (state, action) pairs and row indices,
/// state-major with action ids ascending. Covers states [0, state_limit).
struct StateActionIndex {
    std::vector<std::pair<int, int>> pairs;
    std::map<std::pair<int, int>, int> row_of;

    int rows() const { return static_cast<int>(pairs.size()); }
    int row(int state, int action) const;
};

StateActionIndex make_state_action_index(const Mdp& mdp, int state_limit = -1);

/// Checks all Mdp invariants (row sums within 1e-9 of one, no negative
/// probabilities, every state has at least one action, targets in range).
/// Throws ValidationError on the first violation.
void validate(const Mdp& mdp);

/// Parses the explicit .tra/.lab pair; see the README for the exact grammar.
/// Throws SyntaxError for malformed text and ValidationError for violated
/// model invariants.
Mdp parse_model(const std::string& tra_text, const std::string& lab_text);

std::string serialize_tra(const Mdp& mdp);
std::string serialize_lab(const Mdp& mdp);

/// FNV-1a hash of the canonical .tra serialization, as fixed-width hex.
std::string digest(const Mdp& mdp);

/// Probability of eventually reaching `goal_states` from every state, under
/// the minimizing or maximizing scheduler. Graph-based qualitative
/// preprocessing fixes exact 0 (and, for min, exact 1) states, then value
/// iteration runs until the max-norm change drops below 1e-10 (at most 1e6
/// sweeps). This is the verification oracle the rest of the library is
/// checked against.
std::vector<double> reachability_probabilities(const Mdp& mdp, Mode mode,
                                               const std::set<int>& goal_states);

/// Qualitative sets used by the preprocessing; exposed for reuse in reduce.
std::vector<bool> states_reaching(const Mdp& mdp, const std::set<int>& targets);
std::vector<bool> states_reachable_from(const Mdp& mdp, int source);

/// Renders the model as a GraphViz digraph. States listed in `subsystem_mask`
/// (when present) are drawn normally, all others pale. `certificate_values`
/// are indexed over the interior states (all but the last two, min-mode
/// certificates) or over the interior state-action rows (max-mode); the
/// matching interpretation is chosen by length, and a DimensionError is
/// thrown when neither fits. Absorbing self-loops are omitted from the
/// drawing. Output is deterministic.
std::string export_dot(const Mdp& mdp,
                       const std::optional<std::set<int>>& subsystem_mask = std::nullopt,
                       const std::optional<std::vector<double>>& certificate_values = std::nullopt,
                       const std::map<std::string, std::string>& label_colors = {});

} // namespace witness::model
