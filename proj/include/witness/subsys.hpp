#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "witness/certify.hpp"
#include "witness/reachform.hpp"

namespace witness::subsys {

using model::Mode;

/// Ordered label universe with a per-interior-state label assignment.
/// State-minimization is the canonical instance where each state carries a
/// unique singleton label; states may also carry no label at all, in which
/// case they never count toward a label objective.
struct LabelMap {
    std::vector<std::string> labels;
    std::vector<std::vector<int>> assignment; // per interior state: indices into labels

    static LabelMap unit(int num_states);
};

void validate(const LabelMap& labels, int num_states);

struct QSConfig {
    enum class InitialObjective { AO, InvF, InvP };
    int iterations = 3;
    InitialObjective initial_objective = InitialObjective::AO;
    double big_constant = 1e8;
    double zero_cutoff = 1e-8;
};

/// A witnessing subsystem: the interior states kept, the induced sub-MDP
/// (same state space, excluded mass redirected to fail), and the certificate
/// that produced it.
struct SubsystemResult {
    std::vector<bool> state_mask; // over the interior states
    model::Mdp subsystem;
    certify::Certificate certificate;
    double objective_value = 0.0;
    int iteration = 0; // 0 for exact results
    bool optimal = true;

    int states() const; // number of interior states in the mask
};

std::string summary_line(const SubsystemResult& result);

/// Starting objective for the quotient-sum heuristic: all-ones, or the
/// pointwise inverse of the lambda=0 polytope optimum (expected visits for
/// InvF on max queries, reachability probabilities for InvP on min queries);
/// entries below the cutoff invert to the big constant. Throws ModeMismatch
/// for InvF on min or InvP on max queries.
std::vector<double> initial_objective(const reachform::ReachabilityForm& rf,
                                      QSConfig::InitialObjective kind, Mode mode,
                                      double big_constant = 1e8, double zero_cutoff = 1e-8);

/// Iterative quotient-sum heuristic over the lower-bound certificate
/// polytope; every emitted result is a verified witness. Returns nothing when
/// the property does not hold. The callback receives results in iteration
/// order and may return false to stop early.
bool qs_heuristic_iterate(const reachform::ReachabilityForm& rf, Mode mode, double threshold,
                          const QSConfig& config, const std::optional<LabelMap>& labels,
                          const std::function<bool(SubsystemResult)>& on_result);

std::optional<std::vector<SubsystemResult>> qs_heuristic(
    const reachform::ReachabilityForm& rf, Mode mode, double threshold, const QSConfig& config,
    const std::optional<LabelMap>& labels = std::nullopt);

/// Upper bound on any entry of a vector in the max-mode polytope at the given
/// threshold: the maximum of the entry sum. Nothing when the polytope is
/// empty.
std::optional<double> compute_K(const reachform::ReachabilityForm& rf, double threshold);

/// Exact minimization of the number of present labels (states, for the unit
/// labeling) over witnessing subsystems, by restricting the label indicators
/// to {0,1}. Nothing when the property does not hold; a node-limited search
/// returns the incumbent flagged non-optimal.
std::optional<SubsystemResult> milp_exact(const reachform::ReachabilityForm& rf, Mode mode,
                                          double threshold,
                                          const std::optional<LabelMap>& labels = std::nullopt);

/// Support of a lower-bound certificate as a subsystem: states with an entry
/// above the cutoff stay (the initial state is forced in when the threshold
/// is positive), edges into excluded states are redirected to fail. Throws
/// KindMismatch for upper-bound certificates.
SubsystemResult certificate_to_subsystem(const reachform::ReachabilityForm& rf,
                                         const certify::Certificate& certificate,
                                         double zero_cutoff = 1e-8);

/// True iff the subsystem on its own satisfies the lower bound, judged by the
/// value-iteration oracle with slack 1e-7.
bool check_witness(const SubsystemResult& result, Mode mode, double threshold);

} // namespace witness::subsys
