#include "witness/reachform.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace witness::reachform {

using model::ActionRow;
using model::Mdp;

namespace {

// Strongly connected components of the subgraph spanned by `alive` states and
// the per-state action positions in `acts`. Returns component ids (-1 = dead).
std::vector<int> scc_components(const Mdp& mdp, const std::vector<bool>& alive,
                                const std::vector<std::vector<int>>& acts) {
    const int n = mdp.num_states;
    std::vector<std::vector<int>> fwd(n), bwd(n);
    for (int s = 0; s < n; ++s) {
        if (!alive[s]) continue;
        for (int i : acts[s])
            for (auto [t, p] : mdp.choices[s][i].targets)
                if (p > 0.0 && alive[t]) {
                    fwd[s].push_back(t);
                    bwd[t].push_back(s);
                }
    }
    std::vector<int> order;
    order.reserve(n);
    std::vector<char> seen(n, 0);
    for (int s = 0; s < n; ++s) {
        if (!alive[s] || seen[s]) continue;
        std::vector<std::pair<int, std::size_t>> stack{{s, 0}};
        seen[s] = 1;
        while (!stack.empty()) {
            auto& [u, i] = stack.back();
            if (i < fwd[u].size()) {
                int v = fwd[u][i++];
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.emplace_back(v, 0);
                }
            } else {
                order.push_back(u);
                stack.pop_back();
            }
        }
    }
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp[*it] != -1) continue;
        std::deque<int> queue{*it};
        comp[*it] = ncomp;
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            for (int v : bwd[u])
                if (alive[v] && comp[v] == -1) {
                    comp[v] = ncomp;
                    queue.push_back(v);
                }
        }
        ++ncomp;
    }
    return comp;
}

} // namespace

std::vector<Mec> mec_decomposition(const Mdp& mdp) {
    const int n = mdp.num_states;
    std::vector<bool> alive(n, true);
    std::vector<std::vector<int>> acts(n);
    for (int s = 0; s < n; ++s)
        for (std::size_t i = 0; i < mdp.choices[s].size(); ++i)
            acts[s].push_back(static_cast<int>(i));

    std::vector<int> comp;
    bool changed = true;
    while (changed) {
        changed = false;
        comp = scc_components(mdp, alive, acts);
        for (int s = 0; s < n; ++s) {
            if (!alive[s]) continue;
            auto& a = acts[s];
            a.erase(std::remove_if(a.begin(), a.end(),
                                   [&](int i) {
                                       for (auto [t, p] : mdp.choices[s][i].targets)
                                           if (p > 0.0 && (!alive[t] || comp[t] != comp[s]))
                                               return true;
                                       return false;
                                   }),
                    a.end());
            if (a.empty()) {
                alive[s] = false;
                changed = true;
            }
        }
        if (changed) continue;
        // Also require that the remaining actions still span their SCC; the
        // erase step above may have split a component.
        auto refreshed = scc_components(mdp, alive, acts);
        for (int s = 0; s < n && !changed; ++s)
            if (alive[s])
                for (int i : acts[s])
                    for (auto [t, p] : mdp.choices[s][i].targets)
                        if (p > 0.0 && refreshed[t] != refreshed[s]) changed = true;
        comp = refreshed;
    }

    std::map<int, Mec> by_comp;
    for (int s = 0; s < n; ++s) {
        if (!alive[s]) continue;
        auto& mec = by_comp[comp[s]];
        mec.states.insert(s);
        for (int i : acts[s]) mec.pairs.emplace_back(s, mdp.choices[s][i].action);
    }
    std::vector<Mec> out;
    for (auto& [c, mec] : by_comp) {
        std::sort(mec.pairs.begin(), mec.pairs.end());
        out.push_back(std::move(mec));
    }
    std::sort(out.begin(), out.end(),
              [](const Mec& a, const Mec& b) { return *a.states.begin() < *b.states.begin(); });
    return out;
}

StateMaps StateMaps::identity(int n) {
    StateMaps maps;
    maps.forward.resize(n);
    maps.backward.resize(n);
    for (int s = 0; s < n; ++s) {
        maps.forward[s] = s;
        maps.backward[s] = {s};
    }
    return maps;
}

StateMaps StateMaps::then(const StateMaps& next) const {
    StateMaps out;
    out.forward.resize(forward.size());
    out.backward.resize(next.backward.size());
    for (std::size_t s = 0; s < forward.size(); ++s)
        out.forward[s] =
            forward[s] && *forward[s] < static_cast<int>(next.forward.size())
                ? next.forward[*forward[s]]
                : std::nullopt;
    for (std::size_t r = 0; r < next.backward.size(); ++r)
        for (int mid : next.backward[r])
            for (int orig : backward[mid]) out.backward[r].push_back(orig);
    return out;
}

std::pair<Mdp, StateMaps> quotient_mecs(const Mdp& mdp, const std::set<int>& goal_states,
                                        const std::set<int>& fail_states) {
    for (int s : goal_states)
        if (fail_states.count(s)) throw ValidationError("goal and fail state sets intersect");

    const int n = mdp.num_states;
    auto mecs = mec_decomposition(mdp);

    enum class MecKind { Goal, Fail, Plain };
    std::vector<MecKind> kind(mecs.size());
    std::vector<int> mec_of(n, -1);
    bool any_plain = false;
    for (std::size_t m = 0; m < mecs.size(); ++m) {
        bool in_goal = false, in_fail = false;
        for (int s : mecs[m].states) {
            mec_of[s] = static_cast<int>(m);
            in_goal |= goal_states.count(s) > 0;
            in_fail |= fail_states.count(s) > 0;
        }
        if (in_goal && in_fail)
            throw ValidationError("a maximal end component contains both goal and fail states");
        kind[m] = in_goal ? MecKind::Goal : in_fail ? MecKind::Fail : MecKind::Plain;
        any_plain |= kind[m] == MecKind::Plain;
    }

    // One unit per untouched state / per MEC, ordered by least original index.
    struct Unit {
        int representative;
        int mec = -1;
    };
    std::vector<Unit> units;
    for (int s = 0; s < n; ++s) {
        if (mec_of[s] == -1) {
            units.push_back({s, -1});
        } else if (*mecs[mec_of[s]].states.begin() == s) {
            units.push_back({s, mec_of[s]});
        }
    }

    StateMaps maps;
    maps.forward.assign(n, std::nullopt);
    const int divergence_sink_needed = any_plain && fail_states.empty();
    const int num_new = static_cast<int>(units.size()) + (divergence_sink_needed ? 1 : 0);
    maps.backward.resize(num_new);
    for (std::size_t u = 0; u < units.size(); ++u) {
        if (units[u].mec == -1) {
            maps.forward[units[u].representative] = static_cast<int>(u);
            maps.backward[u] = {units[u].representative};
        } else {
            for (int s : mecs[units[u].mec].states) {
                maps.forward[s] = static_cast<int>(u);
                maps.backward[u].push_back(s);
            }
        }
    }

    int fail_rep;
    if (!fail_states.empty()) {
        fail_rep = *maps.forward[*fail_states.begin()];
    } else {
        fail_rep = num_new - 1; // fresh absorbing sink
    }

    Mdp out;
    out.num_states = num_new;
    out.initial = maps.forward[mdp.initial] ? *maps.forward[mdp.initial] : 0;
    out.choices.resize(num_new);

    auto remap_targets = [&](const std::vector<std::pair<int, double>>& targets) {
        std::map<int, double> mass;
        for (auto [t, p] : targets) mass[*maps.forward[t]] += p;
        std::vector<std::pair<int, double>> out_targets(mass.begin(), mass.end());
        return out_targets;
    };

    for (std::size_t u = 0; u < units.size(); ++u) {
        const Unit& unit = units[u];
        if (unit.mec == -1 || kind[unit.mec] != MecKind::Plain) {
            // Untouched state, or a goal/fail representative keeping its rows.
            for (const auto& r : mdp.choices[unit.representative])
                out.choices[u].push_back(ActionRow{r.action, remap_targets(r.targets)});
            continue;
        }
        const Mec& mec = mecs[unit.mec];
        std::set<std::pair<int, int>> internal(mec.pairs.begin(), mec.pairs.end());
        int next_id = 0;
        for (int s : mec.states)
            for (const auto& r : mdp.choices[s])
                if (!internal.count({s, r.action}))
                    out.choices[u].push_back(ActionRow{next_id++, remap_targets(r.targets)});
        // Staying inside the component forever never reaches goal; keep that
        // option observable after the collapse.
        out.choices[u].push_back(ActionRow{next_id, {{fail_rep, 1.0}}});
    }
    if (divergence_sink_needed)
        out.choices[num_new - 1].push_back(ActionRow{0, {{num_new - 1, 1.0}}});

    for (const auto& [name, states] : mdp.labels) {
        std::set<int> mapped;
        for (int s : states)
            if (maps.forward[s]) mapped.insert(*maps.forward[s]);
        out.labels[name] = std::move(mapped);
    }

    bool single_action = true;
    for (const auto& c : out.choices) single_action &= c.size() == 1;
    out.dtmc = mdp.dtmc && single_action;

    model::validate(out);
    return {std::move(out), std::move(maps)};
}

std::pair<ReachabilityForm, StateMaps> reduce(const Mdp& mdp, const std::string& init_label,
                                              const std::string& goal_label) {
    auto init_it = mdp.labels.find(init_label);
    if (init_it == mdp.labels.end() || init_it->second.size() != 1)
        throw ValidationError("label '" + init_label + "' must mark exactly one state");
    const int init = *init_it->second.begin();
    auto goal_it = mdp.labels.find(goal_label);
    if (goal_it == mdp.labels.end() || goal_it->second.empty())
        throw ValidationError("label '" + goal_label + "' marks no state");
    const std::set<int>& goal_orig = goal_it->second;

    auto fwd = model::states_reachable_from(mdp, init);
    auto bwd = model::states_reaching(mdp, goal_orig);
    std::vector<int> trim_index(mdp.num_states, -1);
    std::vector<int> retained;
    for (int s = 0; s < mdp.num_states; ++s)
        if (fwd[s] && bwd[s]) {
            trim_index[s] = static_cast<int>(retained.size());
            retained.push_back(s);
        }
    if (trim_index[init] == -1)
        throw ValidationError("no goal-labeled state is reachable from the initial state");

    const int interior = static_cast<int>(retained.size());
    const int fresh_goal = interior;
    const int fresh_fail = interior + 1;

    Mdp trimmed;
    trimmed.num_states = interior + 2;
    trimmed.initial = trim_index[init];
    trimmed.choices.resize(trimmed.num_states);
    for (int s : retained) {
        const int u = trim_index[s];
        if (goal_orig.count(s)) {
            // Original targets hand over to the fresh goal state.
            trimmed.choices[u].push_back(ActionRow{0, {{fresh_goal, 1.0}}});
            continue;
        }
        for (const auto& r : mdp.choices[s]) {
            std::map<int, double> mass;
            for (auto [t, p] : r.targets)
                mass[trim_index[t] == -1 ? fresh_fail : trim_index[t]] += p;
            trimmed.choices[u].push_back(
                ActionRow{r.action, {mass.begin(), mass.end()}});
        }
    }
    trimmed.choices[fresh_goal].push_back(ActionRow{0, {{fresh_goal, 1.0}}});
    trimmed.choices[fresh_fail].push_back(ActionRow{0, {{fresh_fail, 1.0}}});
    for (const auto& [name, states] : mdp.labels) {
        std::set<int> mapped;
        for (int s : states)
            if (trim_index[s] != -1) mapped.insert(trim_index[s]);
        trimmed.labels[name] = std::move(mapped);
    }
    bool single_action = true;
    for (const auto& c : trimmed.choices) single_action &= c.size() == 1;
    trimmed.dtmc = mdp.dtmc && single_action;

    StateMaps trim_maps;
    trim_maps.forward.assign(mdp.num_states, std::nullopt);
    trim_maps.backward.resize(trimmed.num_states);
    for (int s = 0; s < mdp.num_states; ++s)
        if (trim_index[s] != -1) {
            trim_maps.forward[s] = trim_index[s];
            trim_maps.backward[trim_index[s]] = {s};
        }

    auto [quotiented, quot_maps] = quotient_mecs(trimmed, {fresh_goal}, {fresh_fail});

    ReachabilityForm rf;
    rf.system = std::move(quotiented);
    rf.initial = *quot_maps.forward[trimmed.initial];
    rf.system.initial = rf.initial;
    const int m = rf.num_interior();
    rf.index = model::make_state_action_index(rf.system, m);

    std::vector<Eigen::Triplet<double>> triplets;
    rf.to_goal = Eigen::VectorXd::Zero(rf.index.rows());
    for (int r = 0; r < rf.index.rows(); ++r) {
        auto [s, a] = rf.index.pairs[r];
        double self = 0.0;
        for (auto [t, p] : rf.system.row(s, a).targets) {
            if (t == s) self = p;
            if (t == rf.goal_state()) rf.to_goal(r) = p;
        }
        triplets.emplace_back(r, s, 1.0 - self);
        for (auto [t, p] : rf.system.row(s, a).targets)
            if (t != s && t < m && p != 0.0) triplets.emplace_back(r, t, -p);
    }
    rf.matrix_A.resize(rf.index.rows(), m);
    rf.matrix_A.setFromTriplets(triplets.begin(), triplets.end());
    rf.matrix_A.makeCompressed();

    return {std::move(rf), trim_maps.then(quot_maps)};
}

FarkasSystem farkas_system(const ReachabilityForm& rf) {
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(rf.num_interior());
    delta(rf.initial) = 1.0;
    return FarkasSystem{rf.matrix_A, rf.to_goal, std::move(delta)};
}

SparseRows matrix_rows(const ReachabilityForm& rf) {
    SparseRows rows(rf.matrix_A.rows());
    for (int c = 0; c < rf.matrix_A.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(rf.matrix_A, c); it; ++it)
            rows[it.row()].emplace_back(c, it.value());
    return rows;
}

SparseRows matrix_columns(const ReachabilityForm& rf) {
    SparseRows cols(rf.matrix_A.cols());
    for (int c = 0; c < rf.matrix_A.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(rf.matrix_A, c); it; ++it)
            cols[c].emplace_back(static_cast<int>(it.row()), it.value());
    return cols;
}

} // namespace witness::reachform
