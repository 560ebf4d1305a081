#include "witness/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>

namespace witness::model {

namespace {

constexpr double kRowSumTolerance = 1e-9;
constexpr double kViStopTolerance = 1e-10;
constexpr int kViMaxSweeps = 1000000;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

long parse_int(const std::string& tok, std::size_t line) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(tok, &pos);
    } catch (const std::exception&) {
        throw SyntaxError("expected integer, got '" + tok + "'", line);
    }
    if (pos != tok.size()) throw SyntaxError("expected integer, got '" + tok + "'", line);
    return v;
}

double parse_prob(const std::string& tok, std::size_t line) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw SyntaxError("expected probability, got '" + tok + "'", line);
    }
    if (pos != tok.size()) throw SyntaxError("expected probability, got '" + tok + "'", line);
    return v;
}

bool blank_or_comment(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

} // namespace

const ActionRow& Mdp::row(int state, int action) const {
    for (const auto& r : choices.at(state))
        if (r.action == action) return r;
    throw ValidationError("no action " + std::to_string(action) + " at state " +
                          std::to_string(state));
}

int Mdp::num_choice_rows() const {
    int n = 0;
    for (const auto& c : choices) n += static_cast<int>(c.size());
    return n;
}

int Mdp::num_transition_entries() const {
    int n = 0;
    for (const auto& c : choices)
        for (const auto& r : c) n += static_cast<int>(r.targets.size());
    return n;
}

int StateActionIndex::row(int state, int action) const {
    auto it = row_of.find({state, action});
    if (it == row_of.end())
        throw ValidationError("pair (" + std::to_string(state) + "," + std::to_string(action) +
                              ") is not indexed");
    return it->second;
}

StateActionIndex make_state_action_index(const Mdp& mdp, int state_limit) {
    if (state_limit < 0) state_limit = mdp.num_states;
    StateActionIndex index;
    for (int s = 0; s < state_limit; ++s) {
        std::vector<int> ids;
        for (const auto& r : mdp.choices[s]) ids.push_back(r.action);
        std::sort(ids.begin(), ids.end());
        for (int a : ids) {
            index.row_of[{s, a}] = static_cast<int>(index.pairs.size());
            index.pairs.emplace_back(s, a);
        }
    }
    return index;
}

void validate(const Mdp& mdp) {
    if (mdp.num_states <= 0) throw ValidationError("model has no states");
    if (static_cast<int>(mdp.choices.size()) != mdp.num_states)
        throw ValidationError("choice table size does not match state count");
    if (mdp.initial < 0 || mdp.initial >= mdp.num_states)
        throw ValidationError("initial state out of range");
    for (int s = 0; s < mdp.num_states; ++s) {
        if (mdp.choices[s].empty())
            throw ValidationError("state " + std::to_string(s) + " has no actions");
        if (mdp.dtmc && mdp.choices[s].size() != 1)
            throw ValidationError("DTMC state " + std::to_string(s) + " has several actions");
        std::set<int> seen;
        for (const auto& r : mdp.choices[s]) {
            if (!seen.insert(r.action).second)
                throw ValidationError("duplicate action id at state " + std::to_string(s));
            double sum = 0.0;
            for (auto [t, p] : r.targets) {
                if (t < 0 || t >= mdp.num_states)
                    throw ValidationError("transition target out of range at state " +
                                          std::to_string(s));
                if (p < 0.0)
                    throw ValidationError("negative probability at state " + std::to_string(s));
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw ValidationError("probabilities of state " + std::to_string(s) + ", action " +
                                      std::to_string(r.action) + " sum to " + format_double(sum));
        }
    }
    for (const auto& [name, states] : mdp.labels)
        for (int s : states)
            if (s < 0 || s >= mdp.num_states)
                throw ValidationError("label '" + name + "' references out-of-range state " +
                                      std::to_string(s));
}

Mdp parse_model(const std::string& tra_text, const std::string& lab_text) {
    Mdp mdp;

    // --- .tra ---
    std::istringstream tra(tra_text);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    long declared_states = 0, declared_choices = 0, declared_transitions = 0;
    long seen_transitions = 0;
    // (state, action) -> position in choices[state]; keeps file order of first occurrence
    std::map<std::pair<int, int>, std::size_t> row_pos;

    while (std::getline(tra, line)) {
        ++lineno;
        if (blank_or_comment(line)) continue;
        auto tok = split_ws(line);
        if (!have_header) {
            if (tok.size() == 2) {
                mdp.dtmc = true;
                declared_states = parse_int(tok[0], lineno);
                declared_choices = declared_states;
                declared_transitions = parse_int(tok[1], lineno);
            } else if (tok.size() == 3) {
                mdp.dtmc = false;
                declared_states = parse_int(tok[0], lineno);
                declared_choices = parse_int(tok[1], lineno);
                declared_transitions = parse_int(tok[2], lineno);
            } else {
                throw SyntaxError("header must be '<states> <transitions>' or "
                                  "'<states> <choices> <transitions>'",
                                  lineno);
            }
            if (declared_states <= 0) throw SyntaxError("state count must be positive", lineno);
            mdp.num_states = static_cast<int>(declared_states);
            mdp.choices.resize(mdp.num_states);
            have_header = true;
            continue;
        }
        long src, action, dst;
        double prob;
        if (mdp.dtmc) {
            if (tok.size() != 3) throw SyntaxError("expected '<src> <dst> <prob>'", lineno);
            src = parse_int(tok[0], lineno);
            action = 0;
            dst = parse_int(tok[1], lineno);
            prob = parse_prob(tok[2], lineno);
        } else {
            if (tok.size() != 4) throw SyntaxError("expected '<src> <choice> <dst> <prob>'", lineno);
            src = parse_int(tok[0], lineno);
            action = parse_int(tok[1], lineno);
            dst = parse_int(tok[2], lineno);
            prob = parse_prob(tok[3], lineno);
        }
        if (src < 0 || src >= declared_states)
            throw ValidationError("source state " + std::to_string(src) + " out of range");
        if (dst < 0 || dst >= declared_states)
            throw ValidationError("target state " + std::to_string(dst) + " out of range");
        if (action < 0) throw ValidationError("negative action id");
        if (prob < 0.0) throw ValidationError("negative probability");
        auto key = std::make_pair(static_cast<int>(src), static_cast<int>(action));
        auto it = row_pos.find(key);
        if (it == row_pos.end()) {
            row_pos[key] = mdp.choices[src].size();
            mdp.choices[src].push_back(ActionRow{static_cast<int>(action), {}});
            it = row_pos.find(key);
        }
        auto& targets = mdp.choices[src][it->second].targets;
        bool merged = false;
        for (auto& [t, p] : targets)
            if (t == dst) { p += prob; merged = true; break; }
        if (!merged) targets.emplace_back(static_cast<int>(dst), prob);
        ++seen_transitions;
    }
    if (!have_header) throw SyntaxError(".tra text is empty");
    if (seen_transitions != declared_transitions)
        throw SyntaxError(".tra declares " + std::to_string(declared_transitions) +
                          " transitions but contains " + std::to_string(seen_transitions));
    long seen_choices = mdp.num_choice_rows();
    if (!mdp.dtmc && seen_choices != declared_choices)
        throw SyntaxError(".tra declares " + std::to_string(declared_choices) +
                          " choices but contains " + std::to_string(seen_choices));

    // --- .lab ---
    std::istringstream lab(lab_text);
    lineno = 0;
    bool have_decl = false;
    std::map<long, std::string> label_of_id;
    while (std::getline(lab, line)) {
        ++lineno;
        if (blank_or_comment(line)) continue;
        if (!have_decl) {
            // id="name" pairs
            std::size_t i = 0;
            while (i < line.size()) {
                while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
                if (i >= line.size()) break;
                std::size_t eq = line.find('=', i);
                if (eq == std::string::npos)
                    throw SyntaxError("expected id=\"name\" declarations", lineno);
                long id = parse_int(line.substr(i, eq - i), lineno);
                if (eq + 1 >= line.size() || line[eq + 1] != '"')
                    throw SyntaxError("label name must be quoted", lineno);
                std::size_t close = line.find('"', eq + 2);
                if (close == std::string::npos)
                    throw SyntaxError("unterminated label name", lineno);
                std::string name = line.substr(eq + 2, close - eq - 2);
                if (name.empty()) throw SyntaxError("empty label name", lineno);
                if (!label_of_id.emplace(id, name).second)
                    throw SyntaxError("duplicate label id " + std::to_string(id), lineno);
                mdp.labels.emplace(name, std::set<int>{});
                i = close + 1;
            }
            have_decl = true;
            continue;
        }
        std::size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw SyntaxError("expected '<state>: <id> ...'", lineno);
        auto head = split_ws(line.substr(0, colon));
        if (head.size() != 1) throw SyntaxError("expected single state index", lineno);
        long state = parse_int(head[0], lineno);
        if (state < 0 || state >= mdp.num_states)
            throw ValidationError(".lab references out-of-range state " + std::to_string(state));
        for (const auto& tok : split_ws(line.substr(colon + 1))) {
            long id = parse_int(tok, lineno);
            auto it = label_of_id.find(id);
            if (it == label_of_id.end())
                throw SyntaxError("undeclared label id " + std::to_string(id), lineno);
            mdp.labels[it->second].insert(static_cast<int>(state));
        }
    }

    auto init = mdp.labels.find("init");
    if (init != mdp.labels.end() && init->second.size() == 1) mdp.initial = *init->second.begin();

    validate(mdp);
    return mdp;
}

std::string serialize_tra(const Mdp& mdp) {
    std::ostringstream out;
    if (mdp.dtmc) {
        out << mdp.num_states << ' ' << mdp.num_transition_entries() << '\n';
        for (int s = 0; s < mdp.num_states; ++s)
            for (const auto& r : mdp.choices[s])
                for (auto [t, p] : r.targets)
                    out << s << ' ' << t << ' ' << format_double(p) << '\n';
    } else {
        out << mdp.num_states << ' ' << mdp.num_choice_rows() << ' '
            << mdp.num_transition_entries() << '\n';
        for (int s = 0; s < mdp.num_states; ++s)
            for (const auto& r : mdp.choices[s])
                for (auto [t, p] : r.targets)
                    out << s << ' ' << r.action << ' ' << t << ' ' << format_double(p) << '\n';
    }
    return out.str();
}

std::string serialize_lab(const Mdp& mdp) {
    std::ostringstream out;
    bool first = true;
    int id = 0;
    std::map<int, std::vector<int>> ids_of_state; // labels are iterated in name order
    for (const auto& [name, states] : mdp.labels) {
        out << (first ? "" : " ") << id << "=\"" << name << '"';
        first = false;
        for (int s : states) ids_of_state[s].push_back(id);
        ++id;
    }
    out << '\n';
    for (const auto& [s, ids] : ids_of_state) {
        out << s << ':';
        for (int i : ids) out << ' ' << i;
        out << '\n';
    }
    return out.str();
}

std::string digest(const Mdp& mdp) {
    const std::string text = serialize_tra(mdp);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<bool> states_reaching(const Mdp& mdp, const std::set<int>& targets) {
    // Backward reachability over all action edges.
    std::vector<std::vector<int>> pred(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s)
        for (const auto& r : mdp.choices[s])
            for (auto [t, p] : r.targets)
                if (p > 0.0) pred[t].push_back(s);
    std::vector<bool> reach(mdp.num_states, false);
    std::deque<int> queue;
    for (int t : targets)
        if (t >= 0 && t < mdp.num_states && !reach[t]) {
            reach[t] = true;
            queue.push_back(t);
        }
    while (!queue.empty()) {
        int t = queue.front();
        queue.pop_front();
        for (int s : pred[t])
            if (!reach[s]) {
                reach[s] = true;
                queue.push_back(s);
            }
    }
    return reach;
}

std::vector<bool> states_reachable_from(const Mdp& mdp, int source) {
    std::vector<bool> reach(mdp.num_states, false);
    std::deque<int> queue;
    reach[source] = true;
    queue.push_back(source);
    while (!queue.empty()) {
        int s = queue.front();
        queue.pop_front();
        for (const auto& r : mdp.choices[s])
            for (auto [t, p] : r.targets)
                if (p > 0.0 && !reach[t]) {
                    reach[t] = true;
                    queue.push_back(t);
                }
    }
    return reach;
}

namespace {

// States with Pr^min(reach goal) > 0: least fixed point of "every action has
// a successor already in the set".
std::vector<bool> min_positive_states(const Mdp& mdp, const std::vector<bool>& goal) {
    std::vector<bool> in(mdp.num_states, false);
    for (int s = 0; s < mdp.num_states; ++s) in[s] = goal[s];
    bool changed = true;
    while (changed) {
        changed = false;
        for (int s = 0; s < mdp.num_states; ++s) {
            if (in[s]) continue;
            bool all = true;
            for (const auto& r : mdp.choices[s]) {
                bool any = false;
                for (auto [t, p] : r.targets)
                    if (p > 0.0 && in[t]) { any = true; break; }
                if (!any) { all = false; break; }
            }
            if (all && !mdp.choices[s].empty()) {
                in[s] = true;
                changed = true;
            }
        }
    }
    return in;
}

// States with Pr^min(reach goal) = 1: complement of "can reach, while
// avoiding goal, an end component that itself avoids goal".
std::vector<bool> min_one_states(const Mdp& mdp, const std::vector<bool>& goal) {
    const int n = mdp.num_states;
    // Sub-MDP on non-goal states, keeping only actions that stay out of goal.
    // Iterated SCC refinement marks the states lying in end components of it.
    std::vector<bool> alive(n, false);
    std::vector<std::vector<int>> acts(n); // positions into choices[s] still usable
    for (int s = 0; s < n; ++s) {
        if (goal[s]) continue;
        alive[s] = true;
        for (std::size_t i = 0; i < mdp.choices[s].size(); ++i) {
            bool stays = true;
            for (auto [t, p] : mdp.choices[s][i].targets)
                if (p > 0.0 && goal[t]) { stays = false; break; }
            if (stays) acts[s].push_back(static_cast<int>(i));
        }
    }
    bool changed = true;
    std::vector<int> comp(n, -1);
    while (changed) {
        changed = false;
        // Tarjan-free SCC via Kosaraju on the alive subgraph.
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
        std::vector<char> seen(n, 0);
        for (int s = 0; s < n; ++s) {
            if (!alive[s] || seen[s]) continue;
            // iterative DFS, postorder
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
        std::fill(comp.begin(), comp.end(), -1);
        int ncomp = 0;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if (comp[*it] != -1) continue;
            std::deque<int> queue{*it};
            comp[*it] = ncomp;
            while (!queue.empty()) {
                int u = queue.front();
                queue.pop_front();
                for (int v : bwd[u])
                    if (comp[v] == -1) {
                        comp[v] = ncomp;
                        queue.push_back(v);
                    }
            }
            ++ncomp;
        }
        // Drop actions leaving their SCC, then states with no actions left.
        for (int s = 0; s < n; ++s) {
            if (!alive[s]) continue;
            auto& a = acts[s];
            std::size_t before = a.size();
            a.erase(std::remove_if(a.begin(), a.end(),
                                   [&](int i) {
                                       for (auto [t, p] : mdp.choices[s][i].targets)
                                           if (p > 0.0 && (!alive[t] || comp[t] != comp[s]))
                                               return true;
                                       return false;
                                   }),
                    a.end());
            if (a.size() != before) changed = true;
            if (a.empty()) {
                alive[s] = false;
                changed = true;
            }
        }
    }
    // alive == states inside goal-avoiding end components. Everything able to
    // reach them through non-goal states has Pr^min < 1.
    std::vector<std::vector<int>> pred(n);
    for (int s = 0; s < n; ++s) {
        if (goal[s]) continue;
        for (const auto& r : mdp.choices[s])
            for (auto [t, p] : r.targets)
                if (p > 0.0 && !goal[t]) pred[t].push_back(s);
    }
    std::vector<bool> below_one(n, false);
    std::deque<int> queue;
    for (int s = 0; s < n; ++s)
        if (alive[s]) {
            below_one[s] = true;
            queue.push_back(s);
        }
    while (!queue.empty()) {
        int t = queue.front();
        queue.pop_front();
        for (int s : pred[t])
            if (!below_one[s]) {
                below_one[s] = true;
                queue.push_back(s);
            }
    }
    std::vector<bool> one(n, false);
    for (int s = 0; s < n; ++s) one[s] = !below_one[s];
    return one;
}

} // namespace

std::vector<double> reachability_probabilities(const Mdp& mdp, Mode mode,
                                               const std::set<int>& goal_states) {
    if (goal_states.empty()) throw ValidationError("goal state set is empty");
    const int n = mdp.num_states;
    std::vector<bool> goal(n, false);
    for (int s : goal_states) {
        if (s < 0 || s >= n) throw ValidationError("goal state out of range");
        goal[s] = true;
    }

    std::vector<double> value(n, 0.0);
    std::vector<bool> fixed(n, false);

    if (mode == Mode::Max) {
        auto reaches = states_reaching(mdp, goal_states);
        for (int s = 0; s < n; ++s)
            if (!reaches[s]) fixed[s] = true; // value 0
    } else {
        auto positive = min_positive_states(mdp, goal);
        for (int s = 0; s < n; ++s)
            if (!positive[s]) fixed[s] = true; // value 0
        auto one = min_one_states(mdp, goal);
        for (int s = 0; s < n; ++s)
            if (one[s]) {
                fixed[s] = true;
                value[s] = 1.0;
            }
    }
    for (int s = 0; s < n; ++s)
        if (goal[s]) {
            fixed[s] = true;
            value[s] = 1.0;
        }

    std::vector<double> next(value);
    for (int sweep = 0; sweep < kViMaxSweeps; ++sweep) {
        double delta = 0.0;
        for (int s = 0; s < n; ++s) {
            if (fixed[s]) continue;
            double best = mode == Mode::Min ? 2.0 : -1.0;
            for (const auto& r : mdp.choices[s]) {
                double q = 0.0;
                for (auto [t, p] : r.targets) q += p * value[t];
                best = mode == Mode::Min ? std::min(best, q) : std::max(best, q);
            }
            next[s] = best;
            delta = std::max(delta, std::abs(best - value[s]));
        }
        value.swap(next);
        if (delta < kViStopTolerance) break;
    }
    return value;
}

namespace {

bool is_absorbing_self_loop(const Mdp& mdp, int s, const ActionRow& r) {
    (void)mdp;
    return r.targets.size() == 1 && r.targets[0].first == s && r.targets[0].second >= 1.0 - 1e-12;
}

std::string node_color(const Mdp& mdp, int s, const std::map<std::string, std::string>& colors) {
    for (const auto& [label, color] : colors) {
        auto it = mdp.labels.find(label);
        if (it != mdp.labels.end() && it->second.count(s)) return color;
    }
    return "";
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

std::string export_dot(const Mdp& mdp, const std::optional<std::set<int>>& subsystem_mask,
                       const std::optional<std::vector<double>>& certificate_values,
                       const std::map<std::string, std::string>& label_colors) {
    const int n = mdp.num_states;
    const int interior = std::max(0, n - 2);

    bool values_on_states = false;
    StateActionIndex index;
    if (certificate_values) {
        index = make_state_action_index(mdp, interior);
        const int len = static_cast<int>(certificate_values->size());
        if (len == interior)
            values_on_states = true;
        else if (len == index.rows())
            values_on_states = false;
        else
            throw DimensionError("certificate values have length " + std::to_string(len) +
                                 "; model has " + std::to_string(index.rows()) +
                                 " state-action rows, " + std::to_string(interior) + " states");
    }

    auto in_mask = [&](int s) { return !subsystem_mask || subsystem_mask->count(s) > 0; };
    if (subsystem_mask)
        for (int s : *subsystem_mask)
            if (s < 0 || s >= n) throw ValidationError("subsystem mask state out of range");

    std::ostringstream out;
    out << "digraph model {\n  rankdir=LR;\n  node [shape=circle, style=filled, "
           "fillcolor=white];\n";

    std::vector<std::vector<std::string>> labels_of(n);
    for (const auto& [name, states] : mdp.labels)
        for (int s : states) labels_of[s].push_back(name);

    for (int s = 0; s < n; ++s) {
        out << "  s" << s << " [label=\"" << s;
        for (const auto& l : labels_of[s]) out << "\\n" << l;
        if (certificate_values && values_on_states && s < interior)
            out << "\\n" << format_value((*certificate_values)[s]);
        out << '"';
        if (!in_mask(s)) {
            out << ", fillcolor=gray90, fontcolor=gray60, color=gray60";
        } else {
            auto color = node_color(mdp, s, label_colors);
            if (!color.empty()) out << ", fillcolor=" << color;
        }
        out << "];\n";
    }

    const bool direct_edges = mdp.dtmc;
    for (int s = 0; s < n; ++s) {
        for (const auto& r : mdp.choices[s]) {
            if (is_absorbing_self_loop(mdp, s, r)) continue;
            const char* edge_style = in_mask(s) ? "" : ", color=gray80, fontcolor=gray60";
            if (direct_edges) {
                std::string value;
                if (certificate_values && !values_on_states)
                    value = " | " + format_value((*certificate_values)[index.row(s, r.action)]);
                for (auto [t, p] : r.targets)
                    out << "  s" << s << " -> s" << t << " [label=\"" << format_value(p) << value
                        << '"' << edge_style << "];\n";
            } else {
                std::string choice = "s" + std::to_string(s) + "a" + std::to_string(r.action);
                out << "  " << choice << " [shape=point";
                if (certificate_values && !values_on_states && s < interior)
                    out << ", xlabel=\""
                        << format_value((*certificate_values)[index.row(s, r.action)]) << '"';
                out << "];\n";
                out << "  s" << s << " -> " << choice << " [label=\"a" << r.action << '"'
                    << edge_style << "];\n";
                for (auto [t, p] : r.targets)
                    out << "  " << choice << " -> s" << t << " [label=\"" << format_value(p) << '"'
                        << edge_style << "];\n";
            }
        }
    }
    out << "}\n";
    return out.str();
}

} // namespace witness::model
