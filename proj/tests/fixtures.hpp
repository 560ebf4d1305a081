#pragma once

#include "witness/reachform.hpp"

namespace witness::tests {

// Four-state chain: s0 -> s1 -> {goal: 0.7, fail: 0.3}; both sinks absorbing.
// Reachability probability from s0 is 0.7 under either mode.
inline const char* kD1Tra = "4 5\n0 1 1.0\n1 2 0.7\n1 3 0.3\n2 2 1.0\n3 3 1.0\n";
inline const char* kD1Lab = "0=\"init\" 1=\"goal\"\n0: 0\n2: 1\n";

// One controlled state with two actions: a hits goal with 0.3, b with 0.6.
inline const char* kM1Tra =
    "3 4 6\n0 0 1 0.3\n0 0 2 0.7\n0 1 1 0.6\n0 1 2 0.4\n1 0 1 1.0\n2 0 2 1.0\n";
inline const char* kM1Lab = "0=\"init\" 1=\"goal\"\n0: 0\n1: 1\n";

inline model::Mdp d1() { return model::parse_model(kD1Tra, kD1Lab); }
inline model::Mdp m1() { return model::parse_model(kM1Tra, kM1Lab); }

inline reachform::ReachabilityForm d1_rf() { return reachform::reduce(d1(), "init", "goal").first; }
inline reachform::ReachabilityForm m1_rf() { return reachform::reduce(m1(), "init", "goal").first; }

} // namespace witness::tests
