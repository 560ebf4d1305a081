#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "witness/model.hpp"

using namespace witness;
using namespace witness::tests;
using model::Mdp;
using model::Mode;

TEST_CASE("parse D1 fixture") {
    Mdp mdp = d1();
    CHECK(mdp.num_states == 4);
    CHECK(mdp.dtmc);
    CHECK(mdp.num_choice_rows() == 4);
    CHECK(mdp.initial == 0);
    CHECK(mdp.labels.at("goal") == std::set<int>{2});
    CHECK(mdp.row(1, 0).targets.size() == 2);
}

TEST_CASE("parse MDP rows with a shared enabled pair") {
    const char* tra = "4 4 5\n0 1 2 0.5\n0 1 3 0.5\n1 0 1 1.0\n2 0 2 1.0\n3 0 3 1.0\n";
    Mdp mdp = model::parse_model(tra, "0=\"init\"\n0: 0\n");
    CHECK_FALSE(mdp.dtmc);
    CHECK(mdp.choices[0].size() == 1);
    CHECK(mdp.row(0, 1).targets.size() == 2);
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(model::parse_model("2 1 1\n0 0 1 0.6\n", ""), ValidationError); // row sum
    CHECK_THROWS_AS(model::parse_model("2 2\n0 1 1.0\n1 0 x\n", ""), SyntaxError);
    CHECK_THROWS_AS(model::parse_model("2 2\n0 1 1.0\n0 0 0.5\n", ""), ValidationError);
    CHECK_THROWS_AS(model::parse_model("2 1\n0 1 1.0\n", ""), ValidationError); // state 1 bare
    CHECK_THROWS_AS(model::parse_model("1 1\n0 0 -1.0\n", ""), ValidationError);
    CHECK_THROWS_AS(model::parse_model("1 2\n0 0 1.0\n", ""), SyntaxError); // count mismatch
    // .lab referencing an out-of-range state / an undeclared id
    CHECK_THROWS_AS(model::parse_model("1 1\n0 0 1.0\n", "0=\"init\"\n7: 0\n"), ValidationError);
    CHECK_THROWS_AS(model::parse_model("1 1\n0 0 1.0\n", "0=\"init\"\n0: 3\n"), SyntaxError);
    try {
        model::parse_model("2 2\n0 1 1.0\nbroken line here\n", "");
        CHECK(false);
    } catch (const SyntaxError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("serialization round-trip is isomorphic") {
    std::mt19937_64 rng(test_seed(11));
    for (int i = 0; i < 25; ++i) {
        Mdp mdp = random_model(rng, 2 + static_cast<int>(rng() % 12), 3, i % 2 == 0);
        Mdp back = model::parse_model(model::serialize_tra(mdp), model::serialize_lab(mdp));
        REQUIRE(back.num_states == mdp.num_states);
        REQUIRE(back.dtmc == mdp.dtmc);
        REQUIRE(back.labels == mdp.labels);
        REQUIRE(back.num_choice_rows() == mdp.num_choice_rows());
        for (int s = 0; s < mdp.num_states; ++s) {
            REQUIRE(back.choices[s].size() == mdp.choices[s].size());
            for (std::size_t a = 0; a < mdp.choices[s].size(); ++a) {
                const auto& ra = mdp.choices[s][a];
                const auto& rb = back.choices[s][a];
                REQUIRE(ra.action == rb.action);
                REQUIRE(ra.targets == rb.targets);
            }
        }
        REQUIRE(model::digest(back) == model::digest(mdp));
    }
}

TEST_CASE("reachability probabilities on the fixtures") {
    Mdp a = d1();
    auto v_min = model::reachability_probabilities(a, Mode::Min, {2});
    auto v_max = model::reachability_probabilities(a, Mode::Max, {2});
    CHECK(v_min[0] == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(v_min[1] == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(v_max[0] == doctest::Approx(0.7).epsilon(1e-8));

    Mdp b = m1();
    CHECK(model::reachability_probabilities(b, Mode::Max, {1})[0] ==
          doctest::Approx(0.6).epsilon(1e-8));
    CHECK(model::reachability_probabilities(b, Mode::Min, {1})[0] ==
          doctest::Approx(0.3).epsilon(1e-8));

    std::set<int> all{0, 1, 2, 3};
    for (double v : model::reachability_probabilities(a, Mode::Min, all))
        CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("value iteration agrees with scheduler enumeration on small models") {
    std::mt19937_64 rng(test_seed(13));
    for (int i = 0; i < 20; ++i) {
        Mdp mdp = random_model(rng, 2 + static_cast<int>(rng() % 4), 2, false);
        auto [lo, hi] = scheduler_enum_reach(mdp, {mdp.num_states - 2});
        auto v_min = model::reachability_probabilities(mdp, Mode::Min, {mdp.num_states - 2});
        auto v_max = model::reachability_probabilities(mdp, Mode::Max, {mdp.num_states - 2});
        for (int s = 0; s < mdp.num_states; ++s) {
            REQUIRE(v_min[s] == doctest::Approx(lo[s]).epsilon(1e-7));
            REQUIRE(v_max[s] == doctest::Approx(hi[s]).epsilon(1e-7));
        }
    }
}

TEST_CASE("value iteration satisfies the Bellman equations") {
    std::mt19937_64 rng(test_seed(17));
    for (int i = 0; i < 10; ++i) {
        Mdp mdp = random_model(rng, 3 + static_cast<int>(rng() % 20), 3, false);
        std::set<int> goals{mdp.num_states - 2};
        for (Mode mode : {Mode::Min, Mode::Max}) {
            auto v = model::reachability_probabilities(mdp, mode, goals);
            auto zero_set = mode == Mode::Max
                                ? model::states_reaching(mdp, goals)
                                : std::vector<bool>(); // min zeros handled below
            for (int s = 0; s < mdp.num_states; ++s) {
                if (goals.count(s)) continue;
                if (v[s] == 0.0 || v[s] == 1.0) continue; // fixed by preprocessing
                double best = mode == Mode::Min ? 2.0 : -1.0;
                for (const auto& r : mdp.choices[s]) {
                    double q = 0.0;
                    for (auto [t, p] : r.targets) q += p * v[t];
                    best = mode == Mode::Min ? std::min(best, q) : std::max(best, q);
                }
                REQUIRE(std::abs(v[s] - best) < 1e-7);
            }
        }
    }
}

TEST_CASE("enlarging the goal set never decreases probabilities") {
    std::mt19937_64 rng(test_seed(19));
    for (int i = 0; i < 10; ++i) {
        Mdp mdp = random_model(rng, 3 + static_cast<int>(rng() % 10), 3, false);
        std::set<int> goals{mdp.num_states - 2};
        std::set<int> larger{mdp.num_states - 2, static_cast<int>(rng() % mdp.num_states)};
        for (Mode mode : {Mode::Min, Mode::Max}) {
            auto v = model::reachability_probabilities(mdp, mode, goals);
            auto w = model::reachability_probabilities(mdp, mode, larger);
            for (int s = 0; s < mdp.num_states; ++s) REQUIRE(w[s] >= v[s] - 1e-9);
        }
    }
}

TEST_CASE("DTMC min and max coincide") {
    std::mt19937_64 rng(test_seed(23));
    for (int i = 0; i < 15; ++i) {
        Mdp mdp = random_model(rng, 3 + static_cast<int>(rng() % 20), 1, true);
        auto v_min = model::reachability_probabilities(mdp, Mode::Min, {mdp.num_states - 2});
        auto v_max = model::reachability_probabilities(mdp, Mode::Max, {mdp.num_states - 2});
        for (int s = 0; s < mdp.num_states; ++s)
            REQUIRE(std::abs(v_min[s] - v_max[s]) <= 2e-8);
    }
}

TEST_CASE("dot export of D1") {
    Mdp mdp = d1();
    std::string dot = model::export_dot(mdp);
    CHECK(dot == model::export_dot(mdp)); // deterministic
    for (int s = 0; s < 4; ++s)
        CHECK(dot.find("s" + std::to_string(s) + " [") != std::string::npos);
    std::size_t edges = 0;
    for (std::size_t at = dot.find("->"); at != std::string::npos; at = dot.find("->", at + 1))
        ++edges;
    CHECK(edges == 3); // absorbing self-loops are not drawn

    std::set<int> mask{0, 1, 2};
    std::string masked = model::export_dot(mdp, mask, std::vector<double>{0.7, 0.7});
    CHECK(masked.find("0.7") != std::string::npos);
    CHECK(masked.find("fillcolor=gray90") != std::string::npos);
    CHECK(masked.find("s3 [") < masked.find("fillcolor=gray90") + masked.size());
}

TEST_CASE("dot export rejects mismatched certificate lengths") {
    Mdp mdp = m1();
    CHECK_THROWS_AS(model::export_dot(mdp, std::nullopt, std::vector<double>{1, 2, 3}),
                    DimensionError);
    // M1 has one interior state and two interior rows.
    CHECK_NOTHROW(model::export_dot(mdp, std::nullopt, std::vector<double>{1.0}));
    CHECK_NOTHROW(model::export_dot(mdp, std::nullopt, std::vector<double>{1.0, 2.0}));
    std::string dot = model::export_dot(mdp);
    CHECK(dot.find("shape=point") != std::string::npos);
}

TEST_CASE("digest separates models") {
    CHECK(model::digest(d1()) != model::digest(m1()));
    CHECK(model::digest(d1()) == model::digest(d1()));
}
