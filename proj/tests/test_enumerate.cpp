#include "doctest.h"

#include "abmtk/enumerate.hpp"
#include "abmtk/model_parser.hpp"

using namespace abmtk;

namespace {

ModelSpec model_ok(const std::string& text) {
    Diagnostics diags;
    auto spec = parse_model(text, diags);
    REQUIRE_MESSAGE(spec, format_diagnostics(diags));
    Diagnostics sem = validate_model(*spec);
    REQUIRE_MESSAGE(sem.empty(), format_diagnostics(sem));
    return *spec;
}

Rational total_weight(const EnumerationResult& r) {
    Rational sum(0);
    for (const auto& sys : r.systems) sum = sum + sys.weight;
    return sum;
}

// Two agents racing to act first under async-random order; whoever acts
// suppresses the other. Horizon 2 so late orderings collapse into the same
// event sequence and exercise dedup.
const char* kRace = R"(model race
agent P
  var act : bool = false
  rule go: when not any(neigh.act = true) -> act := true
end
population
  P = 2
end
topology
  complete
end
schedule
  order async-random
  horizon 2
end
)";

std::string coin_model(const std::string& p) {
    return "model coin\n"
           "agent C\n"
           "  var heads : bool = false\n"
           "  rule toss: when bernoulli(" + p + ") -> heads := true\n"
           "end\n"
           "population\n  C = 1\nend\n"
           "topology\n  complete\nend\n"
           "schedule\n  order synchronous\n  horizon 1\nend\n";
}

} // namespace

TEST_CASE("random initializers enumerate one system per initial state") {
    ModelSpec spec = model_ok(R"(model inits
agent A
  var x : int[0,2] = random
  rule bump: when x < 2 -> x := x + 1
end
population
  A = 1
end
topology
  complete
end
schedule
  order synchronous
  horizon 1
end
)");
    Layout lay = build_layout(spec);
    EnumerationResult r = enumerate_systems(spec, lay, {}, 1, 100);

    CHECK(r.executions == 3);
    REQUIRE(r.systems.size() == 3);
    for (const auto& sys : r.systems) CHECK(sys.weight == Rational(1, 3));
    CHECK(total_weight(r) == Rational(1));

    // Depth-first order starts at the lowest domain value.
    CHECK(r.systems[0].trace.initial.get(0, 0) == Value::of_int(0));
    CHECK(r.systems[0].trace.events.size() == 1);
    CHECK(r.systems[2].trace.initial.get(0, 0) == Value::of_int(2));
    CHECK(r.systems[2].trace.events.empty());
}

TEST_CASE("async-random orderings are enumerated and merged when traces agree") {
    ModelSpec spec = model_ok(kRace);
    Layout lay = build_layout(spec);
    EnumerationResult r = enumerate_systems(spec, lay, {}, 2, 100);

    // Two orderings per step: four paths, but the step 2 order never shows
    // once one agent holds the floor.
    CHECK(r.executions == 4);
    REQUIRE(r.systems.size() == 2);
    for (const auto& sys : r.systems) {
        CHECK(sys.weight == Rational(1, 2));
        REQUIRE(sys.trace.events.size() == 2);
        CHECK(sys.trace.events[0].instance == sys.trace.events[1].instance);
    }
    CHECK(r.systems[0].trace.events[0].instance != r.systems[1].trace.events[0].instance);
    CHECK(total_weight(r) == Rational(1));
}

TEST_CASE("bernoulli conditions branch on both outcomes with exact weights") {
    ModelSpec spec = model_ok(coin_model("0.25"));
    Layout lay = build_layout(spec);
    EnumerationResult r = enumerate_systems(spec, lay, {}, 1, 100);

    CHECK(r.executions == 2);
    REQUIRE(r.systems.size() == 2);
    CHECK(r.systems[0].trace.events.empty());
    CHECK(r.systems[0].weight == Rational(3, 4));
    CHECK(r.systems[1].trace.events.size() == 1);
    CHECK(r.systems[1].weight == Rational(1, 4));
    CHECK(total_weight(r) == Rational(1));
}

TEST_CASE("degenerate bernoulli probabilities do not branch") {
    ModelSpec sure = model_ok(coin_model("1.0"));
    Layout lay = build_layout(sure);
    EnumerationResult r = enumerate_systems(sure, lay, {}, 1, 100);
    CHECK(r.executions == 1);
    REQUIRE(r.systems.size() == 1);
    CHECK(r.systems[0].weight == Rational(1));
    CHECK(r.systems[0].trace.events.size() == 1);

    ModelSpec never = model_ok(coin_model("0.0"));
    EnumerationResult n = enumerate_systems(never, build_layout(never), {}, 1, 100);
    CHECK(n.executions == 1);
    REQUIRE(n.systems.size() == 1);
    CHECK(n.systems[0].trace.events.empty());
}

TEST_CASE("free parameters form a uniform leading axis") {
    ModelSpec spec = model_ok(R"(model paramed
agent A
  var x : int[0,3] = 0
  rule set: when x < k -> x := k
end
population
  A = 1
end
topology
  complete
end
schedule
  order synchronous
  horizon 1
end
params
  k : int[1,3] = free
end
)");
    Layout lay = build_layout(spec);

    EnumerationResult r = enumerate_systems(spec, lay, {}, 1, 100);
    CHECK(r.executions == 3);
    REQUIRE(r.systems.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(r.systems[i].weight == Rational(1, 3));
        CHECK(r.systems[i].params.at("k") == Value::of_int(i + 1));
        REQUIRE(r.systems[i].trace.events.size() == 1);
        CHECK(r.systems[i].trace.events[0].target[0].second == Value::of_int(i + 1));
    }
    CHECK(total_weight(r) == Rational(1));

    // An override pins the axis down to a single configuration.
    EnumerationResult one = enumerate_systems(spec, lay, {{"k", Value::of_int(2)}}, 1, 100);
    CHECK(one.executions == 1);
    REQUIRE(one.systems.size() == 1);
    CHECK(one.systems[0].weight == Rational(1));
    CHECK(one.systems[0].params.at("k") == Value::of_int(2));

    CHECK_THROWS_AS(enumerate_systems(spec, lay, {{"zz", Value::of_int(1)}}, 1, 100),
                    RuntimeError);
    CHECK_THROWS_AS(enumerate_systems(spec, lay, {{"k", Value::of_int(9)}}, 1, 100),
                    RuntimeError);
}

TEST_CASE("the static path bound trips before any execution") {
    ModelSpec spec = model_ok(R"(model wide
agent A
  var x : bool = false
  rule go: when p > 0.5 -> x := true
end
population
  A = 1
end
topology
  complete
end
schedule
  order synchronous
  horizon 1
end
params
  p : dec[0,1]@2 = free
end
)");
    Layout lay = build_layout(spec);

    CHECK_THROWS_WITH_AS(enumerate_systems(spec, lay, {}, 1, 50),
                         "enumeration needs at least 101 executions, over the bound of 50",
                         RuntimeError);

    // Configurations stay distinct even when their event sequences match.
    EnumerationResult r = enumerate_systems(spec, lay, {}, 1, 101);
    CHECK(r.executions == 101);
    CHECK(r.systems.size() == 101);
    CHECK(total_weight(r) == Rational(1));
}

TEST_CASE("the dynamic path bound trips on bernoulli explosion") {
    // Static accounting sees a single path here; the five flips only show
    // up while walking.
    ModelSpec spec = model_ok(R"(model burst
agent C
  var heads : bool = false
  rule toss: when bernoulli(0.5) -> heads := true
end
population
  C = 1
end
topology
  complete
end
schedule
  order synchronous
  horizon 5
end
)");
    Layout lay = build_layout(spec);

    CHECK_THROWS_AS(enumerate_systems(spec, lay, {}, 5, 10), RuntimeError);
    EnumerationResult r = enumerate_systems(spec, lay, {}, 5, 32);
    CHECK(r.executions == 32);
    CHECK(r.systems.size() == 32); // every firing pattern is a distinct event sequence
    CHECK(total_weight(r) == Rational(1));
}

TEST_CASE("sampled traces always appear among enumerated systems") {
    const std::vector<std::string> fixtures{kRace, coin_model("0.5")};
    for (const std::string& text : fixtures) {
        ModelSpec spec = model_ok(text);
        Layout lay = build_layout(spec);
        EnumerationResult r = enumerate_systems(spec, lay, {}, spec.horizon, 1000);

        for (uint64_t seed : {1u, 42u, 999u}) {
            Trace sampled = run_model(spec, lay, {}, seed, spec.horizon);
            sampled.seed = 0; // enumerated traces carry no seed
            std::string key = serialize_trace(spec, lay, sampled);
            bool found = false;
            for (const auto& sys : r.systems)
                found |= serialize_trace(spec, lay, sys.trace) == key;
            CHECK_MESSAGE(found, "seed ", seed, " trace missing from enumeration");
        }
    }
}
