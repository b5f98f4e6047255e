#include "abmtk/demos.hpp"

namespace abmtk {

namespace {

// Two agents race to raise a flag; whoever moves first in a step blocks the
// other for good. Small enough to enumerate exactly: the only final states
// are one-flag-up (63/64) and nobody-up (1/64).
const char* kRaceModel = R"(model race

agent Flag
  var up : bool = false
  rule raise: when not up and all(neigh.up = false) and bernoulli(0.5) -> up := true
end

population
  Flag = 2
end

topology
  complete
end

schedule
  order async-random
  horizon 3
end
)";

const char* kRacePatterns = R"(macro ups = count-where(up = true)

sst lit
  Flag.up = true
end

set raised
  rules raise
  from up = false
  to up = true
end

cet none-up
  implicit ups final = 0
end

cet one-up
  implicit ups final = 1
end

cet all-up
  implicit ups final = 2
end
)";

const char* kCoinModel = R"(model coin

agent Coin
  var face : bool = false
  rule toss: when not face and bernoulli(p) -> face := true
end

population
  Coin = 1
end

topology
  complete
end

schedule
  order synchronous
  horizon 1
end

params
  p : dec[0,1]@2 = 0.5
end
)";

const char* kCoinPatterns = R"(macro heads = proportion-where(face)

cet flag
  implicit heads final >= 1
end
)";

// Spouses reference each other through id-valued variables (0 = no spouse).
// The pair pattern instantiates once per couple whose references agree both
// ways; a one-sided or dangling reference contributes nothing.
const char* kMarriageModel = R"(model marriage

agent Person
  var agentID : int[0, 9] = index + 1
  var husbID : int[0, 9] = 0
  var wifeID : int[0, 9] = 0
end

population
  Person = 5
end

topology
  complete
end

schedule
  order synchronous
  horizon 1
end
)";

const char* kMarriagePatterns = R"(sst married-pair
  compose
    Person@hb.wifeID not-null as $w
    Person@wf.husbID not-null as $h
    Person@hb.agentID = $h
    Person@wf.agentID = $w
  end
end
)";

// A theft moves two variables at once: the stash grows and suspicion rises.
// The joint event pattern and its two single-variable coarsenings describe
// the same happenings at three levels of detail.
const char* kTheftModel = R"(model theft

agent Trader
  var goods : int[0, 9] = 0
  var suspicion : int[0, 9] = 0
  rule steal: when goods < 9 and suspicion < 9 and bernoulli(0.4) -> goods := goods + 1, suspicion := suspicion + 1
  rule fence: when goods > 0 and bernoulli(0.3) -> goods := goods - 1
end

population
  Trader = 3
end

topology
  complete
end

schedule
  order async-random
  horizon 4
end
)";

const char* kTheftPatterns = R"(set stole
  rules steal
  from
    goods in [0, 8]
    suspicion in [0, 8]
  end
  to
    goods in [1, 9]
    suspicion in [1, 9]
  end
end

set stole-goods
  rules steal
  from goods in [0, 8]
  to goods in [1, 9]
end

set stole-watched
  rules steal
  from suspicion in [0, 8]
  to suspicion in [1, 9]
end

cet spree
  seq within 3
    stole
    stole
    stole
  end
end
)";

// Run-level association flips sign across the threshold parameter: v copies
// u below it and mirrors u above it. The stock example for sweep, check and
// partition walkthroughs.
const char* kFlipModel = R"(model flip

agent P
  var u : int[0,3] = random
  var v : int[0,3] = 0
  rule align: when p < 0.5 -> v := u
  rule oppose: when p >= 0.5 -> v := 3 - u
end

population
  P = 5
end

topology
  complete
end

schedule
  order synchronous
  horizon 1
end

params
  p : dec[0,1]@1 = 0.5
end
)";

const char* kFlipPatterns = R"(macro mu = mean(u)
macro mv = mean(v)

sst lifted
  P.v in [1, 3]
end
)";

// Contact process on a 5x5 lattice: discontent cells adopt the spreading
// colour at rate intol, so local homogeneity rises with intolerance. The
// seg macro is the share of cells whose whole neighbourhood matches them.
const char* kSegregationModel = R"(model segregation

agent Cell
  var color : bool = random
  rule adopt: when not color and any(neigh.color = true) and bernoulli(intol) -> color := true
end

population
  Cell = 25
end

topology
  grid 5 5 vonNeumann
end

schedule
  order async-random
  horizon 6
end

params
  intol : dec[0,1]@2 = 0.5
end
)";

const char* kSegregationPatterns = R"(macro seg = proportion-where(all(neigh.color = color))

cet segregated
  implicit seg final >= 0.6
end
)";

} // namespace

const std::vector<Demo>& demo_models() {
    static const std::vector<Demo> demos = {
        {"race", "two agents race to raise a flag; enumerable exactly", kRaceModel, kRacePatterns},
        {"coin", "one biased coin; the flag pattern occurs at exactly p", kCoinModel,
         kCoinPatterns},
        {"marriage", "mutual-reference pair matching over five people", kMarriageModel,
         kMarriagePatterns},
        {"theft", "two-variable events seen at three levels of detail", kTheftModel,
         kTheftPatterns},
        {"flip", "association between two means flips sign across a threshold", kFlipModel,
         kFlipPatterns},
        {"segregation", "lattice contact process; homogeneity rises with intolerance",
         kSegregationModel, kSegregationPatterns},
    };
    return demos;
}

const Demo* find_demo(const std::string& name) {
    for (const Demo& d : demo_models())
        if (d.name == name) return &d;
    return nullptr;
}

} // namespace abmtk
