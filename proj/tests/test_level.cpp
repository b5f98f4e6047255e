#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "abmtk/level.hpp"
#include "abmtk/model_parser.hpp"
#include "abmtk/rng.hpp"

using namespace abmtk;
using doctest::Approx;

namespace {

ModelSpec model_ok(const std::string& text) {
    Diagnostics diags;
    auto spec = parse_model(text, diags);
    REQUIRE_MESSAGE(spec, format_diagnostics(diags));
    Diagnostics sem = validate_model(*spec);
    REQUIRE_MESSAGE(sem.empty(), format_diagnostics(sem));
    return *spec;
}

// Five agents draw u at random; v copies u below the threshold and mirrors
// it above, so the run-level association between the two means flips sign
// with p.
const char* kFlip = R"(model flip
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

InterLevelModel flip_model(double floor = 0.5) {
    InterLevelModel m;
    m.name = "flip-assoc";
    m.nodes = {MeasurementVariable::macro_at("x", "mu", 1),
               MeasurementVariable::macro_at("y", "mv", 1)};
    Edge e;
    e.from = "x";
    e.to = "y";
    e.sign = +1;
    e.min_strength = floor;
    e.directed = true;
    m.edges = {e};
    return m;
}

SamplingPlan plan_of(long long runs, int horizon, uint64_t seed) {
    SamplingPlan plan;
    plan.runs = runs;
    plan.horizon = horizon;
    plan.base_seed = seed;
    return plan;
}

// Shorthand for hand-built matrices: int-valued axes 0..n-1.
CellMatrix int_matrix(const std::vector<std::string>& axes, const std::vector<size_t>& dims) {
    std::vector<std::vector<Value>> values;
    for (size_t d : dims) {
        std::vector<Value> axis;
        for (size_t i = 0; i < d; ++i) axis.push_back(Value::of_int(static_cast<long long>(i)));
        values.push_back(std::move(axis));
    }
    return make_cell_matrix(axes, values);
}

std::vector<std::pair<int, int>> box(std::initializer_list<std::pair<int, int>> b) { return b; }

} // namespace

TEST_CASE("measure pulls the right column shape out of a table") {
    ModelSpec spec = model_ok(kFlip);
    PatternFile pats = parse_patterns_checked(kFlipPatterns, spec);
    SamplingPlan plan = plan_of(8, 1, 5);
    ParamPlan pp;
    pp.name = "p";
    pp.kind = ParamPlan::Kind::Constant;
    pp.constant = Value::of_number(Rational(1, 10));
    plan.params.push_back(pp);
    ClassificationTable table = sample(spec, plan, pats);

    std::vector<double> at = measure(table, MeasurementVariable::macro_at("x", "mu", 1));
    CHECK(at.size() == 8);

    std::vector<double> delta = measure(table, MeasurementVariable::macro_delta("d", "mv", 0, 1));
    REQUIRE(delta.size() == 8);
    // v starts at zero, so the change to step 1 is exactly the step-1 mean.
    std::vector<double> mv1 = measure(table, MeasurementVariable::macro_at("y", "mv", 1));
    for (size_t i = 0; i < delta.size(); ++i) CHECK(delta[i] == mv1[i]);

    std::vector<double> freq = measure(table, MeasurementVariable::frequency("f", "lifted"));
    REQUIRE(freq.size() == 1);
    CHECK(freq[0] == Approx(frequency(table, "lifted").estimate));

    std::vector<double> counts = measure(table, MeasurementVariable::count_at("c", "lifted", 1));
    REQUIRE(counts.size() == 8);
    for (double c : counts) {
        CHECK(c >= 0);
        CHECK(c <= 5);
    }

    CHECK_THROWS_WITH_AS(measure(table, MeasurementVariable::macro_at("x", "ghost", 1)),
                         "table has no macro column 'ghost'", RuntimeError);
    CHECK_THROWS_WITH_AS(measure(table, MeasurementVariable::count_at("c", "ghost", 0)),
                         "table has no pattern column 'ghost'", RuntimeError);
    CHECK_THROWS_WITH_AS(measure(table, MeasurementVariable::macro_at("x", "mu", 2)),
                         "node 'x': step 2 outside the table's steps 0..1", RuntimeError);
    CHECK_THROWS_WITH_AS(measure(table, MeasurementVariable::macro_delta("d", "mu", 1, 1)),
                         "node 'd': empty step window [1, 1]", RuntimeError);
}

TEST_CASE("near-linear data passes a strict positive edge") {
    RandomStream rng(2024);
    std::vector<double> x, y, noise;
    for (int i = 0; i < 100; ++i) {
        double xi = i / 99.0;
        double eps = static_cast<double>(rng.uniform_below(2001)) * 1e-5 - 0.01;
        x.push_back(xi);
        y.push_back(2.0 * xi + eps);
        noise.push_back(static_cast<double>(rng.uniform_below(1000)) / 1000.0);
    }

    InterLevelModel m;
    m.nodes = {MeasurementVariable::macro_at("x", "mu", 0),
               MeasurementVariable::macro_at("y", "mv", 0)};
    Edge e;
    e.from = "x";
    e.to = "y";
    e.sign = +1;
    e.min_strength = 0.99;
    m.edges = {e};

    auto tight = check_inter_level(m, {{"x", x}, {"y", y}});
    REQUIRE(tight.size() == 1);
    CHECK(tight[0].outcome == EdgeVerdict::Outcome::Pass);
    CHECK(tight[0].corr.r >= 0.99);
    CHECK(tight[0].corr.ci.excludes_zero());
    CHECK(tight[0].note == "ok");
    CHECK(!tight[0].association_only);

    auto scattered = check_inter_level(m, {{"x", x}, {"y", noise}});
    CHECK(scattered[0].outcome == EdgeVerdict::Outcome::Fail);
    CHECK(std::fabs(scattered[0].corr.r) < 0.99);

    auto flat = check_inter_level(m, {{"x", x}, {"y", std::vector<double>(100, 5.0)}});
    CHECK(flat[0].outcome == EdgeVerdict::Outcome::Indeterminate);
    CHECK(flat[0].note == "zero variance on at least one side");
}

TEST_CASE("verdicts ignore positive affine rescaling") {
    RandomStream rng(77);
    std::vector<double> x, y, y_scaled;
    for (int i = 0; i < 40; ++i) {
        double xi = static_cast<double>(rng.uniform_below(1000));
        double yi = 3.0 * xi + static_cast<double>(rng.uniform_below(500));
        x.push_back(xi);
        y.push_back(yi);
        y_scaled.push_back(0.001 * yi + 42.0);
    }
    InterLevelModel m;
    m.nodes = {MeasurementVariable::macro_at("x", "a", 0),
               MeasurementVariable::macro_at("y", "b", 0)};
    Edge e;
    e.from = "x";
    e.to = "y";
    e.sign = +1;
    e.min_strength = 0.9;
    m.edges = {e};

    auto raw = check_inter_level(m, {{"x", x}, {"y", y}});
    auto scaled = check_inter_level(m, {{"x", x}, {"y", y_scaled}});
    CHECK(raw[0].outcome == scaled[0].outcome);
    CHECK(raw[0].corr.r == Approx(scaled[0].corr.r).epsilon(1e-12));
}

TEST_CASE("declared-causal edges carry the association-only flag") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y{2, 4, 6, 8, 10};
    InterLevelModel m;
    m.nodes = {MeasurementVariable::macro_at("x", "a", 0),
               MeasurementVariable::macro_at("y", "b", 0)};
    Edge e;
    e.from = "x";
    e.to = "y";
    e.kind = Edge::Kind::DeclaredCausal;
    e.sign = +1;
    e.min_strength = 0.5;
    e.directed = true;
    m.edges = {e};

    auto verdicts = check_inter_level(m, {{"x", x}, {"y", y}});
    CHECK(verdicts[0].outcome == EdgeVerdict::Outcome::Pass);
    CHECK(verdicts[0].association_only);
}

TEST_CASE("rank-based edges see through monotone distortion") {
    std::vector<double> x, y;
    for (int i = 1; i <= 20; ++i) {
        x.push_back(i);
        y.push_back(std::exp(static_cast<double>(i))); // monotone, wildly nonlinear
    }
    InterLevelModel m;
    m.nodes = {MeasurementVariable::macro_at("x", "a", 0),
               MeasurementVariable::macro_at("y", "b", 0)};
    Edge plain;
    plain.from = "x";
    plain.to = "y";
    plain.sign = +1;
    plain.min_strength = 0.95;
    Edge ranked = plain;
    ranked.rank_based = true;
    m.edges = {plain, ranked};

    auto verdicts = check_inter_level(m, {{"x", x}, {"y", y}});
    REQUIRE(verdicts.size() == 2);
    CHECK(verdicts[0].outcome == EdgeVerdict::Outcome::Fail);
    CHECK(verdicts[1].outcome == EdgeVerdict::Outcome::Pass);
    CHECK(verdicts[1].corr.r == Approx(1.0));
}

TEST_CASE("model and vector problems are rejected loudly") {
    std::vector<double> x{1, 2, 3};
    InterLevelModel empty;
    CHECK_THROWS_WITH_AS(check_inter_level(empty, {}), "inter-level model has no nodes",
                         RuntimeError);

    InterLevelModel m;
    m.nodes = {MeasurementVariable::macro_at("x", "a", 0),
               MeasurementVariable::macro_at("y", "b", 0)};
    Edge e;
    e.from = "x";
    e.to = "zed";
    m.edges = {e};
    CHECK_THROWS_WITH_AS(check_inter_level(m, {{"x", x}, {"y", x}}),
                         "edge references unknown node 'zed'", RuntimeError);

    m.edges[0].to = "y";
    m.edges[0].sign = 0;
    CHECK_THROWS_WITH_AS(check_inter_level(m, {{"x", x}, {"y", x}}),
                         "edge x -> y: sign must be +1 or -1", RuntimeError);

    m.edges[0].sign = 1;
    m.edges[0].min_strength = 1.5;
    CHECK_THROWS_WITH_AS(check_inter_level(m, {{"x", x}, {"y", x}}),
                         "edge x -> y: strength floor must lie in [0, 1]", RuntimeError);

    m.edges[0].min_strength = 0.5;
    CHECK_THROWS_WITH_AS(check_inter_level(m, {{"x", x}}),
                         "no measurement vector for node 'y'", RuntimeError);
    CHECK_THROWS_WITH_AS(check_inter_level(m, {{"x", x}, {"y", {1, 2}}}),
                         "measurement vectors differ in length: 'x' has 3, 'y' has 2",
                         RuntimeError);
    CHECK_THROWS_WITH_AS(check_inter_level(m, {{"x", {1, 2}}, {"y", {1, 2}}}),
                         "need at least three observations per node, got 2", RuntimeError);

    m.nodes.push_back(MeasurementVariable::macro_at("x", "c", 0));
    CHECK_THROWS_WITH_AS(check_inter_level(m, {{"x", x}, {"y", x}}), "duplicate node 'x'",
                         RuntimeError);
}

TEST_CASE("a degenerate sweep equals a direct sample and check") {
    ModelSpec spec = model_ok(kFlip);
    PatternFile pats = parse_patterns_checked(kFlipPatterns, spec);
    InterLevelModel model = flip_model();

    CellMatrix matrix = sweep(spec, {{"p", {Value::of_number(Rational(1, 5))}}}, plan_of(10, 1, 9),
                              model, pats);
    REQUIRE(matrix.cells.size() == 1);
    const Cell& cell = matrix.cells[0];
    REQUIRE(cell.error.empty());

    SamplingPlan direct = plan_of(10, 1, derive_run_seed(9, 0));
    ParamPlan pp;
    pp.name = "p";
    pp.kind = ParamPlan::Kind::Constant;
    pp.constant = Value::of_number(Rational(1, 5));
    direct.params.push_back(pp);
    ClassificationTable table = sample(spec, direct, pats);
    auto verdicts = check_inter_level(model, measure_nodes(table, model));

    REQUIRE(cell.verdicts.size() == verdicts.size());
    CHECK(cell.verdicts[0].outcome == verdicts[0].outcome);
    CHECK(cell.verdicts[0].corr.r == verdicts[0].corr.r);
    CHECK(cell.stat == verdicts[0].corr.r);
    REQUIRE(cell.frequencies.size() == 1);
    CHECK(cell.frequencies[0].pattern == "lifted");
}

TEST_CASE("the association flips sign across the parameter sweep") {
    ModelSpec spec = model_ok(kFlip);
    PatternFile pats = parse_patterns_checked(kFlipPatterns, spec);
    InterLevelModel model = flip_model();

    std::vector<Value> ps;
    for (int tenths : {1, 3, 7, 9}) ps.push_back(Value::of_number(Rational(tenths, 10)));
    CellMatrix matrix = sweep(spec, {{"p", ps}}, plan_of(12, 1, 31), model, pats);
    REQUIRE(matrix.cells.size() == 4);

    for (size_t i = 0; i < 4; ++i) {
        const Cell& cell = matrix.cells[i];
        REQUIRE_MESSAGE(cell.error.empty(), cell.error);
        REQUIRE(cell.verdicts.size() == 1);
        // Means copy (or mirror) exactly, so r is +/-1 whenever u varies.
        if (i < 2) {
            CHECK(cell.stat == Approx(1.0));
            CHECK(cell.verdicts[0].outcome == EdgeVerdict::Outcome::Pass);
        } else {
            CHECK(cell.stat == Approx(-1.0));
            CHECK(cell.verdicts[0].outcome == EdgeVerdict::Outcome::Fail);
            CHECK(cell.verdicts[0].note == "sign mismatch");
        }
    }

    // Determinism: the same sweep again produces the same statistics.
    CellMatrix again = sweep(spec, {{"p", ps}}, plan_of(12, 1, 31), model, pats);
    for (size_t i = 0; i < 4; ++i) CHECK(again.cells[i].stat == matrix.cells[i].stat);
}

TEST_CASE("sweep plans are validated before any run") {
    ModelSpec spec = model_ok(kFlip);
    PatternFile pats = parse_patterns_checked(kFlipPatterns, spec);
    InterLevelModel model = flip_model();
    std::vector<Value> ok{Value::of_number(Rational(1, 5))};

    CHECK_THROWS_WITH_AS(sweep(spec, {{"p", ok}}, plan_of(2, 1, 0), model, pats),
                         "per-cell plan needs at least three runs", RuntimeError);
    CHECK_THROWS_WITH_AS(sweep(spec, {{"q", ok}}, plan_of(3, 1, 0), model, pats),
                         "sweep axis 'q' is not declared by the model", RuntimeError);
    CHECK_THROWS_WITH_AS(sweep(spec, {{"p", {}}}, plan_of(3, 1, 0), model, pats),
                         "sweep axis 'p' has no values", RuntimeError);
    CHECK_THROWS_WITH_AS(sweep(spec, {{"p", {Value::of_int(2)}}}, plan_of(3, 1, 0), model, pats),
                         "sweep value 2 for 'p' lies outside dec[0.0,1.0]@1", RuntimeError);
    CHECK_THROWS_WITH_AS(sweep(spec, {{"p", ok}, {"p", ok}}, plan_of(3, 1, 0), model, pats),
                         "sweep axis 'p' appears twice", RuntimeError);

    SamplingPlan clash = plan_of(3, 1, 0);
    ParamPlan pp;
    pp.name = "p";
    pp.kind = ParamPlan::Kind::Constant;
    pp.constant = ok[0];
    clash.params.push_back(pp);
    CHECK_THROWS_WITH_AS(sweep(spec, {{"p", ok}}, clash, model, pats),
                         "parameter 'p' is both swept and planned", RuntimeError);

    InterLevelModel ghost = model;
    ghost.nodes[0] = MeasurementVariable::macro_at("x", "nope", 1);
    CHECK_THROWS_WITH_AS(sweep(spec, {{"p", ok}}, plan_of(3, 1, 0), ghost, pats),
                         "node 'x' references unknown macro 'nope'", RuntimeError);
}

TEST_CASE("flat indexing is a bijection") {
    CellMatrix m = int_matrix({"p", "q", "r"}, {2, 3, 4});
    REQUIRE(m.cells.size() == 24);
    for (size_t i = 0; i < m.cells.size(); ++i) {
        CHECK(m.flat_index(m.cells[i].coords) == i);
        CHECK(m.coords_of(i) == m.cells[i].coords);
    }
    // Last axis fastest: consecutive flats differ in the last coordinate.
    CHECK(m.cells[0].coords == std::vector<int>{0, 0, 0});
    CHECK(m.cells[1].coords == std::vector<int>{0, 0, 1});
    CHECK(m.cells[4].coords == std::vector<int>{0, 1, 0});
}

TEST_CASE("a uniform matrix is one region") {
    CellMatrix m = int_matrix({"p", "q"}, {3, 3});
    for (Cell& c : m.cells) c.stat = 0.7;
    RegionPartition part = partition(m, 0.5);
    REQUIRE(part.regions.size() == 1);
    CHECK(part.regions[0].bounds == box({{0, 2}, {0, 2}}));
    CHECK(part.regions[0].usable == 9);
    CHECK(part.regions[0].stat == Approx(0.7));
    CHECK(part.excluded.empty());
    REQUIRE(part.bands.size() == 2);
    CHECK(part.bands[0].regions == std::vector<size_t>{0});
}

TEST_CASE("tolerance above the total spread keeps the matrix whole") {
    CellMatrix m = int_matrix({"p"}, {5});
    for (size_t i = 0; i < 5; ++i) m.cells[i].stat = 0.1 * static_cast<double>(i);
    RegionPartition part = partition(m, 1.0);
    REQUIRE(part.regions.size() == 1);
    CHECK(part.regions[0].stat == Approx(0.2));
}

TEST_CASE("the three-rectangle layout is recovered with multiple classification") {
    // p1 axis: [a1,a2] = indices 0..1, [a3,a4] = 2..3; p2 likewise with b's.
    CellMatrix m = int_matrix({"p1", "p2"}, {4, 4});
    auto stat_for = [](int i, int j) {
        if (i <= 1 && j <= 1) return 0.0; // M1 = [a1,a2] x [b1,b2]
        if (i <= 1) return 1.0;           // M2 = [a1,a2] x [b3,b4]
        return 2.0;                       // M3 = [a3,a4] x [b1,b4]
    };
    for (Cell& c : m.cells) c.stat = stat_for(c.coords[0], c.coords[1]);

    RegionPartition part = partition(m, 0.2);
    REQUIRE(part.regions.size() == 3);
    CHECK(part.regions[0].bounds == box({{0, 1}, {0, 1}}));
    CHECK(part.regions[1].bounds == box({{0, 1}, {2, 3}}));
    CHECK(part.regions[2].bounds == box({{2, 3}, {0, 3}}));
    CHECK(part.regions[0].stat == Approx(0.0));
    CHECK(part.regions[1].stat == Approx(1.0));
    CHECK(part.regions[2].stat == Approx(2.0));

    // Every cell is covered exactly once.
    std::vector<int> covered(16, 0);
    for (const Region& r : part.regions)
        for (size_t flat : r.cells) covered[flat] += 1;
    CHECK(std::count(covered.begin(), covered.end(), 1) == 16);

    // M1 sits under two parents: the p1 band it shares with M2, and its own
    // p2 band. That is the multiple classification.
    std::vector<const Band*> parents_of_m1;
    for (const Band& b : part.bands)
        if (std::count(b.regions.begin(), b.regions.end(), size_t{0})) parents_of_m1.push_back(&b);
    REQUIRE(parents_of_m1.size() == 2);
    CHECK(parents_of_m1[0]->axis == 0);
    CHECK(parents_of_m1[0]->range == std::pair<int, int>{0, 1});
    CHECK(parents_of_m1[0]->regions == std::vector<size_t>{0, 1}); // shared with M2
    CHECK(parents_of_m1[1]->axis == 1);
    CHECK(parents_of_m1[1]->range == std::pair<int, int>{0, 1});

    std::string report = region_report(m, part);
    CHECK(report.find("4x4 grid over p1, p2: 16 cells, 3 regions, 0 failed") != std::string::npos);
    CHECK(report.find("region 1: p1 in [0, 1], p2 in [0, 1]") != std::string::npos);
    CHECK(report.find("band p1 in [0, 1]: regions 1 2") != std::string::npos);
}

TEST_CASE("failed cells are excluded from statistics but stay covered") {
    CellMatrix m = int_matrix({"p"}, {3});
    m.cells[0].stat = 0.0;
    m.cells[1].error = "boom";
    m.cells[2].stat = 10.0;

    RegionPartition part = partition(m, 1.0);
    REQUIRE(part.regions.size() == 2);
    CHECK(part.regions[0].bounds == box({{0, 0}}));
    CHECK(part.regions[1].bounds == box({{1, 2}}));
    CHECK(part.regions[1].usable == 1);
    CHECK(part.regions[1].stat == Approx(10.0));
    CHECK(part.excluded == std::vector<size_t>{1});

    std::string report = region_report(m, part);
    CHECK(report.find("excluded (1): boom") != std::string::npos);
}

TEST_CASE("partition rejects bad input") {
    CellMatrix m = int_matrix({"p"}, {3});
    CHECK_THROWS_WITH_AS(partition(m, 0.0), "partition tolerance must be positive", RuntimeError);
    CHECK_THROWS_WITH_AS(partition(m, -1.0), "partition tolerance must be positive", RuntimeError);
    m.cells.pop_back();
    CHECK_THROWS_WITH_AS(partition(m, 1.0), "matrix has 2 cells, expected 3", RuntimeError);
}

TEST_CASE("random guillotine layouts are recovered exactly") {
    using BoxT = std::vector<std::pair<int, int>>;
    RandomStream rng(616);

    for (int trial = 0; trial < 12; ++trial) {
        CellMatrix m = int_matrix({"p", "q"}, {6, 5});

        // Carve the grid into rectangles by recursive random cuts.
        std::vector<BoxT> layout;
        std::vector<BoxT> work{box({{0, 5}, {0, 4}})};
        while (!work.empty()) {
            BoxT b = work.back();
            work.pop_back();
            std::vector<size_t> wide;
            for (size_t a = 0; a < b.size(); ++a)
                if (b[a].first < b[a].second) wide.push_back(a);
            bool cut = !wide.empty() && layout.size() + work.size() < 7 &&
                       rng.bernoulli(Rational(2, 3));
            if (!cut) {
                layout.push_back(b);
                continue;
            }
            size_t axis = wide[rng.uniform_below(wide.size())];
            int span = b[axis].second - b[axis].first;
            int k = b[axis].first + static_cast<int>(rng.uniform_below(static_cast<uint64_t>(span)));
            BoxT left = b, right = b;
            left[axis].second = k;
            right[axis].first = k + 1;
            work.push_back(left);
            work.push_back(right);
        }

        // Distinct stats, consecutive values 3.0 apart with tolerance 1.
        for (size_t r = 0; r < layout.size(); ++r)
            for (int i = layout[r][0].first; i <= layout[r][0].second; ++i)
                for (int j = layout[r][1].first; j <= layout[r][1].second; ++j)
                    m.cells[m.flat_index({i, j})].stat = 3.0 * static_cast<double>(r);

        RegionPartition part = partition(m, 1.0);
        std::vector<BoxT> found;
        for (const Region& r : part.regions) found.push_back(r.bounds);
        std::sort(found.begin(), found.end());
        std::sort(layout.begin(), layout.end());
        REQUIRE_MESSAGE(found == layout, "trial " << trial << ": layout of " << layout.size()
                                                  << " regions, found " << found.size());
    }
}

TEST_CASE("cell matrices round-trip through their text form") {
    ModelSpec spec = model_ok(kFlip);
    PatternFile pats = parse_patterns_checked(kFlipPatterns, spec);
    InterLevelModel model = flip_model();
    std::vector<Value> ps{Value::of_number(Rational(1, 10)), Value::of_number(Rational(9, 10))};
    CellMatrix matrix = sweep(spec, {{"p", ps}}, plan_of(8, 1, 11), model, pats);

    std::string text = write_cell_matrix(matrix);
    CellMatrix back = parse_cell_matrix(text);
    CHECK(write_cell_matrix(back) == text);
    REQUIRE(back.axes == matrix.axes);
    REQUIRE(back.cells.size() == matrix.cells.size());
    for (size_t i = 0; i < back.cells.size(); ++i) {
        const Cell& a = matrix.cells[i];
        const Cell& b = back.cells[i];
        CHECK(b.coords == a.coords);
        CHECK(b.error == a.error);
        CHECK(b.stat == a.stat);
        CHECK(b.edge_r == a.edge_r);
        REQUIRE(b.frequencies.size() == a.frequencies.size());
        for (size_t p = 0; p < a.frequencies.size(); ++p) {
            CHECK(b.frequencies[p].pattern == a.frequencies[p].pattern);
            CHECK(b.frequencies[p].matched == a.frequencies[p].matched);
            CHECK(b.frequencies[p].n == a.frequencies[p].n);
            CHECK(b.frequencies[p].estimate == a.frequencies[p].estimate);
            CHECK(b.frequencies[p].ci.lo == a.frequencies[p].ci.lo);
            CHECK(b.frequencies[p].ci.hi == a.frequencies[p].ci.hi);
        }
    }

    // The partition of the reloaded matrix matches the original's.
    RegionPartition pa = partition(matrix, 0.5);
    RegionPartition pb = partition(back, 0.5);
    REQUIRE(pa.regions.size() == pb.regions.size());
    for (size_t r = 0; r < pa.regions.size(); ++r) {
        CHECK(pb.regions[r].bounds == pa.regions[r].bounds);
        CHECK(pb.regions[r].stat == pa.regions[r].stat);
        CHECK(pb.regions[r].edge_stats == pa.regions[r].edge_stats);
    }

    std::string path = "cells_roundtrip.tsv";
    save_cell_matrix_file(matrix, path);
    CellMatrix loaded = load_cell_matrix_file(path);
    std::remove(path.c_str());
    CHECK(write_cell_matrix(loaded) == text);
    CHECK_THROWS_WITH(load_cell_matrix_file("no_such_dir/cells.tsv"),
                      "cannot open cell matrix file: no_such_dir/cells.tsv");
}

TEST_CASE("failed cells keep their empty shape across the text form") {
    CellMatrix m = int_matrix({"p"}, {3});
    for (size_t i = 0; i < 3; ++i) {
        m.cells[i].stat = static_cast<double>(i);
        m.cells[i].edge_r = {0.5};
    }
    m.cells[1].error = "boom";
    m.cells[1].edge_r.clear();

    CellMatrix back = parse_cell_matrix(write_cell_matrix(m));
    CHECK(back.cells[1].error == "boom");
    CHECK(back.cells[1].edge_r.empty());
    CHECK(back.cells[1].frequencies.empty());
    CHECK(back.cells[0].edge_r == std::vector<double>{0.5});

    CHECK_THROWS_WITH_AS(parse_cell_matrix("hello\n"), "not a cell matrix file", RuntimeError);
    CHECK_THROWS_WITH_AS(parse_cell_matrix("# cell-matrix axes=1 cells=3\n# axis p = 0 1 2\n"),
                         "cell matrix row count does not match its meta line", RuntimeError);
    std::string text = write_cell_matrix(m);
    size_t pos = text.find("\ttrue\t\t");
    REQUIRE(pos != std::string::npos);
    std::string flipped = text;
    flipped.replace(pos, 7, "\tfalse\t\t");
    CHECK_THROWS_WITH_AS(parse_cell_matrix(flipped), "ok flag disagrees with error text",
                         RuntimeError);

    CellMatrix ragged = int_matrix({"p"}, {2});
    ragged.cells[0].edge_r = {0.5};
    CHECK_THROWS_WITH_AS(write_cell_matrix(ragged), "cells disagree on edge or pattern shape",
                         RuntimeError);
}
