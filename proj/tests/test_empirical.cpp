#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "abmtk/empirical.hpp"
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

// Same flip model the level tests use: the run-level association between
// mean(u) and mean(v) is exactly +1 below the threshold and -1 above it.
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

DataColumn num_col(std::string name, std::vector<double> vals) {
    DataColumn c;
    c.name = std::move(name);
    c.type = DataColumn::Type::Num;
    c.nums = std::move(vals);
    return c;
}

DataColumn cat_col(std::string name, std::vector<std::string> vals) {
    DataColumn c;
    c.name = std::move(name);
    c.type = DataColumn::Type::Cat;
    c.cats = std::move(vals);
    return c;
}

Dataset make_dataset(std::vector<DataColumn> cols) {
    Dataset d;
    d.columns = std::move(cols);
    d.rows = d.columns.empty()              ? 0
             : d.columns[0].type == DataColumn::Type::Num ? d.columns[0].nums.size()
                                                          : d.columns[0].cats.size();
    return d;
}

Binding xy_binding() {
    Binding b;
    b.nodes = {{"x", "cx"}, {"y", "cy"}};
    return b;
}

// One axis with four integer grid values, cell statistics as given, and a
// single fitted edge whose r equals the cell's stat.
CellMatrix four_cells(const std::vector<double>& stats) {
    std::vector<Value> axis;
    for (int i = 0; i < 4; ++i) axis.push_back(Value::of_int(i));
    CellMatrix m = make_cell_matrix({"p"}, {axis});
    for (size_t i = 0; i < stats.size(); ++i) {
        m.cells[i].stat = stats[i];
        m.cells[i].edge_r = {stats[i]};
    }
    return m;
}

} // namespace

TEST_CASE("clean rows parse and malformed rows are dropped with a report") {
    std::string text = "site:cat\tcx:num\tcy:num\n";
    for (int i = 1; i <= 10; ++i) {
        std::string row = "s\t" + std::to_string(i) + "\t" + std::to_string(2 * i);
        if (i == 4) row = "s\toops\t8";       // unparseable numeric cell
        if (i == 7) row = "s\t7";             // missing field
        text += row + "\n";
    }

    Dataset d = parse_dataset(text);
    REQUIRE(d.columns.size() == 3);
    CHECK(d.columns[0].type == DataColumn::Type::Cat);
    CHECK(d.columns[1].type == DataColumn::Type::Num);
    CHECK(d.rows == 8);
    CHECK(d.dropped == std::vector<size_t>{4, 7});
    CHECK(d.report == "kept 8 of 10 rows; dropped rows 4, 7");
    REQUIRE(d.columns[1].nums.size() == 8);
    CHECK(d.columns[1].nums[3] == 5); // row 4 gone, the kept fifth value is 5
    CHECK(d.find("cy") == &d.columns[2]);
    CHECK(d.find("nope") == nullptr);

    // A fully clean file keeps everything and says so.
    Dataset clean = parse_dataset("a:num\n1\n2\n3\n");
    CHECK(clean.rows == 3);
    CHECK(clean.report == "kept 3 of 3 rows");

    // A single bad row reports in the singular.
    Dataset one = parse_dataset("a:num\n1\nx\n3\n");
    CHECK(one.report == "kept 2 of 3 rows; dropped row 2");
}

TEST_CASE("dataset header problems are hard errors") {
    CHECK_THROWS_WITH_AS(parse_dataset(""), "dataset is empty", RuntimeError);
    CHECK_THROWS_WITH_AS(parse_dataset("\n\n"), "dataset is empty", RuntimeError);
    CHECK_THROWS_WITH_AS(parse_dataset("x\n1\n"),
                         "header field 'x' is missing its :num or :cat type", RuntimeError);
    CHECK_THROWS_WITH_AS(parse_dataset("x:float\n1\n"),
                         "column 'x' has unknown type 'float'", RuntimeError);
    CHECK_THROWS_WITH_AS(parse_dataset(":num\n1\n"), "dataset header has an unnamed column",
                         RuntimeError);
    CHECK_THROWS_WITH_AS(parse_dataset("x:num\tx:cat\n1\ta\n"), "duplicate column 'x'",
                         RuntimeError);

    // A header alone is a valid, empty dataset.
    Dataset d = parse_dataset("x:num\ty:cat\n");
    CHECK(d.rows == 0);
    CHECK(d.report == "kept 0 of 0 rows");
}

TEST_CASE("datasets round-trip through text exactly") {
    Dataset d = make_dataset({num_col("x", {0.1, 1.0 / 3.0, -1e-17, 12345678901234567.0}),
                              cat_col("label", {"a", "b with space", "", "d"})});

    std::string text = write_dataset(d);
    Dataset back = parse_dataset(text);
    REQUIRE(back.rows == 4);
    REQUIRE(back.columns.size() == 2);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(back.columns[0].nums[i] == d.columns[0].nums[i]);
        CHECK(back.columns[1].cats[i] == d.columns[1].cats[i]);
    }
    CHECK(write_dataset(back) == text);

    // Tabs and newlines inside categorical cells cannot survive a delimited
    // file; they are flattened to spaces on write.
    Dataset messy = make_dataset({cat_col("c", {"a\tb\nc"})});
    Dataset flat = parse_dataset(write_dataset(messy));
    CHECK(flat.columns[0].cats[0] == "a b c");

    // CRLF endings and trailing blank lines parse the same.
    std::string crlf;
    for (const std::string& line : {std::string("x:num"), std::string("1"), std::string("2")})
        crlf += line + "\r\n";
    Dataset win = parse_dataset(crlf + "\n");
    CHECK(win.rows == 2);
    CHECK(win.columns[0].nums[1] == 2);

    CHECK_THROWS_WITH_AS(write_dataset(Dataset{}), "dataset has no columns", RuntimeError);
    Dataset ragged = make_dataset({num_col("x", {1, 2}), num_col("y", {1})});
    CHECK_THROWS_WITH_AS(write_dataset(ragged), "column 'y' has 1 values for 2 rows",
                         RuntimeError);
}

TEST_CASE("dataset files save and load") {
    std::string path = "empirical_roundtrip.tsv";
    Dataset d = make_dataset({num_col("x", {1.5, 2.5, 3.5})});
    save_dataset_file(d, path);
    Dataset back = load_dataset_file(path);
    std::remove(path.c_str());
    REQUIRE(back.rows == 3);
    CHECK(back.columns[0].nums[2] == 3.5);

    CHECK_THROWS_WITH(load_dataset_file("no_such_dir/missing.tsv"),
                      "cannot open dataset file: no_such_dir/missing.tsv");
}

TEST_CASE("validate_inter_level checks the bound columns") {
    std::vector<double> xs, ys;
    for (int i = 0; i < 20; ++i) {
        xs.push_back(i);
        ys.push_back(2.0 * i + (i % 3) * 0.01);
    }
    Dataset d = make_dataset({num_col("cx", xs), num_col("cy", ys),
                              cat_col("site", std::vector<std::string>(20, "s"))});
    InterLevelModel m = flip_model(0.9);

    InterLevelValidation v = validate_inter_level(m, d, xy_binding());
    REQUIRE(v.edges.size() == 1);
    CHECK(v.valid);
    CHECK(v.edges[0].outcome == EdgeVerdict::Outcome::Pass);
    CHECK(v.edges[0].corr.r > 0.99);

    // Negating one column flips the sign and fails the edge.
    Dataset neg = d;
    for (double& y : neg.columns[1].nums) y = -y;
    InterLevelValidation bad = validate_inter_level(m, neg, xy_binding());
    CHECK_FALSE(bad.valid);
    CHECK(bad.edges[0].outcome == EdgeVerdict::Outcome::Fail);
    CHECK(bad.edges[0].note == "sign mismatch");

    Binding unbound;
    unbound.nodes = {{"x", "cx"}};
    CHECK_THROWS_WITH_AS(validate_inter_level(m, d, unbound),
                         "node 'y' is not bound to a dataset column", RuntimeError);
    Binding missing;
    missing.nodes = {{"x", "cx"}, {"y", "ghost"}};
    CHECK_THROWS_WITH_AS(validate_inter_level(m, d, missing),
                         "column 'ghost' bound to node 'y' is missing from the dataset",
                         RuntimeError);
    Binding categorical;
    categorical.nodes = {{"x", "cx"}, {"y", "site"}};
    CHECK_THROWS_WITH_AS(validate_inter_level(m, d, categorical),
                         "column 'site' bound to node 'y' is categorical; nodes need numbers",
                         RuntimeError);

    Dataset two = make_dataset({num_col("cx", {1, 2}), num_col("cy", {2, 4})});
    CHECK_THROWS_WITH_AS(validate_inter_level(m, two, xy_binding()),
                         "dataset keeps 2 rows; checking a model needs at least 3", RuntimeError);
}

TEST_CASE("measurements exported from an ensemble reload to identical verdicts") {
    ModelSpec spec = model_ok(kFlip);
    PatternFile pats = parse_patterns_checked(kFlipPatterns, spec);
    InterLevelModel model = flip_model();

    SamplingPlan plan = plan_of(40, 1, 77);
    ParamPlan pp;
    pp.name = "p";
    pp.kind = ParamPlan::Kind::Constant;
    pp.constant = Value::of_number(Rational(3, 10));
    plan.params.push_back(pp);
    ClassificationTable table = sample(spec, plan, pats);
    std::vector<EdgeVerdict> direct = check_inter_level(model, measure_nodes(table, model));

    Dataset exported = dataset_from_measurements(table, model);
    REQUIRE(exported.columns.size() == 2);
    CHECK(exported.columns[0].name == "x");
    CHECK(exported.rows == 40);

    std::string path = "empirical_export.tsv";
    save_dataset_file(exported, path);
    Dataset reloaded = load_dataset_file(path);
    std::remove(path.c_str());

    Binding identity;
    identity.nodes = {{"x", "x"}, {"y", "y"}};
    InterLevelValidation v = validate_inter_level(model, reloaded, identity);
    REQUIRE(v.edges.size() == direct.size());
    CHECK(v.valid == (direct[0].outcome == EdgeVerdict::Outcome::Pass));
    CHECK(v.edges[0].outcome == direct[0].outcome);
    // %.17g output reparses to the very same doubles, so the coefficients
    // agree exactly, not just within tolerance.
    CHECK(v.edges[0].corr.r == direct[0].corr.r);
    CHECK(v.edges[0].corr.ci.lo == direct[0].corr.ci.lo);
    CHECK(v.edges[0].corr.ci.hi == direct[0].corr.ci.hi);

    InterLevelModel empty;
    CHECK_THROWS_WITH_AS(dataset_from_measurements(table, empty),
                         "model declares no nodes to export", RuntimeError);
    InterLevelModel mixed = model;
    mixed.nodes.push_back(MeasurementVariable::frequency("f", "lifted"));
    CHECK_THROWS_WITH_AS(dataset_from_measurements(table, mixed),
                         "node 'f' yields 1 values; 'x' yields 40", RuntimeError);
}

TEST_CASE("rows bin into regions with half-open edges") {
    CellMatrix matrix = four_cells({1, 1, -1, -1});
    RegionPartition part = partition(matrix, 0.5);
    REQUIRE(part.regions.size() == 2);
    REQUIRE(part.regions[0].bounds == std::vector<std::pair<int, int>>{{0, 1}});
    CHECK(part.regions[0].edge_stats == std::vector<double>{1});
    CHECK(part.regions[1].edge_stats == std::vector<double>{-1});

    // Grid cells bin [0,1.25), [1.25,2.5), [2.5,3.75), [3.75,5). The g=2.5
    // row sits exactly on the interior edge and must join the region whose
    // lower edge it is; binned the other way, region 2 would starve at two
    // rows and turn untestable.
    Dataset d = make_dataset({
        num_col("g", {0.0, 1.0, 2.49, 2.5, 3.3, 4.9, 5.0, -0.1}),
        num_col("cx", {1, 2, 3, 1, 2, 3, 9, 9}),
        num_col("cy", {2, 4, 6, -2, -4, -6, 9, 9}),
    });
    Binding b = xy_binding();
    b.axes = {{"p", "g", {0.0, 1.25, 2.5, 3.75, 5.0}}};
    InterLevelModel model = flip_model(0.9);

    MultiLevelReport rep = validate_multi_level(matrix, part, model, d, b);
    CHECK(rep.used == 6);
    CHECK(rep.unassigned == 2); // g=5.0 is past the last edge, g=-0.1 below the first
    REQUIRE(rep.regions.size() == 2);
    CHECK(rep.regions[0].rows == 3);
    CHECK(rep.regions[0].outcome == RegionVerdict::Outcome::Pass);
    CHECK(rep.regions[1].rows == 3);
    CHECK(rep.regions[1].outcome == RegionVerdict::Outcome::Pass);
    // Region 2 fitted a negative direction, so its bin passes on r = -1
    // even though the declared edge points up.
    CHECK(rep.regions[1].edges[0].corr.r == Approx(-1.0));
    CHECK(rep.text ==
          "validated 2 regions against 8 rows: 6 assigned, 2 unassigned\n"
          "region 1: pass; rows 3\n"
          "region 2: pass; rows 3\n");

    // Starve region 2 down to two rows: untestable, never a default pass.
    Dataset thin = d;
    thin.columns[0].nums[5] = 5.0; // push the g=4.9 row out of range
    MultiLevelReport starved = validate_multi_level(matrix, part, model, thin, b);
    CHECK(starved.regions[1].outcome == RegionVerdict::Outcome::Untestable);
    CHECK(starved.regions[1].note == "only 2 rows bin into this region; need 3");

    // And with an empty bin the note says so.
    Dataset empty = d;
    for (size_t i = 3; i < 6; ++i) empty.columns[0].nums[i] = -1.0;
    MultiLevelReport vacant = validate_multi_level(matrix, part, model, empty, b);
    CHECK(vacant.regions[1].outcome == RegionVerdict::Outcome::Untestable);
    CHECK(vacant.regions[1].note == "no rows bin into this region");
    CHECK(vacant.text.find("region 2: untestable; rows 0") != std::string::npos);
}

TEST_CASE("a contradicted region fails its bin") {
    CellMatrix matrix = four_cells({1, 1, -1, -1});
    RegionPartition part = partition(matrix, 0.5);

    // Both groups show a positive association, but region 2 fitted -1.
    Dataset d = make_dataset({
        num_col("g", {0.0, 1.0, 2.0, 2.6, 3.3, 4.9}),
        num_col("cx", {1, 2, 3, 1, 2, 3}),
        num_col("cy", {2, 4, 6, 2, 4, 6}),
    });
    Binding b = xy_binding();
    b.axes = {{"p", "g", {0.0, 1.25, 2.5, 3.75, 5.0}}};

    MultiLevelReport rep = validate_multi_level(matrix, part, flip_model(0.9), d, b);
    CHECK(rep.regions[0].outcome == RegionVerdict::Outcome::Pass);
    CHECK(rep.regions[1].outcome == RegionVerdict::Outcome::Fail);
    CHECK(rep.regions[1].note == "at least one edge contradicts the region's fit");
    CHECK(rep.regions[1].edges[0].note == "sign mismatch");
    CHECK(rep.text.find("region 2: FAIL; rows 3") != std::string::npos);
}

TEST_CASE("a region that fitted no direction is untestable") {
    std::vector<Value> axis{Value::of_int(0), Value::of_int(1)};
    CellMatrix matrix = make_cell_matrix({"p"}, {axis});
    for (Cell& c : matrix.cells) c.edge_r = {0.0};
    RegionPartition part = partition(matrix, 1.0);
    REQUIRE(part.regions.size() == 1);

    Dataset d = make_dataset({num_col("g", {0.1, 0.5, 1.2, 1.8}),
                              num_col("cx", {1, 2, 3, 4}), num_col("cy", {2, 4, 6, 8})});
    Binding b = xy_binding();
    b.axes = {{"p", "g", {0.0, 1.0, 2.0}}};

    MultiLevelReport rep = validate_multi_level(matrix, part, flip_model(), d, b);
    REQUIRE(rep.regions.size() == 1);
    CHECK(rep.regions[0].rows == 4);
    CHECK(rep.regions[0].outcome == RegionVerdict::Outcome::Untestable);
    CHECK(rep.regions[0].note == "at least one edge is indeterminate on this bin");
    CHECK(rep.regions[0].edges[0].note == "region fitted no direction for this edge");
}

TEST_CASE("multi-level bindings are validated up front") {
    CellMatrix matrix = four_cells({1, 1, -1, -1});
    RegionPartition part = partition(matrix, 0.5);
    InterLevelModel model = flip_model();
    Dataset d = make_dataset({num_col("g", {0.1, 1.3, 2.6, 3.8}), num_col("cx", {1, 2, 3, 4}),
                              num_col("cy", {2, 4, 6, 8}),
                              cat_col("site", {"a", "b", "c", "d"})});
    std::vector<double> edges{0.0, 1.25, 2.5, 3.75, 5.0};

    auto check_throws = [&](Binding b, const char* message) {
        CHECK_THROWS_WITH_AS(validate_multi_level(matrix, part, model, d, b), message,
                             RuntimeError);
    };

    Binding base = xy_binding();
    check_throws(base, "axis 'p' has no binning");

    Binding wrong = base;
    wrong.axes = {{"q", "g", edges}};
    check_throws(wrong, "binning for 'q' does not match any swept axis");

    Binding twice = base;
    twice.axes = {{"p", "g", edges}, {"p", "g", edges}};
    check_throws(twice, "axis 'p' is bound twice");

    Binding few = base;
    few.axes = {{"p", "g", {0.0, 2.5, 5.0}}};
    check_throws(few, "axis 'p' has 4 values and needs 5 edges, got 3");

    Binding unordered = base;
    unordered.axes = {{"p", "g", {0.0, 1.25, 1.25, 3.75, 5.0}}};
    check_throws(unordered, "edges for axis 'p' must be strictly increasing");

    Binding ghost = base;
    ghost.axes = {{"p", "gg", edges}};
    check_throws(ghost, "grouping column 'gg' is missing from the dataset");

    Binding cat = base;
    cat.axes = {{"p", "site", edges}};
    check_throws(cat, "grouping column 'site' is categorical; binning needs numbers");

    Binding ok = base;
    ok.axes = {{"p", "g", edges}};
    InterLevelModel edgeless = model;
    edgeless.edges.clear();
    CHECK_THROWS_WITH_AS(validate_multi_level(matrix, part, edgeless, d, ok),
                         "model declares no edges to validate", RuntimeError);

    RegionPartition bare = part;
    for (Region& r : bare.regions) r.edge_stats.clear();
    CHECK_THROWS_WITH_AS(validate_multi_level(matrix, bare, model, d, ok),
                         "region edge statistics (0) do not match the model's edge count (1)",
                         RuntimeError);
}

TEST_CASE("empirical data drawn from the swept model validates every region") {
    ModelSpec spec = model_ok(kFlip);
    PatternFile pats = parse_patterns_checked(kFlipPatterns, spec);
    InterLevelModel model = flip_model();

    std::vector<Value> ps;
    std::vector<double> pvals;
    for (int tenths : {1, 3, 7, 9}) {
        ps.push_back(Value::of_number(Rational(tenths, 10)));
        pvals.push_back(tenths / 10.0);
    }
    CellMatrix matrix = sweep(spec, {{"p", ps}}, plan_of(12, 1, 31), model, pats);
    RegionPartition part = partition(matrix, 0.5);
    REQUIRE(part.regions.size() == 2);

    // Rebuild each cell's ensemble exactly as the sweep ran it and emit one
    // dataset row per run: the two node measurements plus the cell's
    // parameter value as the grouping column.
    Dataset d = make_dataset({num_col("g", {}), num_col("x", {}), num_col("y", {})});
    for (size_t ci = 0; ci < matrix.cells.size(); ++ci) {
        SamplingPlan cell_plan = plan_of(12, 1, derive_run_seed(31, ci));
        ParamPlan pp;
        pp.name = "p";
        pp.kind = ParamPlan::Kind::Constant;
        pp.constant = ps[ci];
        cell_plan.params.push_back(pp);
        ClassificationTable table = sample(spec, cell_plan, pats);
        auto vectors = measure_nodes(table, model);
        for (size_t i = 0; i < vectors["x"].size(); ++i) {
            d.columns[0].nums.push_back(pvals[ci]);
            d.columns[1].nums.push_back(vectors["x"][i]);
            d.columns[2].nums.push_back(vectors["y"][i]);
        }
    }
    d.rows = d.columns[0].nums.size();
    REQUIRE(d.rows == 48);

    Binding b;
    b.nodes = {{"x", "x"}, {"y", "y"}};
    b.axes = {{"p", "g", {0.05, 0.2, 0.5, 0.8, 0.95}}};
    MultiLevelReport rep = validate_multi_level(matrix, part, model, d, b);
    CHECK(rep.used == 48);
    CHECK(rep.unassigned == 0);
    for (const RegionVerdict& v : rep.regions) {
        CHECK(v.rows == 24);
        CHECK(v.outcome == RegionVerdict::Outcome::Pass);
    }

    // Rotating the grouping labels swaps the bins under the fitted regions,
    // so each region now sees the opposite association and fails.
    Dataset rotated = d;
    for (double& g : rotated.columns[0].nums) g = g < 0.5 ? g + 0.6 : g - 0.6;
    MultiLevelReport broken = validate_multi_level(matrix, part, model, rotated, b);
    size_t failures = 0;
    for (const RegionVerdict& v : broken.regions)
        failures += v.outcome == RegionVerdict::Outcome::Fail;
    CHECK(failures == 2);
}
