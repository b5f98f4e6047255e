#pragma once

#include "abmtk/ensemble.hpp"

namespace abmtk {

// A numeric reading taken off a classification table, one of four shapes:
// the ensemble-wide frequency of a pattern (a single number), a macro value
// at a step, a macro change over a step window, or a pattern count at a step.
// The last three yield one value per successful run.
struct MeasurementVariable {
    enum class Kind { PatternFrequency, MacroAt, MacroDelta, CountAt };

    std::string name;   // node name inside an InterLevelModel
    Kind kind = Kind::MacroAt;
    std::string target; // pattern or macro column
    int t = 0;          // MacroAt, CountAt
    int t1 = 0, t2 = 0; // MacroDelta: change from step t1 to step t2

    static MeasurementVariable frequency(std::string name, std::string pattern);
    static MeasurementVariable macro_at(std::string name, std::string macro, int t);
    static MeasurementVariable macro_delta(std::string name, std::string macro, int t1, int t2);
    static MeasurementVariable count_at(std::string name, std::string pattern, int t);
};

// One value per successful run, in row order; PatternFrequency yields a
// single value for the whole table. Throws RuntimeError when the target
// column is missing or a step lies outside the table's horizon. For event
// and complex patterns the count series has a single trace-wide entry, so
// CountAt demands t = 0 there.
std::vector<double> measure(const ClassificationTable& table, const MeasurementVariable& v);

struct Edge {
    enum class Kind { Correlation, DeclaredCausal };

    std::string from, to;
    Kind kind = Kind::Correlation;
    int sign = +1;             // +1 or -1, the expected direction
    double min_strength = 0;   // required |r|, in [0,1]
    bool directed = false;
    bool rank_based = false;   // correlate average ranks instead of values
};

struct InterLevelModel {
    std::string name;
    std::vector<MeasurementVariable> nodes;
    std::vector<Edge> edges;

    const MeasurementVariable* find_node(const std::string& name) const;
};

struct EdgeVerdict {
    enum class Outcome { Pass, Fail, Indeterminate };

    Edge edge;
    Outcome outcome = Outcome::Indeterminate;
    Correlation corr;
    bool association_only = false; // declared-causal edges checked as association
    std::string note;
};

// One verdict per edge, in declaration order. An edge passes when the
// estimated sign matches, |r| reaches the edge's strength floor, and the
// 95% CI excludes zero; zero variance on either side is indeterminate
// rather than a failure. Vectors must cover every node at equal length
// >= 3 (throws RuntimeError otherwise, as do malformed models).
std::vector<EdgeVerdict> check_inter_level(const InterLevelModel& model,
                                           const std::map<std::string, std::vector<double>>& vectors);

// measure() applied to every node of the model.
std::map<std::string, std::vector<double>> measure_nodes(const ClassificationTable& table,
                                                         const InterLevelModel& model);

struct GridAxis {
    std::string param;
    std::vector<Value> values;
};

struct Cell {
    std::vector<int> coords; // index into each axis' value list
    std::string error;       // nonempty: cell failed and is excluded downstream
    std::vector<EdgeVerdict> verdicts;
    std::vector<FrequencyEstimate> frequencies; // per table pattern
    std::vector<double> edge_r;                 // estimated r per edge
    double stat = 0;                            // scalar the partition clusters on
};

struct CellMatrix {
    std::vector<std::string> axes;
    std::vector<std::vector<Value>> grid_values; // per axis
    std::vector<Cell> cells;                     // row-major, last axis fastest

    size_t flat_index(const std::vector<int>& coords) const;
    std::vector<int> coords_of(size_t flat) const;
};

// Empty matrix of the given shape with coords prefilled, cells zeroed.
CellMatrix make_cell_matrix(std::vector<std::string> axes,
                            std::vector<std::vector<Value>> grid_values);

// One ensemble per grid cell: the per-cell plan plus the cell's parameter
// values pinned as constants, sampled under base seed derive_run_seed(
// per_cell.base_seed, flat cell index), then measured and checked against
// the model. A cell's stat is its first edge's r (or, for an edgeless
// model, the first pattern's frequency). Cell failures land in the cell's
// error field; plan and axis problems throw RuntimeError up front.
CellMatrix sweep(const ModelSpec& spec, const std::vector<GridAxis>& axes,
                 const SamplingPlan& per_cell, const InterLevelModel& model,
                 const PatternFile& patterns);

struct Region {
    std::vector<std::pair<int, int>> bounds; // per axis, inclusive index ranges
    std::vector<size_t> cells;               // flat indices covered
    int usable = 0;                          // cells without errors
    double stat = 0;                         // mean stat of usable cells
    std::vector<double> edge_stats;          // mean r per edge, same cells
};

// One parent per axis: regions sharing an exact index range on that axis.
struct Band {
    int axis = 0;
    std::pair<int, int> range{0, 0};
    std::vector<size_t> regions; // indices into RegionPartition::regions
};

struct RegionPartition {
    std::vector<Region> regions;
    std::vector<Band> bands;
    std::vector<size_t> excluded; // flat indices of failed cells
};

// Greedy split-and-merge into axis-aligned boxes: recursively cut along the
// axis/position minimizing the larger child's stat spread until every box
// spreads at most `tolerance`, then repeatedly merge adjacent boxes whose
// pooled spread stays within tolerance. Failed cells are excluded from all
// spreads but remain covered by the surrounding region. Every grid cell
// lands in exactly one region; bands give each region one parent per axis,
// so a region is multiply classified whenever the matrix has two axes or
// more.
RegionPartition partition(const CellMatrix& matrix, double tolerance);

// Human-readable listing: each region's parameter ranges, coverage and
// fitted statistics, the bands, and any excluded cells.
std::string region_report(const CellMatrix& matrix, const RegionPartition& part);

// Tab-separated cell matrix, one row per cell in flat order: coordinates,
// error flag, stat, fitted r per edge, matched/n counts per pattern.
// Frequencies and their intervals are rebuilt from the counts on parse;
// verdicts are not stored (reports over a reloaded matrix label edges
// generically). parse_cell_matrix(write_cell_matrix(m)) round-trips every
// stored field; failed cells keep their empty shape.
std::string write_cell_matrix(const CellMatrix& matrix);
CellMatrix parse_cell_matrix(const std::string& text);
void save_cell_matrix_file(const CellMatrix& matrix, const std::string& path);
CellMatrix load_cell_matrix_file(const std::string& path);

} // namespace abmtk
