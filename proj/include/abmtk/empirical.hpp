#pragma once

#include "abmtk/level.hpp"

namespace abmtk {

// Empirical tabular data: tab-separated text with a typed header line of
// `name:num` / `name:cat` fields. Malformed rows (wrong field count, or an
// unparseable numeric cell) are dropped and reported, never silently kept
// or coerced.
struct DataColumn {
    enum class Type { Num, Cat };

    std::string name;
    Type type = Type::Num;
    std::vector<double> nums;       // Type::Num, one per kept row
    std::vector<std::string> cats;  // Type::Cat, one per kept row
};

struct Dataset {
    std::vector<DataColumn> columns;
    size_t rows = 0;                // kept rows
    std::vector<size_t> dropped;    // 1-based data row numbers that failed
    std::string report;             // "kept 9 of 10 rows; dropped rows: 4"

    const DataColumn* find(const std::string& name) const;
};

Dataset parse_dataset(const std::string& text);
std::string write_dataset(const Dataset& data);
Dataset load_dataset_file(const std::string& path);
void save_dataset_file(const Dataset& data, const std::string& path);

// Half-open binning of one grouping column onto one swept axis: grid cell k
// collects rows with edges[k] <= value < edges[k+1], so a row exactly on an
// edge belongs to the cell whose lower edge it is. Rows outside
// [edges.front(), edges.back()) stay unassigned.
struct AxisBinning {
    std::string param;   // matrix axis name
    std::string column;  // numeric grouping column
    std::vector<double> edges; // strictly increasing, one more than the axis has values
};

struct Binding {
    std::map<std::string, std::string> nodes; // node name -> numeric column
    std::vector<AxisBinning> axes;            // only used for multi-level checks
};

struct InterLevelValidation {
    std::vector<EdgeVerdict> edges;
    bool valid = false; // every edge passed
};

// check_inter_level over the bound columns of the dataset. Throws
// RuntimeError when a node is unbound, a column is missing or categorical,
// or fewer than three rows survive.
InterLevelValidation validate_inter_level(const InterLevelModel& model, const Dataset& data,
                                          const Binding& binding);

// Per-run measurements of the model's nodes as a dataset, one numeric
// column per node. The inverse direction of validate_inter_level: written
// out and reloaded, it reproduces the table's verdicts exactly.
Dataset dataset_from_measurements(const ClassificationTable& table, const InterLevelModel& model);

struct RegionVerdict {
    enum class Outcome { Pass, Fail, Untestable };

    size_t region = 0; // index into RegionPartition::regions
    Outcome outcome = Outcome::Untestable;
    size_t rows = 0;   // rows binned into this region
    std::vector<EdgeVerdict> edges; // empty when untestable
    std::string note;
};

struct MultiLevelReport {
    std::vector<RegionVerdict> regions;
    size_t used = 0;       // rows assigned to some region
    size_t unassigned = 0; // rows outside every bin
    std::string text;      // human-readable summary
};

// Bins the dataset onto the swept grid, then checks each region's fitted
// associations against its own bin: an edge is expected to carry the sign
// the region fitted during the sweep, at the model edge's strength floor.
// Regions with fewer than three rows are untestable, never passed by
// default. Throws RuntimeError when an axis lacks a binning, edges are
// unordered or miscounted, or a column is missing.
MultiLevelReport validate_multi_level(const CellMatrix& matrix, const RegionPartition& part,
                                      const InterLevelModel& model, const Dataset& data,
                                      const Binding& binding);

} // namespace abmtk
