#include "abmtk/empirical.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "textio.hpp"

namespace abmtk {

using textio::fmt_double;
using textio::sanitize;
using textio::split;

const DataColumn* Dataset::find(const std::string& name) const {
    for (const DataColumn& c : columns)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

bool parse_cell_num(const std::string& s, double& v) {
    if (s.empty()) return false;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::string build_report(const Dataset& data) {
    std::ostringstream out;
    out << "kept " << data.rows << " of " << data.rows + data.dropped.size() << " rows";
    if (!data.dropped.empty()) {
        out << "; dropped row" << (data.dropped.size() == 1 ? "" : "s");
        for (size_t i = 0; i < data.dropped.size(); ++i)
            out << (i ? ", " : " ") << data.dropped[i];
    }
    return out.str();
}

// The node columns of the dataset, checked to exist and be numeric.
std::map<std::string, std::vector<double>> bind_nodes(const InterLevelModel& model,
                                                      const Dataset& data,
                                                      const Binding& binding) {
    std::map<std::string, std::vector<double>> vectors;
    for (const MeasurementVariable& node : model.nodes) {
        auto it = binding.nodes.find(node.name);
        if (it == binding.nodes.end())
            throw RuntimeError("node '" + node.name + "' is not bound to a dataset column");
        const DataColumn* col = data.find(it->second);
        if (!col)
            throw RuntimeError("column '" + it->second + "' bound to node '" + node.name +
                               "' is missing from the dataset");
        if (col->type != DataColumn::Type::Num)
            throw RuntimeError("column '" + it->second + "' bound to node '" + node.name +
                               "' is categorical; nodes need numbers");
        vectors[node.name] = col->nums;
    }
    return vectors;
}

} // namespace

Dataset parse_dataset(const std::string& text) {
    std::vector<std::string> lines = split(text, '\n');
    for (std::string& l : lines)
        if (!l.empty() && l.back() == '\r') l.pop_back();
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw RuntimeError("dataset is empty");

    Dataset data;
    for (const std::string& field : split(lines[0], '\t')) {
        size_t colon = field.rfind(':');
        if (colon == std::string::npos)
            throw RuntimeError("header field '" + field + "' is missing its :num or :cat type");
        DataColumn col;
        col.name = field.substr(0, colon);
        std::string type = field.substr(colon + 1);
        if (col.name.empty()) throw RuntimeError("dataset header has an unnamed column");
        if (type == "num")
            col.type = DataColumn::Type::Num;
        else if (type == "cat")
            col.type = DataColumn::Type::Cat;
        else
            throw RuntimeError("column '" + col.name + "' has unknown type '" + type + "'");
        if (data.find(col.name)) throw RuntimeError("duplicate column '" + col.name + "'");
        data.columns.push_back(std::move(col));
    }

    std::vector<double> nums(data.columns.size());
    for (size_t li = 1; li < lines.size(); ++li) {
        std::vector<std::string> fields = split(lines[li], '\t');
        bool ok = fields.size() == data.columns.size();
        for (size_t c = 0; ok && c < fields.size(); ++c)
            if (data.columns[c].type == DataColumn::Type::Num)
                ok = parse_cell_num(fields[c], nums[c]);
        if (!ok) {
            data.dropped.push_back(li); // 1-based data row number
            continue;
        }
        for (size_t c = 0; c < fields.size(); ++c) {
            if (data.columns[c].type == DataColumn::Type::Num)
                data.columns[c].nums.push_back(nums[c]);
            else
                data.columns[c].cats.push_back(fields[c]);
        }
        ++data.rows;
    }
    data.report = build_report(data);
    return data;
}

std::string write_dataset(const Dataset& data) {
    if (data.columns.empty()) throw RuntimeError("dataset has no columns");
    std::ostringstream out;
    for (size_t c = 0; c < data.columns.size(); ++c) {
        const DataColumn& col = data.columns[c];
        size_t len = col.type == DataColumn::Type::Num ? col.nums.size() : col.cats.size();
        if (len != data.rows)
            throw RuntimeError("column '" + col.name + "' has " + std::to_string(len) +
                               " values for " + std::to_string(data.rows) + " rows");
        out << (c ? "\t" : "") << sanitize(col.name) << ":"
            << (col.type == DataColumn::Type::Num ? "num" : "cat");
    }
    out << "\n";
    for (size_t r = 0; r < data.rows; ++r) {
        for (size_t c = 0; c < data.columns.size(); ++c) {
            const DataColumn& col = data.columns[c];
            out << (c ? "\t" : "");
            if (col.type == DataColumn::Type::Num)
                out << fmt_double(col.nums[r]);
            else
                out << sanitize(col.cats[r]);
        }
        out << "\n";
    }
    return out.str();
}

Dataset load_dataset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot open dataset file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_dataset(buf.str());
    } catch (const RuntimeError& e) {
        throw RuntimeError(path + ": " + e.what());
    }
}

void save_dataset_file(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write dataset file: " + path);
    out << write_dataset(data);
}

InterLevelValidation validate_inter_level(const InterLevelModel& model, const Dataset& data,
                                          const Binding& binding) {
    std::map<std::string, std::vector<double>> vectors = bind_nodes(model, data, binding);
    if (data.rows < 3)
        throw RuntimeError("dataset keeps " + std::to_string(data.rows) +
                           " rows; checking a model needs at least 3");
    InterLevelValidation out;
    out.edges = check_inter_level(model, vectors);
    out.valid = true;
    for (const EdgeVerdict& ev : out.edges) out.valid &= ev.outcome == EdgeVerdict::Outcome::Pass;
    return out;
}

Dataset dataset_from_measurements(const ClassificationTable& table,
                                  const InterLevelModel& model) {
    if (model.nodes.empty()) throw RuntimeError("model declares no nodes to export");
    Dataset data;
    for (const MeasurementVariable& node : model.nodes) {
        if (data.find(node.name)) throw RuntimeError("duplicate node '" + node.name + "'");
        DataColumn col;
        col.name = node.name;
        col.type = DataColumn::Type::Num;
        col.nums = measure(table, node);
        if (!data.columns.empty() && col.nums.size() != data.rows)
            throw RuntimeError("node '" + node.name + "' yields " +
                               std::to_string(col.nums.size()) + " values; '" +
                               data.columns[0].name + "' yields " + std::to_string(data.rows));
        data.rows = col.nums.size();
        data.columns.push_back(std::move(col));
    }
    data.report = build_report(data);
    return data;
}

MultiLevelReport validate_multi_level(const CellMatrix& matrix, const RegionPartition& part,
                                      const InterLevelModel& model, const Dataset& data,
                                      const Binding& binding) {
    if (model.edges.empty()) throw RuntimeError("model declares no edges to validate");
    std::map<std::string, std::vector<double>> node_columns = bind_nodes(model, data, binding);

    // One binning per axis, with edge count matching the grid.
    std::vector<const AxisBinning*> per_axis(matrix.axes.size(), nullptr);
    for (const AxisBinning& ab : binding.axes) {
        size_t a = 0;
        while (a < matrix.axes.size() && matrix.axes[a] != ab.param) ++a;
        if (a == matrix.axes.size())
            throw RuntimeError("binning for '" + ab.param + "' does not match any swept axis");
        if (per_axis[a]) throw RuntimeError("axis '" + ab.param + "' is bound twice");
        per_axis[a] = &ab;
    }
    for (size_t a = 0; a < matrix.axes.size(); ++a) {
        if (!per_axis[a]) throw RuntimeError("axis '" + matrix.axes[a] + "' has no binning");
        const AxisBinning& ab = *per_axis[a];
        size_t want = matrix.grid_values[a].size() + 1;
        if (ab.edges.size() != want)
            throw RuntimeError("axis '" + ab.param + "' has " +
                               std::to_string(matrix.grid_values[a].size()) + " values and needs " +
                               std::to_string(want) + " edges, got " +
                               std::to_string(ab.edges.size()));
        for (size_t k = 0; k + 1 < ab.edges.size(); ++k)
            if (!(ab.edges[k] < ab.edges[k + 1]))
                throw RuntimeError("edges for axis '" + ab.param + "' must be strictly increasing");
        const DataColumn* col = data.find(ab.column);
        if (!col)
            throw RuntimeError("grouping column '" + ab.column + "' is missing from the dataset");
        if (col->type != DataColumn::Type::Num)
            throw RuntimeError("grouping column '" + ab.column +
                               "' is categorical; binning needs numbers");
    }

    for (const Region& region : part.regions)
        if (region.edge_stats.size() != model.edges.size())
            throw RuntimeError("region edge statistics (" +
                               std::to_string(region.edge_stats.size()) +
                               ") do not match the model's edge count (" +
                               std::to_string(model.edges.size()) + ")");

    std::vector<int> cell_region(matrix.cells.size(), -1);
    for (size_t r = 0; r < part.regions.size(); ++r)
        for (size_t flat : part.regions[r].cells) cell_region[flat] = static_cast<int>(r);

    // Each row lands in at most one grid cell (half-open bins, so a value on
    // an interior edge goes to the cell whose lower edge it is), hence in at
    // most one region.
    MultiLevelReport report;
    std::vector<std::vector<size_t>> region_rows(part.regions.size());
    std::vector<int> coords(matrix.axes.size());
    for (size_t row = 0; row < data.rows; ++row) {
        bool assigned = true;
        for (size_t a = 0; assigned && a < matrix.axes.size(); ++a) {
            const AxisBinning& ab = *per_axis[a];
            double x = data.find(ab.column)->nums[row];
            int k = -1;
            for (size_t e = 0; e + 1 < ab.edges.size(); ++e)
                if (ab.edges[e] <= x && x < ab.edges[e + 1]) k = static_cast<int>(e);
            if (k < 0)
                assigned = false;
            else
                coords[a] = k;
        }
        if (!assigned) {
            ++report.unassigned;
            continue;
        }
        int r = cell_region[matrix.flat_index(coords)];
        if (r < 0) {
            ++report.unassigned; // cell outside every region (shouldn't happen)
            continue;
        }
        region_rows[static_cast<size_t>(r)].push_back(row);
        ++report.used;
    }

    for (size_t r = 0; r < part.regions.size(); ++r) {
        const Region& region = part.regions[r];
        RegionVerdict verdict;
        verdict.region = r;
        verdict.rows = region_rows[r].size();
        if (verdict.rows < 3) {
            verdict.outcome = RegionVerdict::Outcome::Untestable;
            verdict.note = verdict.rows == 0 ? "no rows bin into this region"
                                             : "only " + std::to_string(verdict.rows) +
                                                   " rows bin into this region; need 3";
            report.regions.push_back(std::move(verdict));
            continue;
        }

        // The region's fitted model: the declared edges re-signed to the
        // directions the sweep actually fitted here.
        InterLevelModel fitted = model;
        std::vector<bool> directionless(model.edges.size(), false);
        for (size_t e = 0; e < fitted.edges.size(); ++e) {
            double rr = region.edge_stats[e];
            if (rr > 0)
                fitted.edges[e].sign = +1;
            else if (rr < 0)
                fitted.edges[e].sign = -1;
            else
                directionless[e] = true; // keep declared sign, mark below
        }

        std::map<std::string, std::vector<double>> vectors;
        for (const auto& [name, column] : node_columns) {
            std::vector<double>& v = vectors[name];
            v.reserve(verdict.rows);
            for (size_t row : region_rows[r]) v.push_back(column[row]);
        }
        verdict.edges = check_inter_level(fitted, vectors);
        for (size_t e = 0; e < verdict.edges.size(); ++e) {
            if (!directionless[e]) continue;
            verdict.edges[e].outcome = EdgeVerdict::Outcome::Indeterminate;
            verdict.edges[e].note = "region fitted no direction for this edge";
        }

        bool any_fail = false, any_indeterminate = false;
        for (const EdgeVerdict& ev : verdict.edges) {
            any_fail |= ev.outcome == EdgeVerdict::Outcome::Fail;
            any_indeterminate |= ev.outcome == EdgeVerdict::Outcome::Indeterminate;
        }
        if (any_fail) {
            verdict.outcome = RegionVerdict::Outcome::Fail;
            verdict.note = "at least one edge contradicts the region's fit";
        } else if (any_indeterminate) {
            verdict.outcome = RegionVerdict::Outcome::Untestable;
            verdict.note = "at least one edge is indeterminate on this bin";
        } else {
            verdict.outcome = RegionVerdict::Outcome::Pass;
            verdict.note = "ok";
        }
        report.regions.push_back(std::move(verdict));
    }

    std::ostringstream text;
    text << "validated " << part.regions.size() << " regions against " << data.rows
         << " rows: " << report.used << " assigned, " << report.unassigned << " unassigned\n";
    for (const RegionVerdict& v : report.regions) {
        const char* label = v.outcome == RegionVerdict::Outcome::Pass ? "pass"
                            : v.outcome == RegionVerdict::Outcome::Fail ? "FAIL"
                                                                        : "untestable";
        text << "region " << v.region + 1 << ": " << label << "; rows " << v.rows;
        if (v.outcome != RegionVerdict::Outcome::Pass) text << "; " << v.note;
        text << "\n";
    }
    report.text = text.str();
    return report;
}

} // namespace abmtk
