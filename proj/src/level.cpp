#include "abmtk/level.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "abmtk/rng.hpp"
#include "textio.hpp"

namespace abmtk {

MeasurementVariable MeasurementVariable::frequency(std::string name, std::string pattern) {
    MeasurementVariable v;
    v.name = std::move(name);
    v.kind = Kind::PatternFrequency;
    v.target = std::move(pattern);
    return v;
}

MeasurementVariable MeasurementVariable::macro_at(std::string name, std::string macro, int t) {
    MeasurementVariable v;
    v.name = std::move(name);
    v.kind = Kind::MacroAt;
    v.target = std::move(macro);
    v.t = t;
    return v;
}

MeasurementVariable MeasurementVariable::macro_delta(std::string name, std::string macro, int t1,
                                                     int t2) {
    MeasurementVariable v;
    v.name = std::move(name);
    v.kind = Kind::MacroDelta;
    v.target = std::move(macro);
    v.t1 = t1;
    v.t2 = t2;
    return v;
}

MeasurementVariable MeasurementVariable::count_at(std::string name, std::string pattern, int t) {
    MeasurementVariable v;
    v.name = std::move(name);
    v.kind = Kind::CountAt;
    v.target = std::move(pattern);
    v.t = t;
    return v;
}

namespace {

void check_step(int t, int horizon, const std::string& node) {
    if (t < 0 || t > horizon)
        throw RuntimeError("node '" + node + "': step " + std::to_string(t) +
                           " outside the table's steps 0.." + std::to_string(horizon));
}

} // namespace

std::vector<double> measure(const ClassificationTable& table, const MeasurementVariable& v) {
    std::vector<double> out;
    switch (v.kind) {
    case MeasurementVariable::Kind::PatternFrequency:
        return {frequency(table, v.target).estimate};
    case MeasurementVariable::Kind::MacroAt: {
        int mi = table.macro_index(v.target);
        if (mi < 0) throw RuntimeError("table has no macro column '" + v.target + "'");
        check_step(v.t, table.horizon, v.name);
        for (const TableRow& row : table.rows)
            if (row.error.empty()) out.push_back(row.macros[mi][v.t]);
        return out;
    }
    case MeasurementVariable::Kind::MacroDelta: {
        int mi = table.macro_index(v.target);
        if (mi < 0) throw RuntimeError("table has no macro column '" + v.target + "'");
        check_step(v.t1, table.horizon, v.name);
        check_step(v.t2, table.horizon, v.name);
        if (v.t2 <= v.t1)
            throw RuntimeError("node '" + v.name + "': empty step window [" +
                               std::to_string(v.t1) + ", " + std::to_string(v.t2) + "]");
        for (const TableRow& row : table.rows)
            if (row.error.empty()) out.push_back(row.macros[mi][v.t2] - row.macros[mi][v.t1]);
        return out;
    }
    case MeasurementVariable::Kind::CountAt: {
        int pi = table.pattern_index(v.target);
        if (pi < 0) throw RuntimeError("table has no pattern column '" + v.target + "'");
        size_t idx;
        if (table.pattern_is_state[pi]) {
            check_step(v.t, table.horizon, v.name);
            idx = static_cast<size_t>(v.t);
        } else {
            if (v.t != 0)
                throw RuntimeError("node '" + v.name + "': pattern '" + v.target +
                                   "' carries a single trace-wide count; use step 0");
            idx = 0;
        }
        for (const TableRow& row : table.rows)
            if (row.error.empty()) out.push_back(static_cast<double>(row.counts[pi][idx]));
        return out;
    }
    }
    return out; // unreachable
}

const MeasurementVariable* InterLevelModel::find_node(const std::string& name) const {
    for (const auto& n : nodes)
        if (n.name == name) return &n;
    return nullptr;
}

namespace {

void validate_model_structure(const InterLevelModel& m) {
    if (m.nodes.empty()) throw RuntimeError("inter-level model has no nodes");
    for (size_t i = 0; i < m.nodes.size(); ++i)
        for (size_t j = i + 1; j < m.nodes.size(); ++j)
            if (m.nodes[i].name == m.nodes[j].name)
                throw RuntimeError("duplicate node '" + m.nodes[i].name + "'");
    for (const Edge& e : m.edges) {
        if (!m.find_node(e.from)) throw RuntimeError("edge references unknown node '" + e.from + "'");
        if (!m.find_node(e.to)) throw RuntimeError("edge references unknown node '" + e.to + "'");
        if (e.sign != 1 && e.sign != -1)
            throw RuntimeError("edge " + e.from + " -> " + e.to + ": sign must be +1 or -1");
        if (e.min_strength < 0 || e.min_strength > 1)
            throw RuntimeError("edge " + e.from + " -> " + e.to +
                               ": strength floor must lie in [0, 1]");
    }
}

// Average ranks (ties share the mean of their positions), 1-based.
std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> out(v.size());
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) out[idx[k]] = shared;
        i = j + 1;
    }
    return out;
}

} // namespace

std::vector<EdgeVerdict> check_inter_level(
    const InterLevelModel& model, const std::map<std::string, std::vector<double>>& vectors) {
    validate_model_structure(model);

    size_t n = 0;
    const std::string* first = nullptr;
    for (const auto& node : model.nodes) {
        auto it = vectors.find(node.name);
        if (it == vectors.end())
            throw RuntimeError("no measurement vector for node '" + node.name + "'");
        if (!first) {
            n = it->second.size();
            first = &node.name;
        } else if (it->second.size() != n) {
            throw RuntimeError("measurement vectors differ in length: '" + *first + "' has " +
                               std::to_string(n) + ", '" + node.name + "' has " +
                               std::to_string(it->second.size()));
        }
    }
    if (n < 3)
        throw RuntimeError("need at least three observations per node, got " + std::to_string(n));

    std::vector<EdgeVerdict> out;
    for (const Edge& e : model.edges) {
        EdgeVerdict v;
        v.edge = e;
        v.association_only = e.kind == Edge::Kind::DeclaredCausal;
        const std::vector<double>& x = vectors.at(e.from);
        const std::vector<double>& y = vectors.at(e.to);
        v.corr = e.rank_based ? pearson(ranks(x), ranks(y)) : pearson(x, y);
        if (!v.corr.defined) {
            v.outcome = EdgeVerdict::Outcome::Indeterminate;
            v.note = "zero variance on at least one side";
        } else {
            bool sign_ok = e.sign > 0 ? v.corr.r > 0 : v.corr.r < 0;
            bool strong = std::fabs(v.corr.r) >= e.min_strength;
            bool separated = v.corr.ci.excludes_zero();
            if (sign_ok && strong && separated) {
                v.outcome = EdgeVerdict::Outcome::Pass;
                v.note = "ok";
            } else {
                v.outcome = EdgeVerdict::Outcome::Fail;
                std::string why;
                if (!sign_ok) why = "sign mismatch";
                if (!strong) why += std::string(why.empty() ? "" : "; ") + "|r| below strength floor";
                if (!separated)
                    why += std::string(why.empty() ? "" : "; ") + "confidence interval spans zero";
                v.note = why;
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::map<std::string, std::vector<double>> measure_nodes(const ClassificationTable& table,
                                                         const InterLevelModel& model) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& node : model.nodes) out[node.name] = measure(table, node);
    return out;
}

size_t CellMatrix::flat_index(const std::vector<int>& coords) const {
    size_t flat = 0;
    for (size_t a = 0; a < grid_values.size(); ++a)
        flat = flat * grid_values[a].size() + static_cast<size_t>(coords[a]);
    return flat;
}

std::vector<int> CellMatrix::coords_of(size_t flat) const {
    std::vector<int> coords(grid_values.size(), 0);
    for (size_t a = grid_values.size(); a-- > 0;) {
        coords[a] = static_cast<int>(flat % grid_values[a].size());
        flat /= grid_values[a].size();
    }
    return coords;
}

CellMatrix make_cell_matrix(std::vector<std::string> axes,
                            std::vector<std::vector<Value>> grid_values) {
    if (axes.size() != grid_values.size())
        throw RuntimeError("axis names and value lists differ in count");
    CellMatrix m;
    m.axes = std::move(axes);
    m.grid_values = std::move(grid_values);
    size_t total = 1;
    for (const auto& vals : m.grid_values) {
        if (vals.empty()) throw RuntimeError("every axis needs at least one value");
        if (total > (size_t{1} << 40) / vals.size()) throw RuntimeError("grid is too large");
        total *= vals.size();
    }
    m.cells.resize(total);
    for (size_t i = 0; i < total; ++i) m.cells[i].coords = m.coords_of(i);
    return m;
}

CellMatrix sweep(const ModelSpec& spec, const std::vector<GridAxis>& axes,
                 const SamplingPlan& per_cell, const InterLevelModel& model,
                 const PatternFile& patterns) {
    if (per_cell.runs < 3) throw RuntimeError("per-cell plan needs at least three runs");
    validate_model_structure(model);
    for (const auto& node : model.nodes) {
        bool wants_pattern = node.kind == MeasurementVariable::Kind::PatternFrequency ||
                             node.kind == MeasurementVariable::Kind::CountAt;
        if (wants_pattern && !patterns.find(node.target))
            throw RuntimeError("node '" + node.name + "' references unknown pattern '" +
                               node.target + "'");
        if (!wants_pattern && !patterns.find_macro(node.target))
            throw RuntimeError("node '" + node.name + "' references unknown macro '" + node.target +
                               "'");
    }

    std::vector<std::string> names;
    std::vector<std::vector<Value>> values;
    for (const GridAxis& axis : axes) {
        const ParamDecl* decl = spec.find_param(axis.param);
        if (!decl)
            throw RuntimeError("sweep axis '" + axis.param + "' is not declared by the model");
        if (axis.values.empty())
            throw RuntimeError("sweep axis '" + axis.param + "' has no values");
        for (const Value& v : axis.values)
            if (!decl->domain.contains(v))
                throw RuntimeError("sweep value " + v.to_string() + " for '" + axis.param +
                                   "' lies outside " + decl->domain.describe());
        for (const auto& seen : names)
            if (seen == axis.param)
                throw RuntimeError("sweep axis '" + axis.param + "' appears twice");
        for (const auto& pp : per_cell.params)
            if (pp.name == axis.param)
                throw RuntimeError("parameter '" + axis.param + "' is both swept and planned");
        names.push_back(axis.param);
        values.push_back(axis.values);
    }

    CellMatrix matrix = make_cell_matrix(std::move(names), std::move(values));
    for (size_t ci = 0; ci < matrix.cells.size(); ++ci) {
        Cell& cell = matrix.cells[ci];
        SamplingPlan plan = per_cell;
        plan.base_seed = derive_run_seed(per_cell.base_seed, ci);
        for (size_t a = 0; a < axes.size(); ++a) {
            ParamPlan pp;
            pp.name = matrix.axes[a];
            pp.kind = ParamPlan::Kind::Constant;
            pp.constant = matrix.grid_values[a][cell.coords[a]];
            plan.params.push_back(std::move(pp));
        }
        try {
            ClassificationTable table = sample(spec, plan, patterns);
            cell.verdicts = check_inter_level(model, measure_nodes(table, model));
            for (const auto& name : table.pattern_names)
                cell.frequencies.push_back(frequency(table, name));
            for (const EdgeVerdict& v : cell.verdicts) cell.edge_r.push_back(v.corr.r);
            if (!cell.edge_r.empty())
                cell.stat = cell.edge_r[0];
            else if (!cell.frequencies.empty())
                cell.stat = cell.frequencies[0].estimate;
        } catch (const RuntimeError& e) {
            cell.error = e.what();
        }
    }
    return matrix;
}

namespace {

using Box = std::vector<std::pair<int, int>>; // inclusive index range per axis

// Split/merge scaffolding over one matrix: failed cells drop out of every
// spread, empty boxes count as spread 0.
struct Partitioner {
    const CellMatrix& m;
    double tol;
    std::vector<size_t> dims;
    std::vector<char> usable;

    explicit Partitioner(const CellMatrix& matrix, double tolerance) : m(matrix), tol(tolerance) {
        for (const auto& vals : m.grid_values) dims.push_back(vals.size());
        usable.resize(m.cells.size());
        for (size_t i = 0; i < m.cells.size(); ++i) usable[i] = m.cells[i].error.empty();
    }

    template <typename Fn> void each_cell(const Box& box, Fn&& fn) const {
        std::vector<int> c(box.size());
        for (size_t a = 0; a < box.size(); ++a) c[a] = box[a].first;
        while (true) {
            fn(m.flat_index(c));
            size_t a = box.size();
            while (a-- > 0) {
                if (c[a] < box[a].second) {
                    ++c[a];
                    break;
                }
                c[a] = box[a].first;
                if (a == 0) return;
            }
            if (box.empty()) return; // zero-dimensional grid: single visit
        }
    }

    void min_max(const Box& box, double& lo, double& hi, bool& any) const {
        each_cell(box, [&](size_t flat) {
            if (!usable[flat]) return;
            double s = m.cells[flat].stat;
            if (!any || s < lo) lo = s;
            if (!any || s > hi) hi = s;
            any = true;
        });
    }

    double spread(const Box& box) const {
        double lo = 0, hi = 0;
        bool any = false;
        min_max(box, lo, hi, any);
        return any ? hi - lo : 0.0;
    }

    void split(const Box& box, std::vector<Box>& out) const {
        if (spread(box) <= tol) {
            out.push_back(box);
            return;
        }
        double best_cost = 0;
        int best_axis = -1, best_cut = 0;
        for (size_t a = 0; a < box.size(); ++a) {
            for (int k = box[a].first; k < box[a].second; ++k) {
                Box left = box, right = box;
                left[a].second = k;
                right[a].first = k + 1;
                double cost = std::max(spread(left), spread(right));
                if (best_axis < 0 || cost < best_cost) {
                    best_cost = cost;
                    best_axis = static_cast<int>(a);
                    best_cut = k;
                }
            }
        }
        // spread > tol needs two distinct usable stats, so some axis spans
        // at least two indices and a cut exists.
        Box left = box, right = box;
        left[best_axis].second = best_cut;
        right[best_axis].first = best_cut + 1;
        split(left, out);
        split(right, out);
    }

    bool try_merge(const Box& a, const Box& b, Box& merged) const {
        int touching = -1;
        for (size_t ax = 0; ax < a.size(); ++ax) {
            if (a[ax] == b[ax]) continue;
            bool adjacent = a[ax].second + 1 == b[ax].first || b[ax].second + 1 == a[ax].first;
            if (!adjacent || touching >= 0) return false;
            touching = static_cast<int>(ax);
        }
        if (touching < 0) return false;
        double alo = 0, ahi = 0, blo = 0, bhi = 0;
        bool aany = false, bany = false;
        min_max(a, alo, ahi, aany);
        min_max(b, blo, bhi, bany);
        if (aany && bany &&
            std::max(ahi, bhi) - std::min(alo, blo) > tol)
            return false;
        merged = a;
        merged[touching].first = std::min(a[touching].first, b[touching].first);
        merged[touching].second = std::max(a[touching].second, b[touching].second);
        return true;
    }
};

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

RegionPartition partition(const CellMatrix& matrix, double tolerance) {
    if (tolerance <= 0) throw RuntimeError("partition tolerance must be positive");
    size_t total = 1;
    for (const auto& vals : matrix.grid_values) {
        if (vals.empty()) throw RuntimeError("matrix has an empty axis");
        total *= vals.size();
    }
    if (matrix.cells.size() != total)
        throw RuntimeError("matrix has " + std::to_string(matrix.cells.size()) +
                           " cells, expected " + std::to_string(total));

    Partitioner part(matrix, tolerance);
    Box whole;
    for (size_t d : part.dims) whole.emplace_back(0, static_cast<int>(d) - 1);

    std::vector<Box> boxes;
    part.split(whole, boxes);

    // Merge to a fixpoint; restart after every merge so newly formed boxes
    // get a chance against every neighbour.
    bool merged_any = true;
    while (merged_any) {
        merged_any = false;
        for (size_t i = 0; i < boxes.size() && !merged_any; ++i) {
            for (size_t j = i + 1; j < boxes.size() && !merged_any; ++j) {
                Box merged;
                if (part.try_merge(boxes[i], boxes[j], merged)) {
                    boxes[i] = std::move(merged);
                    boxes.erase(boxes.begin() + static_cast<long>(j));
                    merged_any = true;
                }
            }
        }
    }
    std::sort(boxes.begin(), boxes.end());

    RegionPartition out;
    for (const Box& box : boxes) {
        Region r;
        r.bounds = box;
        part.each_cell(box, [&](size_t flat) { r.cells.push_back(flat); });
        std::sort(r.cells.begin(), r.cells.end());
        size_t nedges = 0;
        for (size_t flat : r.cells)
            if (part.usable[flat]) {
                ++r.usable;
                r.stat += matrix.cells[flat].stat;
                nedges = std::max(nedges, matrix.cells[flat].edge_r.size());
            }
        if (r.usable > 0) r.stat /= r.usable;
        r.edge_stats.assign(nedges, 0.0);
        for (size_t e = 0; e < nedges; ++e) {
            int count = 0;
            for (size_t flat : r.cells)
                if (part.usable[flat] && matrix.cells[flat].edge_r.size() > e) {
                    r.edge_stats[e] += matrix.cells[flat].edge_r[e];
                    ++count;
                }
            if (count > 0) r.edge_stats[e] /= count;
        }
        out.regions.push_back(std::move(r));
    }

    for (size_t a = 0; a < matrix.axes.size(); ++a) {
        std::map<std::pair<int, int>, std::vector<size_t>> groups;
        for (size_t r = 0; r < out.regions.size(); ++r)
            groups[out.regions[r].bounds[a]].push_back(r);
        for (auto& [range, members] : groups) {
            Band band;
            band.axis = static_cast<int>(a);
            band.range = range;
            band.regions = std::move(members);
            out.bands.push_back(std::move(band));
        }
    }

    for (size_t i = 0; i < matrix.cells.size(); ++i)
        if (!part.usable[i]) out.excluded.push_back(i);
    return out;
}

std::string region_report(const CellMatrix& matrix, const RegionPartition& part) {
    std::string text;
    std::string shape;
    for (size_t a = 0; a < matrix.grid_values.size(); ++a)
        shape += (a ? "x" : "") + std::to_string(matrix.grid_values[a].size());
    text += shape + " grid over ";
    for (size_t a = 0; a < matrix.axes.size(); ++a) text += (a ? ", " : "") + matrix.axes[a];
    text += ": " + std::to_string(matrix.cells.size()) + " cells, " +
            std::to_string(part.regions.size()) + " regions, " +
            std::to_string(part.excluded.size()) + " failed\n";

    auto range_text = [&](size_t axis, std::pair<int, int> range) {
        return matrix.axes[axis] + " in [" + matrix.grid_values[axis][range.first].to_string() +
               ", " + matrix.grid_values[axis][range.second].to_string() + "]";
    };

    // Edge labels come from any usable cell; all cells share the model.
    std::vector<std::string> edge_names;
    for (const Cell& cell : matrix.cells)
        if (cell.error.empty() && !cell.verdicts.empty()) {
            for (const EdgeVerdict& v : cell.verdicts)
                edge_names.push_back(v.edge.from + "->" + v.edge.to);
            break;
        }

    for (size_t r = 0; r < part.regions.size(); ++r) {
        const Region& region = part.regions[r];
        text += "region " + std::to_string(r + 1) + ": ";
        for (size_t a = 0; a < region.bounds.size(); ++a)
            text += (a ? ", " : "") + range_text(a, region.bounds[a]);
        text += "; cells " + std::to_string(region.cells.size()) + ", usable " +
                std::to_string(region.usable) + "; stat " + fmt6(region.stat);
        for (size_t e = 0; e < region.edge_stats.size(); ++e) {
            std::string label = e < edge_names.size() ? edge_names[e] : "edge " + std::to_string(e);
            text += "; " + label + " r=" + fmt6(region.edge_stats[e]);
        }
        text += "\n";
    }

    for (const Band& band : part.bands) {
        text += "band " + range_text(static_cast<size_t>(band.axis), band.range) + ": regions";
        for (size_t r : band.regions) text += " " + std::to_string(r + 1);
        text += "\n";
    }

    for (size_t flat : part.excluded) {
        const Cell& cell = matrix.cells[flat];
        text += "excluded (";
        for (size_t a = 0; a < cell.coords.size(); ++a)
            text += (a ? ", " : "") +
                    matrix.grid_values[a][static_cast<size_t>(cell.coords[a])].to_string();
        text += "): " + cell.error + "\n";
    }
    return text;
}

std::string write_cell_matrix(const CellMatrix& matrix) {
    using namespace textio;
    if (matrix.axes.empty() || matrix.axes.size() != matrix.grid_values.size())
        throw RuntimeError("cell matrix has no axes to write");

    // Shape comes from the first intact cell; every other intact cell must
    // agree, failed cells are written zero-shaped.
    size_t edges = 0;
    std::vector<std::string> patterns;
    bool shaped = false;
    for (const Cell& cell : matrix.cells) {
        if (!cell.error.empty()) continue;
        if (!shaped) {
            edges = cell.edge_r.size();
            for (const auto& f : cell.frequencies) patterns.push_back(f.pattern);
            shaped = true;
            continue;
        }
        bool same = cell.edge_r.size() == edges && cell.frequencies.size() == patterns.size();
        for (size_t p = 0; same && p < patterns.size(); ++p)
            same = cell.frequencies[p].pattern == patterns[p];
        if (!same) throw RuntimeError("cells disagree on edge or pattern shape");
    }

    std::ostringstream out;
    out << "# cell-matrix axes=" << matrix.axes.size() << " cells=" << matrix.cells.size()
        << "\n";
    for (size_t a = 0; a < matrix.axes.size(); ++a) {
        out << "# axis " << sanitize(matrix.axes[a]) << " =";
        for (const Value& v : matrix.grid_values[a]) out << " " << v.to_string();
        out << "\n";
    }
    for (size_t a = 0; a < matrix.axes.size(); ++a) out << sanitize(matrix.axes[a]) << ":idx\t";
    out << "ok:bool\terror:str\tstat:num";
    for (size_t e = 0; e < edges; ++e) out << "\tr" << e << ":num";
    for (const std::string& p : patterns)
        out << "\t" << sanitize(p) << ".matched:u64\t" << sanitize(p) << ".n:u64";
    out << "\n";

    for (const Cell& cell : matrix.cells) {
        for (int c : cell.coords) out << c << "\t";
        bool ok = cell.error.empty();
        out << (ok ? "true" : "false") << "\t" << sanitize(cell.error) << "\t"
            << fmt_double(cell.stat);
        for (size_t e = 0; e < edges; ++e) out << "\t" << fmt_double(ok ? cell.edge_r[e] : 0);
        for (size_t p = 0; p < patterns.size(); ++p) {
            if (ok)
                out << "\t" << cell.frequencies[p].matched << "\t" << cell.frequencies[p].n;
            else
                out << "\t0\t0";
        }
        out << "\n";
    }
    return out.str();
}

CellMatrix parse_cell_matrix(const std::string& text) {
    using namespace textio;
    std::vector<std::string> lines = split(text, '\n');
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines[0].rfind("# cell-matrix ", 0) != 0)
        throw RuntimeError("not a cell matrix file");

    size_t axes = 0, cells = 0;
    {
        std::istringstream meta(lines[0].substr(14));
        std::string field;
        while (meta >> field) {
            if (field.rfind("axes=", 0) == 0)
                axes = parse_u64(field.substr(5));
            else if (field.rfind("cells=", 0) == 0)
                cells = parse_u64(field.substr(6));
            else
                throw RuntimeError("unknown cell matrix meta field '" + field + "'");
        }
    }
    if (axes == 0) throw RuntimeError("cell matrix declares no axes");
    if (lines.size() < 2 + axes) throw RuntimeError("cell matrix file is truncated");

    std::vector<std::string> names;
    std::vector<std::vector<Value>> values;
    for (size_t a = 0; a < axes; ++a) {
        const std::string& line = lines[1 + a];
        if (line.rfind("# axis ", 0) != 0) throw RuntimeError("missing axis line");
        size_t eq = line.find(" =", 7);
        if (eq == std::string::npos) throw RuntimeError("malformed axis line");
        names.push_back(line.substr(7, eq - 7));
        std::istringstream vals(line.substr(eq + 2));
        std::vector<Value> axis;
        std::string tok;
        while (vals >> tok) axis.push_back(parse_value_literal(tok));
        if (axis.empty()) throw RuntimeError("axis '" + names.back() + "' has no values");
        values.push_back(std::move(axis));
    }

    CellMatrix matrix = make_cell_matrix(names, values);
    if (matrix.cells.size() != cells)
        throw RuntimeError("cell count does not match the axis shapes");
    if (lines.size() != 2 + axes + cells)
        throw RuntimeError("cell matrix row count does not match its meta line");

    // Header: coordinate columns, ok/error/stat, then edge and pattern columns.
    std::vector<std::string> header = split(lines[1 + axes], '\t');
    size_t fixed = axes + 3;
    if (header.size() < fixed) throw RuntimeError("cell matrix header is truncated");
    for (size_t a = 0; a < axes; ++a)
        if (header[a] != names[a] + ":idx") throw RuntimeError("header does not match the axes");
    if (header[axes] != "ok:bool" || header[axes + 1] != "error:str" ||
        header[axes + 2] != "stat:num")
        throw RuntimeError("cell matrix header lacks ok/error/stat columns");
    size_t edges = 0;
    size_t col = fixed;
    while (col < header.size() && header[col] == "r" + std::to_string(edges) + ":num") {
        ++edges;
        ++col;
    }
    std::vector<std::string> patterns;
    for (; col < header.size(); col += 2) {
        const std::string& c = header[col];
        size_t suffix = c.rfind(".matched:u64");
        if (suffix == std::string::npos || suffix + 12 != c.size())
            throw RuntimeError("malformed column '" + c + "'");
        std::string name = c.substr(0, suffix);
        if (col + 1 >= header.size() || header[col + 1] != name + ".n:u64")
            throw RuntimeError("pattern '" + name + "' lacks its n column");
        patterns.push_back(name);
    }

    for (size_t i = 0; i < cells; ++i) {
        std::vector<std::string> f = split(lines[2 + axes + i], '\t');
        if (f.size() != fixed + edges + 2 * patterns.size())
            throw RuntimeError("cell row " + std::to_string(i) + " has the wrong field count");
        Cell& cell = matrix.cells[i];
        for (size_t a = 0; a < axes; ++a)
            if (parse_u64(f[a]) != static_cast<uint64_t>(cell.coords[a]))
                throw RuntimeError("cell row " + std::to_string(i) + " is out of order");
        bool ok = parse_bool(f[axes]);
        cell.error = f[axes + 1];
        if (ok != cell.error.empty())
            throw RuntimeError("ok flag disagrees with error text");
        cell.stat = parse_num(f[axes + 2]);
        if (!ok) continue; // failed cells keep their empty shape
        for (size_t e = 0; e < edges; ++e) cell.edge_r.push_back(parse_num(f[fixed + e]));
        for (size_t p = 0; p < patterns.size(); ++p) {
            FrequencyEstimate fe;
            fe.pattern = patterns[p];
            fe.matched = parse_u64(f[fixed + edges + 2 * p]);
            fe.n = parse_u64(f[fixed + edges + 2 * p + 1]);
            if (fe.matched > fe.n)
                throw RuntimeError("pattern '" + fe.pattern + "' matched more runs than it has");
            if (fe.n > 0) {
                fe.estimate = static_cast<double>(fe.matched) / static_cast<double>(fe.n);
                fe.ci = wilson95(fe.matched, fe.n);
            }
            cell.frequencies.push_back(std::move(fe));
        }
    }
    return matrix;
}

void save_cell_matrix_file(const CellMatrix& matrix, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write cell matrix file: " + path);
    out << write_cell_matrix(matrix);
}

CellMatrix load_cell_matrix_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot open cell matrix file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_cell_matrix(buf.str());
    } catch (const RuntimeError& e) {
        throw RuntimeError(path + ": " + e.what());
    }
}

} // namespace abmtk
