#include "abmtk/ensemble.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "abmtk/engine.hpp"
#include "abmtk/rng.hpp"
#include "textio.hpp"

namespace abmtk {

using namespace textio;

int ClassificationTable::pattern_index(const std::string& name) const {
    for (size_t i = 0; i < pattern_names.size(); ++i)
        if (pattern_names[i] == name) return static_cast<int>(i);
    return -1;
}

int ClassificationTable::macro_index(const std::string& name) const {
    for (size_t i = 0; i < macro_names.size(); ++i)
        if (macro_names[i] == name) return static_cast<int>(i);
    return -1;
}

namespace {

bool state_member(const std::vector<uint64_t>& series) {
    for (uint64_t c : series)
        if (c > 0) return true;
    return false;
}

double to_double(const Rational& r) {
    return static_cast<double>(r.num) / static_cast<double>(r.den);
}

} // namespace

ClassificationTable sample(const ModelSpec& spec, const SamplingPlan& plan,
                           const PatternFile& patterns) {
    if (plan.runs < 1) throw RuntimeError("sampling plan needs at least one run");
    if (plan.horizon < 0) throw RuntimeError("sampling plan horizon must be nonnegative");
    Layout layout = build_layout(spec);

    long long cells = 1;
    std::vector<const ParamPlan*> grid_params;
    for (const auto& pp : plan.params) {
        const ParamDecl* decl = spec.find_param(pp.name);
        if (!decl)
            throw RuntimeError("plan parameter '" + pp.name + "' is not declared by the model");
        switch (pp.kind) {
        case ParamPlan::Kind::Constant:
            if (!decl->domain.contains(pp.constant))
                throw RuntimeError("plan value " + pp.constant.to_string() + " for '" + pp.name +
                                   "' lies outside " + decl->domain.describe());
            break;
        case ParamPlan::Kind::Grid:
            if (pp.grid.empty()) throw RuntimeError("grid for '" + pp.name + "' is empty");
            for (const Value& v : pp.grid)
                if (!decl->domain.contains(v))
                    throw RuntimeError("grid value " + v.to_string() + " for '" + pp.name +
                                       "' lies outside " + decl->domain.describe());
            grid_params.push_back(&pp);
            if (cells > (1LL << 40) / static_cast<long long>(pp.grid.size()))
                throw RuntimeError("parameter grid is too large");
            cells *= static_cast<long long>(pp.grid.size());
            break;
        case ParamPlan::Kind::Uniform:
            if (!decl->domain.cardinality())
                throw RuntimeError("domain of '" + pp.name + "' is too large to draw uniformly");
            break;
        }
    }
    for (const ParamDecl& decl : spec.params) {
        if (decl.value) continue;
        bool covered = false;
        for (const auto& pp : plan.params) covered |= pp.name == decl.name;
        if (!covered)
            throw RuntimeError("parameter '" + decl.name + "' is free and the plan does not set it");
    }

    ClassificationTable table;
    table.model_name = spec.name;
    table.model_hash = model_hash(spec);
    table.horizon = plan.horizon;
    for (const auto& pp : plan.params) table.param_names.push_back(pp.name);
    for (const auto& d : patterns.patterns) {
        table.pattern_names.push_back(d.name);
        table.pattern_is_state.push_back(d.kind == PatternDecl::Kind::Sst);
    }
    for (const auto& m : patterns.macros) table.macro_names.push_back(m.name);

    table.rows.reserve(plan.runs);
    for (long long i = 0; i < plan.runs; ++i) {
        TableRow row;
        row.run = i;
        row.seed = derive_run_seed(plan.base_seed, 2 * static_cast<uint64_t>(i));
        RandomStream draws(derive_run_seed(plan.base_seed, 2 * static_cast<uint64_t>(i) + 1));

        std::vector<Value> cell_values(grid_params.size());
        long long rem = cells > 1 ? i % cells : 0;
        for (size_t g = grid_params.size(); g-- > 0;) {
            size_t k = grid_params[g]->grid.size();
            cell_values[g] = grid_params[g]->grid[rem % k];
            rem /= static_cast<long long>(k);
        }

        std::map<std::string, Value> params;
        size_t gi = 0;
        for (const auto& pp : plan.params) {
            Value v;
            switch (pp.kind) {
            case ParamPlan::Kind::Constant: v = pp.constant; break;
            case ParamPlan::Kind::Grid: v = cell_values[gi++]; break;
            case ParamPlan::Kind::Uniform: {
                const ValueDomain& dom = spec.find_param(pp.name)->domain;
                v = dom.value_at(draws.uniform_below(*dom.cardinality()));
                break;
            }
            }
            params[pp.name] = v;
            row.params.push_back(v);
        }

        try {
            Trace tr = run_model(spec, layout, resolve_params(spec, params), row.seed,
                                 plan.horizon);
            for (const auto& d : patterns.patterns) {
                if (d.kind == PatternDecl::Kind::Sst) {
                    std::vector<uint64_t> series = state_count_series(d.state, spec, layout, tr);
                    row.member.push_back(state_member(series));
                    row.counts.push_back(std::move(series));
                } else {
                    MatchResult r = match_trace(d.body, patterns, spec, layout, tr);
                    row.member.push_back(r.matched);
                    row.counts.push_back({r.instantiations});
                }
            }
            for (const auto& m : patterns.macros) {
                std::vector<Rational> series = aggregate_series(spec, layout, tr, m);
                std::vector<double> vals;
                vals.reserve(series.size());
                for (const Rational& r : series) vals.push_back(to_double(r));
                row.macros.push_back(std::move(vals));
            }
        } catch (const RuntimeError& e) {
            row.error = e.what();
            row.member.assign(table.pattern_names.size(), false);
            row.counts.clear();
            for (size_t p = 0; p < table.pattern_names.size(); ++p)
                row.counts.emplace_back(
                    table.pattern_is_state[p] ? static_cast<size_t>(plan.horizon) + 1 : 1, 0);
            row.macros.assign(table.macro_names.size(),
                              std::vector<double>(static_cast<size_t>(plan.horizon) + 1, 0.0));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

FrequencyEstimate frequency(const ClassificationTable& table, const std::string& pattern) {
    int pi = table.pattern_index(pattern);
    if (pi < 0) throw RuntimeError("table has no pattern column '" + pattern + "'");
    FrequencyEstimate f;
    f.pattern = pattern;
    // Failed runs carry no trace, so they enter neither side of the ratio.
    for (const TableRow& row : table.rows) {
        if (!row.error.empty()) continue;
        ++f.n;
        if (row.member[pi]) ++f.matched;
    }
    if (f.n == 0) throw RuntimeError("no successful runs to estimate a frequency from");
    f.estimate = static_cast<double>(f.matched) / static_cast<double>(f.n);
    f.ci = wilson95(f.matched, f.n);
    return f;
}

std::map<std::string, Rational> exact_frequencies(const ModelSpec& spec, const Layout& layout,
                                                  const std::map<std::string, Value>& overrides,
                                                  int horizon, unsigned long long bound,
                                                  const PatternFile& patterns) {
    EnumerationResult res = enumerate_systems(spec, layout, overrides, horizon, bound);
    std::map<std::string, Rational> out;
    for (const auto& d : patterns.patterns) out[d.name] = Rational(0);
    for (const SystemInstance& sys : res.systems) {
        for (const auto& d : patterns.patterns) {
            bool member;
            if (d.kind == PatternDecl::Kind::Sst)
                member = state_member(state_count_series(d.state, spec, layout, sys.trace));
            else
                member = match_trace(d.body, patterns, spec, layout, sys.trace).matched;
            if (member) out[d.name] = out[d.name] + sys.weight;
        }
    }
    return out;
}

std::string write_table(const ClassificationTable& table) {
    std::ostringstream out;
    out << "# classification-table model=" << table.model_name << " hash="
        << hash16(table.model_hash) << " horizon=" << table.horizon << " runs="
        << table.rows.size() << "\n";

    std::vector<std::string> cols{"run:int", "seed:u64"};
    for (const auto& p : table.param_names) cols.push_back(p + ":val");
    cols.push_back("ok:bool");
    cols.push_back("error:str");
    for (size_t p = 0; p < table.pattern_names.size(); ++p) {
        cols.push_back(table.pattern_names[p] + ":bool");
        if (table.pattern_is_state[p])
            for (int t = 0; t <= table.horizon; ++t)
                cols.push_back(table.pattern_names[p] + "@" + std::to_string(t) + ":int");
        else
            cols.push_back(table.pattern_names[p] + ".n:int");
    }
    for (const auto& m : table.macro_names)
        for (int t = 0; t <= table.horizon; ++t)
            cols.push_back(m + "@" + std::to_string(t) + ":num");
    for (size_t i = 0; i < cols.size(); ++i) out << (i ? "\t" : "") << cols[i];
    out << "\n";

    for (const TableRow& row : table.rows) {
        out << row.run << "\t" << row.seed;
        for (const Value& v : row.params) out << "\t" << v.to_string();
        out << "\t" << (row.error.empty() ? "true" : "false") << "\t" << sanitize(row.error);
        for (size_t p = 0; p < table.pattern_names.size(); ++p) {
            out << "\t" << (row.member[p] ? "true" : "false");
            for (uint64_t c : row.counts[p]) out << "\t" << c;
        }
        for (const auto& series : row.macros)
            for (double v : series) out << "\t" << fmt_double(v);
        out << "\n";
    }
    return out.str();
}

ClassificationTable parse_table(const std::string& text) {
    std::vector<std::string> lines = split(text, '\n');
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.size() < 2) throw RuntimeError("classification table is truncated");

    ClassificationTable table;
    {
        std::istringstream meta(lines[0]);
        std::string tag, kind, field;
        meta >> tag >> kind;
        if (tag != "#" || kind != "classification-table")
            throw RuntimeError("not a classification table");
        long long runs = -1;
        while (meta >> field) {
            size_t eq = field.find('=');
            if (eq == std::string::npos) throw RuntimeError("malformed table meta line");
            std::string key = field.substr(0, eq), val = field.substr(eq + 1);
            if (key == "model") table.model_name = val;
            else if (key == "hash") table.model_hash = std::strtoull(val.c_str(), nullptr, 16);
            else if (key == "horizon") table.horizon = static_cast<int>(parse_u64(val));
            else if (key == "runs") runs = static_cast<long long>(parse_u64(val));
            else throw RuntimeError("unknown table meta field '" + key + "'");
        }
        if (runs != static_cast<long long>(lines.size()) - 2)
            throw RuntimeError("table row count does not match its meta line");
    }

    std::vector<std::string> header = split(lines[1], '\t');
    size_t col = 0;
    auto need = [&](const std::string& what) {
        if (col >= header.size()) throw RuntimeError("table header is truncated: expected " + what);
        return header[col++];
    };
    if (need("run:int") != "run:int" || need("seed:u64") != "seed:u64")
        throw RuntimeError("table header must start with run:int and seed:u64");
    while (col < header.size() && header[col] != "ok:bool") {
        const std::string& c = header[col++];
        size_t colon = c.rfind(':');
        if (colon == std::string::npos || c.substr(colon + 1) != "val")
            throw RuntimeError("malformed parameter column '" + c + "'");
        table.param_names.push_back(c.substr(0, colon));
    }
    if (need("ok:bool") != "ok:bool" || need("error:str") != "error:str")
        throw RuntimeError("table header lacks ok/error columns");

    // pattern groups: name:bool followed by either name@0..H:int or name.n:int
    std::vector<size_t> pattern_width;
    while (col < header.size()) {
        const std::string& c = header[col];
        size_t colon = c.rfind(':');
        if (colon == std::string::npos) throw RuntimeError("malformed column '" + c + "'");
        if (c.substr(colon + 1) != "bool") break;
        std::string name = c.substr(0, colon);
        ++col;
        table.pattern_names.push_back(name);
        if (col < header.size() && header[col] == name + "@0:int") {
            table.pattern_is_state.push_back(true);
            size_t width = 0;
            for (int t = 0; t <= table.horizon; ++t) {
                if (need("count column") != name + "@" + std::to_string(t) + ":int")
                    throw RuntimeError("pattern '" + name + "' lacks step " + std::to_string(t));
                ++width;
            }
            pattern_width.push_back(width);
        } else {
            table.pattern_is_state.push_back(false);
            if (need("count column") != name + ".n:int")
                throw RuntimeError("pattern '" + name + "' lacks its count column");
            pattern_width.push_back(1);
        }
    }
    while (col < header.size()) {
        const std::string& c = header[col];
        size_t at = c.find('@');
        if (at == std::string::npos) throw RuntimeError("malformed macro column '" + c + "'");
        std::string name = c.substr(0, at);
        table.macro_names.push_back(name);
        for (int t = 0; t <= table.horizon; ++t)
            if (need("macro column") != name + "@" + std::to_string(t) + ":num")
                throw RuntimeError("macro '" + name + "' lacks step " + std::to_string(t));
    }

    for (size_t li = 2; li < lines.size(); ++li) {
        std::vector<std::string> f = split(lines[li], '\t');
        if (f.size() != header.size())
            throw RuntimeError("table row " + std::to_string(li - 1) + " has " +
                               std::to_string(f.size()) + " fields, header has " +
                               std::to_string(header.size()));
        TableRow row;
        size_t k = 0;
        row.run = static_cast<long long>(parse_u64(f[k++]));
        row.seed = parse_u64(f[k++]);
        for (size_t p = 0; p < table.param_names.size(); ++p)
            row.params.push_back(parse_value_literal(f[k++]));
        bool ok = parse_bool(f[k++]);
        row.error = f[k++];
        if (ok != row.error.empty())
            throw RuntimeError("table row " + std::to_string(li - 1) +
                               ": ok flag disagrees with error text");
        for (size_t p = 0; p < table.pattern_names.size(); ++p) {
            row.member.push_back(parse_bool(f[k++]));
            std::vector<uint64_t> counts;
            for (size_t w = 0; w < pattern_width[p]; ++w) counts.push_back(parse_u64(f[k++]));
            row.counts.push_back(std::move(counts));
        }
        for (size_t m = 0; m < table.macro_names.size(); ++m) {
            std::vector<double> series;
            for (int t = 0; t <= table.horizon; ++t) series.push_back(parse_num(f[k++]));
            row.macros.push_back(std::move(series));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void save_table_file(const ClassificationTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write table file: " + path);
    out << write_table(table);
}

ClassificationTable load_table_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot open table file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_table(buf.str());
    } catch (const RuntimeError& e) {
        throw RuntimeError(path + ": " + e.what());
    }
}

} // namespace abmtk
