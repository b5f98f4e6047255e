#include "abmtk/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace abmtk {

namespace {

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string render_pairs(const AgentType& type,
                         const std::vector<std::pair<std::string, Value>>& pairs) {
    if (pairs.empty()) return "-";
    std::string out;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (i) out += ",";
        const VarDecl* v = type.find_var(pairs[i].first);
        out += pairs[i].first + "=" + (v ? v->domain.render(pairs[i].second)
                                         : pairs[i].second.to_string());
    }
    return out;
}

std::vector<std::string> words(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

std::optional<Value> parse_value_token(const std::string& s) {
    if (s == "true") return Value::of_bool(true);
    if (s == "false") return Value::of_bool(false);
    auto r = parse_rational(s);
    if (!r) return std::nullopt;
    return Value::of_number(*r);
}

} // namespace

std::string serialize_trace(const ModelSpec& spec, const Layout& layout, const Trace& trace) {
    std::ostringstream out;
    out << "trace v1\n";
    out << "model " << trace.model_name << " " << hash_hex(trace.hash) << "\n";
    out << "seed " << trace.seed << "\n";
    out << "schedule ";
    switch (trace.schedule) {
    case ScheduleKind::Synchronous: out << "synchronous"; break;
    case ScheduleKind::AsyncRandom: out << "async-random"; break;
    case ScheduleKind::AsyncFixed: out << "async-fixed"; break;
    }
    out << " " << (trace.firing == FiringMode::FirstMatch ? "first-match" : "all-matching")
        << "\n";
    out << "horizon " << trace.horizon << "\n";
    out << "params\n";
    for (const auto& p : spec.params) {
        auto it = trace.params.find(p.name);
        if (it != trace.params.end())
            out << "  " << p.name << " = " << p.domain.render(it->second) << "\n";
    }
    out << "end\n";
    out << "init\n";
    out << render_state(spec, layout, trace.initial, "  ");
    out << "end\n";
    out << "events\n";
    for (const auto& e : trace.events) {
        const AgentType& type = spec.types[layout.type_of[e.instance]];
        out << "  " << e.step << " " << e.ordinal << " "
            << instance_label(spec, layout, e.instance) << " " << e.rule << " | "
            << render_pairs(type, e.source) << " | " << render_pairs(type, e.target) << "\n";
    }
    out << "end\n";
    return out.str();
}

namespace {

struct TraceReader {
    const ModelSpec& spec;
    const Layout& layout;
    Diagnostics& diags;
    std::map<std::string, int> instances;

    TraceReader(const ModelSpec& s, const Layout& l, Diagnostics& d)
        : spec(s), layout(l), diags(d) {
        for (int i = 0; i < l.total; ++i) instances[instance_label(s, l, i)] = i;
    }

    void fail(int line, const std::string& msg) { diags.push_back({line, 0, msg}); }

    bool parse_pairs(const std::string& token, const AgentType& type, int line,
                     std::vector<std::pair<std::string, Value>>& out) {
        if (token == "-") return true;
        std::istringstream in(token);
        std::string item;
        while (std::getline(in, item, ',')) {
            size_t eq = item.find('=');
            if (eq == std::string::npos) {
                fail(line, "bad variable binding '" + item + "'");
                return false;
            }
            std::string var = item.substr(0, eq);
            const VarDecl* decl = type.find_var(var);
            if (!decl) {
                fail(line, "unknown variable '" + var + "' for type " + type.name);
                return false;
            }
            auto val = parse_value_token(item.substr(eq + 1));
            if (!val || !decl->domain.contains(*val)) {
                fail(line, "value '" + item.substr(eq + 1) + "' outside domain of " + var);
                return false;
            }
            out.emplace_back(var, *val);
        }
        return true;
    }
};

} // namespace

std::optional<Trace> parse_trace(const ModelSpec& spec, const Layout& layout,
                                 const std::string& text, Diagnostics& diags) {
    std::vector<std::string> lines;
    {
        std::istringstream in(text);
        std::string l;
        while (std::getline(in, l)) {
            if (!l.empty() && l.back() == '\r') l.pop_back();
            lines.push_back(l);
        }
    }
    TraceReader rd(spec, layout, diags);
    Trace trace;
    size_t i = 0;
    auto next_words = [&]() -> std::vector<std::string> {
        // Keeps advancing past end of input so truncated files trip the
        // unterminated-block guards instead of looping.
        if (i >= lines.size()) {
            ++i;
            return {};
        }
        return words(lines[i++]);
    };

    auto w = next_words();
    if (w != std::vector<std::string>{"trace", "v1"}) {
        rd.fail(1, "not a trace file (expected 'trace v1')");
        return std::nullopt;
    }
    w = next_words();
    if (w.size() != 3 || w[0] != "model") {
        rd.fail(static_cast<int>(i), "expected 'model <name> <hash>'");
        return std::nullopt;
    }
    trace.model_name = w[1];
    try {
        trace.hash = std::stoull(w[2], nullptr, 16);
    } catch (const std::exception&) {
        rd.fail(static_cast<int>(i), "bad model hash");
        return std::nullopt;
    }
    if (trace.model_name != spec.name || trace.hash != model_hash(spec)) {
        rd.fail(static_cast<int>(i),
                "trace was produced by a different model (hash mismatch); refusing stale artifact");
        return std::nullopt;
    }
    w = next_words();
    if (w.size() != 2 || w[0] != "seed") {
        rd.fail(static_cast<int>(i), "expected 'seed <n>'");
        return std::nullopt;
    }
    trace.seed = std::stoull(w[1]);
    w = next_words();
    if (w.size() != 3 || w[0] != "schedule") {
        rd.fail(static_cast<int>(i), "expected 'schedule <order> <firing>'");
        return std::nullopt;
    }
    if (w[1] == "synchronous") trace.schedule = ScheduleKind::Synchronous;
    else if (w[1] == "async-random") trace.schedule = ScheduleKind::AsyncRandom;
    else if (w[1] == "async-fixed") trace.schedule = ScheduleKind::AsyncFixed;
    else { rd.fail(static_cast<int>(i), "unknown schedule '" + w[1] + "'"); return std::nullopt; }
    if (w[2] == "first-match") trace.firing = FiringMode::FirstMatch;
    else if (w[2] == "all-matching") trace.firing = FiringMode::AllMatching;
    else { rd.fail(static_cast<int>(i), "unknown firing mode '" + w[2] + "'"); return std::nullopt; }
    w = next_words();
    if (w.size() != 2 || w[0] != "horizon") {
        rd.fail(static_cast<int>(i), "expected 'horizon <n>'");
        return std::nullopt;
    }
    trace.horizon = std::stoi(w[1]);

    w = next_words();
    if (w != std::vector<std::string>{"params"}) {
        rd.fail(static_cast<int>(i), "expected 'params'");
        return std::nullopt;
    }
    for (w = next_words(); !(w.size() == 1 && w[0] == "end"); w = next_words()) {
        if (i > lines.size()) { rd.fail(static_cast<int>(i), "unterminated params block"); return std::nullopt; }
        if (w.size() != 3 || w[1] != "=") {
            rd.fail(static_cast<int>(i), "expected '<param> = <value>'");
            return std::nullopt;
        }
        const ParamDecl* p = spec.find_param(w[0]);
        auto val = parse_value_token(w[2]);
        if (!p || !val || !p->domain.contains(*val)) {
            rd.fail(static_cast<int>(i), "bad param binding '" + w[0] + "'");
            return std::nullopt;
        }
        trace.params[w[0]] = *val;
    }

    w = next_words();
    if (w != std::vector<std::string>{"init"}) {
        rd.fail(static_cast<int>(i), "expected 'init'");
        return std::nullopt;
    }
    trace.initial = empty_state(spec, layout);
    std::vector<std::vector<bool>> filled(layout.total);
    for (int k = 0; k < layout.total; ++k)
        filled[k].resize(spec.types[layout.type_of[k]].vars.size(), false);
    for (w = next_words(); !(w.size() == 1 && w[0] == "end"); w = next_words()) {
        if (i > lines.size()) { rd.fail(static_cast<int>(i), "unterminated init block"); return std::nullopt; }
        if (w.size() != 3 || w[1] != "=") {
            rd.fail(static_cast<int>(i), "expected '<agent>.<var> = <value>'");
            return std::nullopt;
        }
        size_t dot = w[0].find('.');
        if (dot == std::string::npos) {
            rd.fail(static_cast<int>(i), "expected '<agent>.<var>'");
            return std::nullopt;
        }
        auto inst = rd.instances.find(w[0].substr(0, dot));
        if (inst == rd.instances.end()) {
            rd.fail(static_cast<int>(i), "unknown agent '" + w[0].substr(0, dot) + "'");
            return std::nullopt;
        }
        const AgentType& type = spec.types[layout.type_of[inst->second]];
        int vi = type.var_index(w[0].substr(dot + 1));
        auto val = parse_value_token(w[2]);
        if (vi < 0 || !val || !type.vars[vi].domain.contains(*val)) {
            rd.fail(static_cast<int>(i), "bad state line for '" + w[0] + "'");
            return std::nullopt;
        }
        trace.initial.set(inst->second, vi, *val);
        filled[inst->second][vi] = true;
    }
    for (int k = 0; k < layout.total; ++k)
        for (size_t v = 0; v < filled[k].size(); ++v)
            if (!filled[k][v])
                rd.fail(static_cast<int>(i), "init block missing " +
                                                 instance_label(spec, layout, k) + "." +
                                                 spec.types[layout.type_of[k]].vars[v].name);

    w = next_words();
    if (w != std::vector<std::string>{"events"}) {
        rd.fail(static_cast<int>(i), "expected 'events'");
        return std::nullopt;
    }
    int prev_step = 0, prev_ordinal = 0;
    for (w = next_words(); !(w.size() == 1 && w[0] == "end"); w = next_words()) {
        if (i > lines.size()) { rd.fail(static_cast<int>(i), "unterminated events block"); return std::nullopt; }
        if (w.size() != 8 || w[4] != "|" || w[6] != "|") {
            rd.fail(static_cast<int>(i), "expected '<step> <ord> <agent> <rule> | <from> | <to>'");
            return std::nullopt;
        }
        Event e;
        try {
            e.step = std::stoi(w[0]);
            e.ordinal = std::stoi(w[1]);
        } catch (const std::exception&) {
            rd.fail(static_cast<int>(i), "bad step/ordinal");
            return std::nullopt;
        }
        auto inst = rd.instances.find(w[2]);
        if (inst == rd.instances.end()) {
            rd.fail(static_cast<int>(i), "unknown agent '" + w[2] + "'");
            return std::nullopt;
        }
        e.instance = inst->second;
        const AgentType& type = spec.types[layout.type_of[e.instance]];
        e.rule = w[3];
        bool rule_known = false;
        for (const auto& r : type.rules) rule_known |= r.id == e.rule;
        if (!rule_known) {
            rd.fail(static_cast<int>(i), "type " + type.name + " has no rule '" + e.rule + "'");
            return std::nullopt;
        }
        if (e.step < 1 || e.step > trace.horizon || e.step < prev_step ||
            (e.step == prev_step && e.ordinal <= prev_ordinal) ||
            (e.step > prev_step && e.ordinal != 1)) {
            rd.fail(static_cast<int>(i), "event ordering violated");
            return std::nullopt;
        }
        prev_step = e.step;
        prev_ordinal = e.ordinal;
        if (!rd.parse_pairs(w[5], type, static_cast<int>(i), e.source) ||
            !rd.parse_pairs(w[7], type, static_cast<int>(i), e.target))
            return std::nullopt;
        trace.events.push_back(std::move(e));
    }

    if (!diags.empty()) return std::nullopt;
    return trace;
}

Trace load_trace_file(const ModelSpec& spec, const Layout& layout, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open trace file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    Diagnostics diags;
    auto t = parse_trace(spec, layout, buf.str(), diags);
    if (!t) throw RuntimeError(path + ": trace problems:\n" + format_diagnostics(diags));
    return *t;
}

State state_at(const ModelSpec& spec, const Layout& layout, const Trace& trace, int t) {
    if (t < 0 || t > trace.horizon)
        throw RuntimeError("step " + std::to_string(t) + " outside [0, " +
                           std::to_string(trace.horizon) + "]");
    State s = trace.initial;
    for (const auto& e : trace.events) {
        if (e.step > t) break;
        const AgentType& type = spec.types[layout.type_of[e.instance]];
        for (const auto& [var, val] : e.target) s.set(e.instance, type.var_index(var), val);
    }
    return s;
}

} // namespace abmtk
