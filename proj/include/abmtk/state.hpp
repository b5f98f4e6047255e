#pragma once

#include <string>
#include <vector>

#include "abmtk/model.hpp"

namespace abmtk {

// Full system state: one value per variable per instance, indexed by the
// Layout's instance numbering and each type's variable declaration order.
struct State {
    std::vector<std::vector<Value>> slots;

    const Value& get(int instance, int var) const { return slots[instance][var]; }
    void set(int instance, int var, const Value& v) { slots[instance][var] = v; }

    bool operator==(const State& o) const { return slots == o.slots; }
    bool operator!=(const State& o) const { return !(*this == o); }
};

State empty_state(const ModelSpec& spec, const Layout& layout);

// One "label.var = value" line per slot, instance then declaration order,
// rendered at domain precision. This is the trace init block and also the
// canonical content for state comparison in reports.
std::string render_state(const ModelSpec& spec, const Layout& layout, const State& s,
                         const std::string& indent);

} // namespace abmtk
