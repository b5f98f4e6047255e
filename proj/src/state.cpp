#include "abmtk/state.hpp"

#include <sstream>

namespace abmtk {

State empty_state(const ModelSpec& spec, const Layout& layout) {
    State s;
    s.slots.resize(layout.total);
    for (int i = 0; i < layout.total; ++i)
        s.slots[i].resize(spec.types[layout.type_of[i]].vars.size());
    return s;
}

std::string render_state(const ModelSpec& spec, const Layout& layout, const State& s,
                         const std::string& indent) {
    std::ostringstream out;
    for (int i = 0; i < layout.total; ++i) {
        const AgentType& type = spec.types[layout.type_of[i]];
        for (size_t v = 0; v < type.vars.size(); ++v)
            out << indent << instance_label(spec, layout, i) << "." << type.vars[v].name
                << " = " << type.vars[v].domain.render(s.slots[i][v]) << "\n";
    }
    return out.str();
}

} // namespace abmtk
