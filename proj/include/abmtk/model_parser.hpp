#pragma once

#include <optional>
#include <string>

#include "abmtk/diagnostics.hpp"
#include "abmtk/model.hpp"

namespace abmtk {

// Reads the model text format. Returns nullopt and fills diags on any
// problem; on success the result still needs validate_model for semantic
// checks (the parser only enforces shape).
std::optional<ModelSpec> parse_model(const std::string& text, Diagnostics& diags);

// Parse + validate + build; throws RuntimeError with formatted diagnostics.
ModelSpec load_model_file(const std::string& path);

// Domain syntax shared with the pattern and param readers:
// bool | int[lo,hi] | dec[lo,hi]@digits
std::optional<ValueDomain> parse_domain(Tokenizer& toks, Diagnostics& diags);

} // namespace abmtk
