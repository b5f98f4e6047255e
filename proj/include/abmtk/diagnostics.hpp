#pragma once

#include <string>
#include <vector>

namespace abmtk {

/// A positioned problem report from a parser or validator. Line/column are
/// 1-based; 0 means "no position" (whole-input problems).
struct Diagnostic {
    int line = 0;
    int col = 0;
    std::string message;
};

using Diagnostics = std::vector<Diagnostic>;

std::string format_diagnostics(const Diagnostics& diags);

/// Unrecoverable evaluation/runtime failure (domain violation, unbound
/// parameter, bad arithmetic). Parsers never throw this; they return
/// Diagnostics instead.
class RuntimeError : public std::exception {
public:
    explicit RuntimeError(std::string message) : message_(std::move(message)) {}
    const char* what() const noexcept override { return message_.c_str(); }

private:
    std::string message_;
};

} // namespace abmtk
