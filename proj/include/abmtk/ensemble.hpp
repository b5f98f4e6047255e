#pragma once

#include <map>

#include "abmtk/enumerate.hpp"
#include "abmtk/matcher.hpp"
#include "abmtk/stats.hpp"

namespace abmtk {

// How one model parameter varies across the runs of a plan.
struct ParamPlan {
    enum class Kind { Constant, Uniform, Grid };

    std::string name;
    Kind kind = Kind::Constant;
    Value constant;          // Constant
    std::vector<Value> grid; // Grid, in sweep order
};

// A sampling plan: how many runs, how long, how seeded, and how parameters
// are drawn. Grid parameters form a cartesian product in declaration order
// (first parameter outermost); run i lands in cell i mod cell-count, so
// runs = cell-count gives exactly one run per cell.
struct SamplingPlan {
    long long runs = 1;
    int horizon = 1;
    uint64_t base_seed = 0;
    std::vector<ParamPlan> params;
};

// Run i executes under derive_run_seed lane 2i and draws its uniform plan
// parameters under lane 2i + 1, so engine consumption never shifts the
// parameter draws of later runs.

struct TableRow {
    long long run = 0;
    uint64_t seed = 0;
    std::vector<Value> params; // aligned with ClassificationTable::param_names
    std::string error;         // empty when the run succeeded
    std::vector<bool> member;  // per pattern
    // Per pattern: instantiation counts. State patterns carry one entry per
    // step (0..horizon); event and complex patterns carry a single entry,
    // the trace-wide embedding count.
    std::vector<std::vector<uint64_t>> counts;
    std::vector<std::vector<double>> macros; // per macro, steps 0..horizon
};

struct ClassificationTable {
    std::string model_name;
    uint64_t model_hash = 0;
    int horizon = 0;
    std::vector<std::string> param_names;
    std::vector<std::string> pattern_names;
    std::vector<bool> pattern_is_state; // parallel to pattern_names
    std::vector<std::string> macro_names;
    std::vector<TableRow> rows;

    int pattern_index(const std::string& name) const;
    int macro_index(const std::string& name) const;
};

// Runs the plan and classifies every trace against every pattern and macro
// in the file. Row i is fully determined by (spec, plan, i); run failures
// are recorded in the row's error field, never thrown. Plan-level problems
// (unknown parameter, value outside its domain, a free parameter the plan
// leaves unset) throw RuntimeError.
ClassificationTable sample(const ModelSpec& spec, const SamplingPlan& plan,
                           const PatternFile& patterns);

struct FrequencyEstimate {
    std::string pattern;
    uint64_t matched = 0;
    uint64_t n = 0;
    double estimate = 0;
    Interval ci; // Wilson 95%
};

// Occurrence frequency of a pattern across the table's successful rows
// (failed runs are excluded from both sides of the ratio).
FrequencyEstimate frequency(const ClassificationTable& table, const std::string& pattern);

// Exact occurrence probability of each pattern: enumerate every reachable
// system under the bound and sum the weights of those whose trace matches.
// Weights cover free-parameter choice, random initialization, schedule
// permutations and bernoulli branches, and sum to 1.
std::map<std::string, Rational> exact_frequencies(const ModelSpec& spec, const Layout& layout,
                                                  const std::map<std::string, Value>& overrides,
                                                  int horizon, unsigned long long bound,
                                                  const PatternFile& patterns);

// Tab-separated text with a meta line and a typed header; bit-exact for
// identical tables (doubles at %.17g round-trip).
std::string write_table(const ClassificationTable& table);
ClassificationTable parse_table(const std::string& text);
void save_table_file(const ClassificationTable& table, const std::string& path);
ClassificationTable load_table_file(const std::string& path);

} // namespace abmtk
