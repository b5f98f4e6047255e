#pragma once

#include <string>
#include <vector>

namespace abmtk {

// Example models bundled into the command line tool. Each carries its model
// source and a companion pattern file; both parse and check cleanly against
// each other (the test suite holds them to that).
struct Demo {
    std::string name;
    std::string summary; // one line for listings
    std::string model;
    std::string patterns;
};

const std::vector<Demo>& demo_models();
const Demo* find_demo(const std::string& name);

} // namespace abmtk
