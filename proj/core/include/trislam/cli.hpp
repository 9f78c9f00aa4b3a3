#pragma once

#include <string>
#include <vector>

namespace trislam {

// Entry point behind the `slam` tool: generate | run | eval | mesh.
// Returns 0 on success, 1 on runtime failure, 2 on usage errors.
int run_command(const std::vector<std::string>& args);

}  // namespace trislam
