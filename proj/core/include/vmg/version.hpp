#pragma once

#include <string>
#include <utility>
#include <vector>

namespace vmg {

/// Library version, e.g. "0.1.0".
std::string version();

/// (component, version) pairs for the library, compiler and the numeric
/// dependencies compiled into it. Recorded in run manifests.
std::vector<std::pair<std::string, std::string>> build_info();

}  // namespace vmg
