#pragma once

#include <string>
#include <string_view>

#include "vmg/graph.hpp"
#include "vmg/tensor.hpp"

namespace vmg {

enum class Activation { kIdentity, kRelu, kTanh, kCos };

Tensor activate(Activation act, const Tensor& x);
Var activate(Activation act, Var x);

std::string to_string(Activation act);
/// Parses "identity", "relu", "tanh" or "cos".
Activation parse_activation(std::string_view name);

}  // namespace vmg
