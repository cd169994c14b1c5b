#include "vmg/activation.hpp"

#include <cmath>
#include <stdexcept>

#include "vmg/ops.hpp"

namespace vmg {

Tensor activate(Activation act, const Tensor& x) {
  Tensor y = x;
  switch (act) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::kTanh:
      for (double& v : y.values()) v = std::tanh(v);
      break;
    case Activation::kCos:
      for (double& v : y.values()) v = std::cos(v);
      break;
  }
  return y;
}

Var activate(Activation act, Var x) {
  switch (act) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return relu(x);
    case Activation::kTanh:
      return tanh(x);
    case Activation::kCos:
      return cos(x);
  }
  return x;
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kCos:
      return "cos";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "cos") return Activation::kCos;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

}  // namespace vmg
