#include "vmg/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vmg {
namespace {

using nlohmann::json;

json tensor_json(std::span<const double> values, const Shape& shape) {
  return json{{"shape", shape}, {"data", std::vector<double>(values.begin(), values.end())}};
}

void read_into(const json& j, std::span<double> dst, const std::string& name) {
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != dst.size()) {
    throw std::runtime_error("checkpoint: tensor '" + name + "' has " + std::to_string(data.size()) +
                             " values, the config implies " + std::to_string(dst.size()));
  }
  std::copy(data.begin(), data.end(), dst.begin());
}

json config_json(const NetworkConfig& c) {
  return json{{"widths", c.widths},
              {"pseudo_counts", c.pseudo_counts},
              {"alpha_max", c.alpha_max},
              {"task", to_string(c.task)},
              {"zero_mean", c.zero_mean},
              {"prior", to_string(c.prior)},
              {"predictive", to_string(c.predictive)},
              {"activation", to_string(c.activation)},
              {"damping", c.damping},
              {"init_log_var", c.init_log_var},
              {"normalize_inputs", c.normalize_inputs},
              {"allow_saturated_pseudo", c.allow_saturated_pseudo}};
}

NetworkConfig config_from(const json& j) {
  NetworkConfig c;
  c.widths = j.at("widths").get<std::vector<std::size_t>>();
  c.pseudo_counts = j.at("pseudo_counts").get<std::vector<std::size_t>>();
  c.alpha_max = j.at("alpha_max").get<std::vector<double>>();
  c.task = parse_task(j.at("task").get<std::string>());
  c.zero_mean = j.at("zero_mean").get<bool>();
  c.prior = parse_prior_kind(j.at("prior").get<std::string>());
  c.predictive = parse_predictive_kind(j.at("predictive").get<std::string>());
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.damping = j.at("damping").get<double>();
  c.init_log_var = j.at("init_log_var").get<double>();
  c.normalize_inputs = j.at("normalize_inputs").get<bool>();
  c.allow_saturated_pseudo = j.value("allow_saturated_pseudo", false);
  return c;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  VMGNetwork net = checkpoint.network;
  json params = json::object();
  for (const auto& p : parameters(net)) params[p.name] = tensor_json(p.values, {p.values.size()});
  json stats = json::object();
  stats["input_mean"] = tensor_json(net.input_mean.values(), net.input_mean.shape());
  stats["input_std"] = tensor_json(net.input_std.values(), net.input_std.shape());
  stats["target_mean"] = tensor_json(net.target_mean.values(), net.target_mean.shape());
  stats["target_std"] = tensor_json(net.target_std.values(), net.target_std.shape());
  json doc{{"format", "vmg-checkpoint"},
           {"version", kCheckpointVersion},
           {"config", config_json(net.config)},
           {"parameters", params},
           {"statistics", stats},
           {"rng_state", checkpoint.rng_state}};
  return doc.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  if (doc.value("format", "") != "vmg-checkpoint") throw std::runtime_error("checkpoint: not a vmg checkpoint");
  const int version = doc.value("version", 0);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  try {
    Checkpoint out{allocate_network(config_from(doc.at("config"))), doc.value("rng_state", "")};
    const json& params = doc.at("parameters");
    for (auto& p : parameters(out.network)) {
      if (!params.contains(p.name)) throw std::runtime_error("checkpoint: missing parameter '" + p.name + "'");
      read_into(params.at(p.name), p.values, p.name);
    }
    const json& stats = doc.at("statistics");
    read_into(stats.at("input_mean"), out.network.input_mean.values(), "input_mean");
    read_into(stats.at("input_std"), out.network.input_std.values(), "input_std");
    read_into(stats.at("target_mean"), out.network.target_mean.values(), "target_mean");
    read_into(stats.at("target_std"), out.network.target_std.values(), "target_std");
    return out;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: invalid config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out << checkpoint_to_json(checkpoint) << '\n';
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng rng_from_state(const std::string& state) {
  Rng rng;
  std::istringstream in(state);
  in >> rng;
  if (!in) throw std::runtime_error("checkpoint: malformed RNG state");
  return rng;
}

}  // namespace vmg
