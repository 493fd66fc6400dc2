#include "atpg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "atpg/random.hpp"

namespace atpg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

double parseDouble(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError("config: " + key + " expects a number, got '" + raw + "'");
  return x;
}

template <typename Int>
Int parseInt(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  Int x = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size())
    throw ConfigError("config: " + key + " expects an integer, got '" + raw + "'");
  return x;
}

std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> assign;
  std::function<std::string(const RunConfig&)> show;
};

#define ATPG_DOUBLE(name, member)                                                                              \
  {                                                                                                            \
    name, Field {                                                                                              \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parseDouble(k, v); },          \
          [](const RunConfig& c) { return num(c.member); }                                                     \
    }                                                                                                          \
  }
#define ATPG_INT(name, member)                                                                                 \
  {                                                                                                            \
    name, Field {                                                                                              \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parseInt<int>(k, v); },        \
          [](const RunConfig& c) { return std::to_string(c.member); }                                          \
    }                                                                                                          \
  }

// Ordered by section so the echoed file groups keys naturally.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = {
      ATPG_DOUBLE("env.tau", env.tau),
      ATPG_INT("env.horizon_base", env.horizon_base),
      ATPG_INT("env.horizon_per_target", env.horizon_per_target),
      ATPG_DOUBLE("env.box_base", env.box_base),
      ATPG_DOUBLE("env.box_per_target", env.box_per_target),
      ATPG_DOUBLE("env.xi_bound", env.xi_bound),
      ATPG_DOUBLE("env.bias_bound", env.bias_bound),
      ATPG_DOUBLE("env.init_info", env.init_info),
      {"env.eval_reward",
       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.env.eval_reward = parseRewardAccounting(trim(v)); },
             [](const RunConfig& c) { return toString(c.env.eval_reward); }}},
      ATPG_DOUBLE("fov.depth", env.fov.depth),
      ATPG_DOUBLE("fov.half_angle", env.fov.half_angle),
      ATPG_DOUBLE("probit.kappa", env.probit.kappa),
      ATPG_INT("model.state_dim", state_dim),
      ATPG_DOUBLE("model.sensor_std", env.sensor_std),
      ATPG_DOUBLE("model.motion_std", env.motion_std),
      ATPG_INT("policy.max_targets", max_targets),
      ATPG_INT("policy.pose_hidden", widths.pose_hidden),
      ATPG_INT("policy.embedding", widths.embedding),
      ATPG_INT("policy.target_hidden", widths.target_hidden),
      ATPG_INT("policy.output_hidden", widths.output_hidden),
      ATPG_DOUBLE("policy.alpha", alpha),
      ATPG_DOUBLE("policy.v_min", bounds.v_min),
      ATPG_DOUBLE("policy.v_max", bounds.v_max),
      ATPG_DOUBLE("policy.omega_min", bounds.omega_min),
      ATPG_DOUBLE("policy.omega_max", bounds.omega_max),
      ATPG_INT("trainer.epochs", trainer.epochs),
      ATPG_INT("trainer.episodes_per_batch", trainer.episodes_per_batch),
      ATPG_DOUBLE("trainer.learning_rate", trainer.learning_rate),
      ATPG_DOUBLE("trainer.momentum", trainer.momentum),
      ATPG_DOUBLE("trainer.clip_norm", trainer.clip_norm),
      ATPG_INT("trainer.targets_min", trainer.targets_min),
      ATPG_INT("trainer.targets_max", trainer.targets_max),
      {"trainer.motion",
       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.trainer.motion = parseMotion(trim(v)); },
             [](const RunConfig& c) { return toString(c.trainer.motion); }}},
      ATPG_INT("trainer.eval_every", trainer.eval_every),
      ATPG_INT("trainer.eval_episodes", trainer.eval_episodes),
      {"trainer.seed",
       Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.trainer.seed = parseInt<std::uint64_t>(k, v); },
             [](const RunConfig& c) { return std::to_string(c.trainer.seed); }}},
  };
  return f;
}

#undef ATPG_DOUBLE
#undef ATPG_INT

}  // namespace

void RunConfig::validate() const {
  try {
    env.validate();
    bounds.validate();
    trainer.validate();
    if (state_dim != 2) throw ConfigError("config: model.state_dim must be 2 (planar targets)");
    if (max_targets < 1) throw ConfigError("config: policy.max_targets must be >= 1");
    if (trainer.targets_max > max_targets)
      throw ConfigError("config: trainer.targets_max exceeds policy.max_targets");
    if (!(alpha > 0.0)) throw ConfigError("config: policy.alpha must be positive");
    if (widths.pose_hidden < 1 || widths.embedding < 1 || widths.target_hidden < 1 || widths.output_hidden < 1)
      throw ConfigError("config: policy widths must be >= 1");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

PolicyParams RunConfig::initialParams() const {
  return PolicyParams::initialize(layout(), alpha, streamSeed(trainer.seed, 0, StreamTag::PolicyInit));
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> k;
  for (const auto& [name, _] : fields()) k.push_back(name);
  return k;
}

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
  for (const auto& [name, field] : fields())
    if (name == dotted_key) {
      try {
        field.assign(*this, name, value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw ConfigError("config: " + name + ": " + e.what());
      }
      return;
    }
  throw ConfigError("config: unknown key '" + dotted_key + "'");
}

std::string RunConfig::toIni() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [name, field] : fields()) {
    const auto dot = name.find('.');
    const std::string sec = name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << name.substr(dot + 1) << " = " << field.show(*this) << '\n';
  }
  return os.str();
}

RunConfig parseConfig(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty() && body.empty())
      throw ConfigError("config: key '" + section + "' appears outside any section");
    for (const auto& [key, value] : body) c.set(section + "." + key, value.data());
  }
  for (const auto& [key, value] : overrides) c.set(key, value);
  c.validate();
  return c;
}

RunConfig loadConfig(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parseConfig(buf.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::pair<std::string, std::string> parseOverride(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("config: override '" + assignment + "' is not key=value");
  return {trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1))};
}

}  // namespace atpg
