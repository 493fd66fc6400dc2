#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "atpg/policy.hpp"
#include "atpg/sim.hpp"
#include "atpg/trainer.hpp"

namespace atpg {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a run needs, merged from an INI-style file and overrides.
///
/// Sections: [env] [fov] [probit] [model] [policy] [trainer]. Keys are
/// listed by RunConfig::keys(); anything else is rejected.
struct RunConfig {
  EnvConfig env;
  int state_dim = 2;
  int max_targets = 8;
  PolicyWidths widths;
  double alpha = 4.0;
  ControlBounds bounds;
  TrainConfig trainer;

  void validate() const;
  PolicyLayout layout() const { return PolicyLayout::make(state_dim, max_targets, widths); }
  /// Initial parameters for a training run, derived from the trainer seed.
  PolicyParams initialParams() const;

  /// "section.key" names accepted by set().
  static std::vector<std::string> keys();
  /// Assigns one value with typed parsing; throws ConfigError.
  void set(const std::string& dotted_key, const std::string& value);
  /// INI text of the effective configuration (17 significant digits).
  std::string toIni() const;
};

/// Parses INI text into a RunConfig starting from defaults, then applies
/// the overrides in order. Validates the result.
RunConfig parseConfig(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig loadConfig(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Splits "section.key=value".
std::pair<std::string, std::string> parseOverride(const std::string& assignment);

}  // namespace atpg
