#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fairelicit/serialization.hpp"

namespace fairelicit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitElicitation = 3;
inline constexpr int kExitPortBusy = 4;

struct CliStreams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

/// FAIR_ELICIT_<KEY>=value entries, with "__" separating nested keys; values parse as JSON when they can.
void apply_env_overrides(json& config, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> process_env();

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, CliStreams io,
            const std::map<std::string, std::string>& env = process_env());

}  // namespace fairelicit
