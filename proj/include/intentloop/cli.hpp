#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "intentloop/error.hpp"
#include "intentloop/pipeline.hpp"
#include "intentloop/realtime.hpp"
#include "intentloop/session_io.hpp"
#include "intentloop/synth.hpp"

namespace intentloop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitPipeline = 4;

int exit_code(ErrorCategory category) noexcept;

/// Every tunable of a command, resolved from defaults, a key=value file and
/// command-line overrides (in that order).
struct RunConfig {
  SynthConfig synth;
  TrainConfig train;
  EngineConfig engine;

  /// `train.*` and `engine.*` keys, anything else goes to the generator.
  void apply(std::string_view key, std::string_view value);
  /// Lines of `key = value`; '#' starts a comment.
  void apply_file(const std::string& path);
  std::vector<std::pair<std::string, std::string>> options() const;
  std::string text() const;
};

/// seed, version, config hash and command name.
Provenance make_provenance(const RunConfig& config, std::string_view command);

/// Parses `file:PATH`, `tcp:HOST:PORT` or `mock`.
struct Endpoint {
  enum class Kind { file, tcp, mock } kind = Kind::mock;
  std::string path;
  std::string host;
  int port = 0;
};
Endpoint parse_endpoint(std::string_view text);

/// Entry point of the `intentloop` tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace intentloop
