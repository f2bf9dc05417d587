#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrw/regeneration.hpp"
#include "rrw/walk.hpp"

namespace rrw {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid or incomplete experiment spec. `line` is 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class ExperimentKind { Speed, UpperTail, LowerTail, RegenStats, OracleCheck };

struct ExperimentSpec {
  std::string name;
  ExperimentKind kind = ExperimentKind::Speed;
  WalkConfig walk;  // b, scheme, horizon, seed
  std::vector<std::uint64_t> n_grid;
  std::size_t replicas = 1000;
  double epsilon = 0.1;
  /// Lower tail: fixed level, or (speed - epsilon) n when unset.
  std::optional<double> level;
  /// Known speed; estimated with a pilot run when unset.
  std::optional<double> speed;
  std::uint64_t speed_horizon = 100000;
  std::size_t speed_replicas = 20;
  TruncationParams truncation{};
  std::vector<double> tilts{0.0};
  std::size_t pilot_replicas = 2000;
  std::string family = "endpoint";  // endpoint | regenerated
  std::uint64_t lookahead = 200;
  bool audit = false;
  std::size_t iid_max_pairs = 5000;
  int iid_permutations = 1000;
  std::filesystem::path out_dir = "results";
  int workers = 0;  // 0 = default_workers()

  /// Checks every precondition the selected experiment relies on.
  void validate() const;
  /// Canonical JSON of the fields that determine results.
  nlohmann::json to_json() const;
  std::string hash() const;
};

std::string to_string(ExperimentKind k);

/// Flat "key = value" text with '#' comments, or a JSON object.
ExperimentSpec parse_spec(const std::string& text);
ExperimentSpec load_spec(const std::filesystem::path& path);

struct Preset {
  std::string name;
  std::string description;
  std::string spec;  // spec text in the key = value format
};

const std::vector<Preset>& presets();
std::optional<Preset> find_preset(const std::string& name);

struct ResultBundle {
  nlohmann::json summary;
  std::vector<std::string> notes;  // non-fatal warnings (zero-hit, ESS, ...)
  std::vector<std::filesystem::path> files;
};

/// Runs the experiment and writes summary.json, run_info.json, CSV tables and
/// two-column plot files into spec.out_dir.
ResultBundle run_experiment(const ExperimentSpec& spec);

}  // namespace rrw
