// rrw: run reinforced-walk experiments from spec files or built-in presets.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "rrw/experiment.hpp"
#include "rrw/oracle.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitResource = 3;

rrw::ExperimentSpec resolve(const std::string& arg) {
  if (!std::filesystem::exists(arg)) {
    if (auto p = rrw::find_preset(arg)) {
      auto spec = rrw::parse_spec(p->spec);
      spec.name = p->name;
      return spec;
    }
  }
  return rrw::load_spec(arg);
}

int execute(const std::string& arg, int workers, const std::string& out,
            const std::optional<std::uint64_t>& seed, bool force_oracle) {
  try {
    auto spec = resolve(arg);
    if (force_oracle) spec.kind = rrw::ExperimentKind::OracleCheck;
    if (workers > 0) spec.workers = workers;
    if (!out.empty()) spec.out_dir = out;
    if (seed) spec.walk.seed = *seed;
    const auto bundle = rrw::run_experiment(spec);
    for (const auto& note : bundle.notes) std::cerr << "note: " << note << '\n';
    std::cout << "wrote " << bundle.files.size() << " files to " << spec.out_dir.string() << '\n';
    return 0;
  } catch (const rrw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rrw::ResourceLimitError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return kExitResource;
  } catch (const rrw::oracle::StateExplosionError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforced random walks on b-ary trees: speeds, regeneration, tail rates"};
  app.require_subcommand(1);

  int workers = 0;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string spec_path;

  auto* run = app.add_subcommand("run", "Run an experiment spec file or a named preset");
  run->add_option("spec", spec_path, "Spec file path or preset name")->required();
  run->add_option("--workers", workers, "Worker threads (default: $RRW_WORKERS or all cores)");
  run->add_option("--out", out, "Output directory");
  run->add_option("--seed", seed, "Override the spec seed");

  auto* oracle = app.add_subcommand("oracle-check", "Compare Monte Carlo against exact enumeration");
  oracle->add_option("spec", spec_path, "Spec file path or preset name")->required();
  oracle->add_option("--workers", workers, "Worker threads");
  oracle->add_option("--out", out, "Output directory");
  oracle->add_option("--seed", seed, "Override the spec seed");

  auto* list = app.add_subcommand("list", "List built-in presets");
  bool show_spec = false;
  list->add_flag("--spec", show_spec, "Print each preset's spec text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*list) {
    for (const auto& p : rrw::presets()) {
      std::cout << p.name << "\t" << p.description << '\n';
      if (show_spec) std::cout << p.spec << '\n';
    }
    return 0;
  }
  return execute(spec_path, workers, out, seed, oracle->parsed());
}
