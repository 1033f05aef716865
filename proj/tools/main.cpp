#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "runner.hpp"
#include "scenario.hpp"

namespace fs = std::filesystem;
using namespace tabb::cli;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 1;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Parses a config, printing diagnostics; returns nothing on failure.
std::optional<ScenarioConfig> load(const fs::path& path) {
  const ParseResult r = parse_config(read_file(path));
  for (const auto& d : r.diagnostics) std::cerr << d.format(path.string()) << '\n';
  return r.config;
}

/// Checks that the session file a config names can be opened.
std::vector<Diagnostic> check_inputs(const ScenarioConfig& c, const fs::path& config_dir) {
  std::vector<Diagnostic> out;
  auto check = [&](const std::string& field, const std::string& path) {
    if (!std::ifstream(resolve(config_dir, path))) out.push_back({0, field, "cannot open session file " + path});
  };
  if (c.kind == ScenarioKind::fit) check("fit.sessions", c.fit.sessions);
  if (c.kind == ScenarioKind::new_arm) check("new_arm.sessions", c.new_arm.sessions);
  return out;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<unsigned> threads;
};

fs::path output_directory(const Globals& g, const ScenarioConfig& c, const fs::path& config_dir) {
  if (!g.out_dir.empty()) return g.out_dir;
  if (!c.output_directory.empty()) return resolve(config_dir, c.output_directory);
  if (const char* env = std::getenv("TABB_OUT_DIR"); env && *env) return env;
  return "out";
}

int run(const Globals& g, const fs::path& path, std::optional<ScenarioKind> expected) {
  auto config = load(path);
  if (!config) return kConfigError;
  if (expected && config->kind != *expected) {
    std::cerr << path.string() << ": scenario kind is '" << kind_name(config->kind) << "' but the subcommand is '"
              << kind_name(*expected) << "'\n";
    return kConfigError;
  }
  if (g.seed) config->seed = *g.seed;
  const fs::path config_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const auto missing = check_inputs(*config, config_dir);
  for (const auto& d : missing) std::cerr << d.format(path.string()) << '\n';
  if (!missing.empty()) return kConfigError;

  RunOptions opts;
  opts.out_dir = output_directory(g, *config, config_dir);
  opts.config_dir = config_dir;
  opts.threads = g.threads;
  const RunManifest m = run_scenario(*config, opts);
  for (const auto& f : m.files) std::cout << (opts.out_dir / f.path).string() << " (" << f.rows << " rows)\n";
  std::cout << (opts.out_dir / "manifest.json").string() << '\n';
  return 0;
}

int validate(const fs::path& path) {
  auto config = load(path);
  if (!config) return kConfigError;
  const auto missing = check_inputs(*config, path.has_parent_path() ? path.parent_path() : fs::path("."));
  for (const auto& d : missing) std::cerr << d.format(path.string()) << '\n';
  if (!missing.empty()) return kConfigError;
  std::cout << path.string() << ": ok (" << kind_name(config->kind) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-armed Bernoulli bandit experiments: simulation, moment dynamics and model fitting."};
  app.set_version_flag("--version", TABB_VERSION);
  app.require_subcommand(1);

  Globals g;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed")->group("Global");
  app.add_option("--out-dir", g.out_dir, "Output directory (default: config, then $TABB_OUT_DIR, then ./out)")
      ->group("Global");
  auto* threads_opt =
      app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u))->group("Global");

  std::string config_path;
  std::optional<ScenarioKind> expected;
  bool validate_only = false;

  auto add = [&](const std::string& name, const std::string& help, std::optional<ScenarioKind> kind, bool check) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->add_option("config", config_path, "Scenario config file")->required();
    sub->callback([&, kind, check] {
      expected = kind;
      validate_only = check;
    });
  };
  add("simulate", "Simulate an agent ensemble", ScenarioKind::simulate, false);
  add("propagate", "Propagate the moment recursions", ScenarioKind::propagate, false);
  add("sweep-delta", "Sweep the steady-state Delta over the x-curve", ScenarioKind::sweep_delta, false);
  add("switch-rate", "Ensemble action-switching rate", ScenarioKind::switch_rate, false);
  add("fit", "Fit models to a session file", ScenarioKind::fit, false);
  add("recover", "Fit biased Q-learning to simulated agents", ScenarioKind::recover, false);
  add("new-arm", "Third-arm generalisation curve", ScenarioKind::new_arm, false);
  add("run", "Run whatever scenario the config declares", std::nullopt, false);
  add("validate", "Check a config without running it", std::nullopt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (*seed_opt) g.seed = seed;
  if (*threads_opt) g.threads = threads;

  try {
    return validate_only ? validate(config_path) : run(g, config_path, expected);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
