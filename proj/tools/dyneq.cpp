// dyneq: command-line front end.
//
//   dyneq simulate        coupled two-particle run -> trajectory.csv, manifest.json
//   dyneq witness         witness sweep -> witness.csv, manifest.json
//   dyneq nash            equilibrium search on a game file -> nash.txt
//   dyneq feedback-check  finite-difference oracle for the feedback fields
//   dyneq vink            lattice-walker equivariance experiment
//
// Exit codes: 0 success, 2 configuration error, 3 numerical abort.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dyneq/checks.hpp"
#include "dyneq/coupled_sim.hpp"
#include "dyneq/error.hpp"
#include "dyneq/io.hpp"
#include "dyneq/nash.hpp"
#include "dyneq/witness.hpp"

namespace fs = std::filesystem;
using namespace dyneq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> steps;
  std::optional<double> dt;
  std::optional<std::string> mode;
  std::optional<std::string> f2_variant;
  std::optional<std::string> feedback_sign;
};

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

io::KeyValues config_file(const std::string& path) {
  return path.empty() ? io::KeyValues{} : io::read_key_values(path);
}

// Flags override file keys; --steps is applied after dt is known.
SimulationConfig resolve_simulation(const CommonOptions& o) {
  io::KeyValues kv = config_file(o.config);
  if (o.seed) kv["seed"] = std::to_string(*o.seed);
  if (o.dt) kv["dt"] = io::format_double(*o.dt);
  if (o.mode) kv["mode"] = *o.mode;
  if (o.f2_variant) kv["f2_variant"] = *o.f2_variant;
  if (o.feedback_sign) kv["feedback_sign"] = *o.feedback_sign;
  SimulationConfig cfg = io::apply_simulation_config({}, kv);
  if (o.steps) {
    if (*o.steps == 0) throw ConfigError("steps", "must be positive");
    cfg.total_time = static_cast<double>(*o.steps) * cfg.dt;
    validated(cfg);
  }
  return cfg;
}

int run_simulate(const CommonOptions& o, const std::string& cmd) {
  const SimulationConfig cfg = resolve_simulation(o);
  io::RunManifest manifest;
  manifest.command = cmd;
  manifest.start_time = io::utc_timestamp();
  CoupledSimulation sim(cfg);
  std::string numerical_error;
  try {
    sim.run();
  } catch (const ProbabilityOverflowError& e) {
    numerical_error = e.what();
  }
  RunRecord record = sim.take_record();
  if (!numerical_error.empty() && record.abort_status.empty())
    record.abort_status = numerical_error;
  manifest.end_time = io::utc_timestamp();
  io::emit_run(record, manifest, o.out);
  std::cout << "steps " << record.steps.size() << " of " << cfg.steps()
            << ", directions " << record.direction1 << " " << record.direction2
            << "\n";
  if (record.first_interaction_time)
    std::cout << "first interaction t=" << *record.first_interaction_time << "\n";
  if (record.first_impulse_time)
    std::cout << "first impulse t=" << *record.first_impulse_time << "\n";
  std::cout << "wrote " << (fs::path(o.out) / "trajectory.csv").string() << "\n";
  if (record.aborted()) {
    std::cerr << "aborted: " << record.abort_status << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int run_witness(const CommonOptions& o, const std::string& cmd) {
  const witness::WitnessConfig cfg =
      io::apply_witness_config({}, config_file(o.config));
  io::RunManifest manifest;
  manifest.command = cmd;
  manifest.start_time = io::utc_timestamp();
  const auto curves = witness::sweep_witness(cfg);
  manifest.end_time = io::utc_timestamp();
  fs::create_directories(o.out);
  std::ostringstream csv;
  io::write_witness_csv(csv, curves);
  io::write_text(fs::path(o.out) / "witness.csv", csv.str());
  manifest.resolved_config = io::emit_witness_config(cfg);
  manifest.data_files.push_back("witness.csv");
  for (const auto& c : curves) {
    nlohmann::ordered_json s;
    s["gamma"] = c.gamma;
    s["max_W"] = c.max_value();
    s["exceedance_count"] = c.exceedance_count();
    manifest.summary["curves"].push_back(s);
    std::cout << "gamma " << io::format_double(c.gamma) << "  max W "
              << io::format_double(c.max_value()) << "  points above 1: "
              << c.exceedance_count() << "\n";
  }
  io::write_text(fs::path(o.out) / "manifest.json",
                 io::to_json(manifest).dump(2) + "\n");
  return kExitOk;
}

int run_nash(const CommonOptions& o, const std::string& game_path,
             const nash::SearchOptions& search, const std::string& cmd) {
  const std::string path = game_path.empty() ? o.config : game_path;
  if (path.empty()) throw ConfigError("game", "no game file given");
  std::ifstream in(path);
  if (!in) throw ConfigError("game", "cannot open " + path);
  nash::BimatrixGame game = [&] {
    try {
      return nash::read_game(in);
    } catch (const PreconditionError& e) {
      throw ConfigError("game", e.what());
    }
  }();

  io::RunManifest manifest;
  manifest.command = cmd;
  manifest.start_time = io::utc_timestamp();
  const auto result = nash::find_equilibrium(game, search);
  const auto check = nash::best_response_check(result.profile, game, 1e-6);
  std::ostringstream report;
  report << "game " << game.rows() << "x" << game.cols() << "\n"
         << "search status " << nash::to_string(result.status) << " after "
         << result.iterations << " iterations\n"
         << "profile " << io::format_profile(result.profile) << "\n"
         << "max gain " << io::format_double(result.max_gain) << "\n"
         << "best response " << (check.player_one ? "yes" : "no") << " "
         << (check.player_two ? "yes" : "no") << "\n";
  if (game.rows() <= 3 && game.cols() <= 3) {
    const auto all = nash::enumerate_equilibria_small(game);
    report << "support enumeration " << all.equilibria.size()
           << " equilibria" << (all.degenerate ? " (degenerate game)" : "")
           << "\n";
    for (const auto& p : all.equilibria)
      report << "  " << io::format_profile(p) << "\n";
  }
  manifest.end_time = io::utc_timestamp();
  fs::create_directories(o.out);
  io::write_text(fs::path(o.out) / "nash.txt", report.str());
  manifest.resolved_config = "game = " + path + "\n";
  manifest.data_files.push_back("nash.txt");
  manifest.summary["status"] = nash::to_string(result.status);
  manifest.summary["max_gain"] = result.max_gain;
  io::write_text(fs::path(o.out) / "manifest.json",
                 io::to_json(manifest).dump(2) + "\n");
  std::cout << report.str();
  return kExitOk;
}

int run_feedback_check(const CommonOptions& o, std::size_t samples) {
  const SimulationConfig base = resolve_simulation(o);
  const std::uint64_t seed = o.seed.value_or(base.seed);
  const auto points = checks::feedback_samples(samples, seed);
  bool ok = true;
  std::cout << "softening  samples  fd_rel_error  printed_gap  printed_rel_gap\n";
  for (double eps : {0.1, 0.5, 1.0}) {
    const GravityParams params{base.constants, eps};
    const auto r = checks::feedback_oracle(params, points);
    ok = ok && r.max_relative_error < 1e-5;
    std::printf("%9.3g  %7zu  %12.3e  %11.3e  %15.3e\n", eps, r.samples,
                r.max_relative_error, r.max_printed_gap,
                r.max_printed_relative_gap);
  }
  const GravityParams bare{PhysicalConstants{}, 0.0};
  const checks::FeedbackSample s{1.0, 2.0, 0.0};
  std::cout << "point x-x2=1, x1-x2=2, eps=0: analytic "
            << checks::second_order_point(s, bare, SecondOrderVariant::analytic)
            << ", printed "
            << checks::second_order_point(s, bare, SecondOrderVariant::printed)
            << "\n"
            << (ok ? "oracle passed" : "oracle FAILED") << " (tolerance 1e-5)\n";
  return ok ? kExitOk : kExitNumerical;
}

int run_vink(const CommonOptions& o, checks::EquivarianceConfig cfg) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.dt) cfg.dt = *o.dt;
  if (o.steps) cfg.total_time = static_cast<double>(*o.steps) * cfg.dt;
  if (cfg.walkers == 0) throw ConfigError("walkers", "must be positive");
  if (cfg.bins == 0) throw ConfigError("bins", "must be positive");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt", "must be positive");
  const auto r = checks::vink_equivariance(cfg);
  std::cout << "walkers " << cfg.walkers << ", steps " << r.steps
            << ", bins " << cfg.bins << "\n"
            << "walker mean " << r.walker_mean << ", density mean "
            << r.density_mean << "\n"
            << "total variation " << r.total_variation << "\n";
  return r.total_variation < 0.05 ? kExitOk : kExitNumerical;
}

void add_common(CLI::App* sub, CommonOptions& o, bool sim_flags) {
  sub->add_option("--config", o.config, "key = value configuration file");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  if (!sim_flags) return;
  sub->add_option("--steps", o.steps, "number of time steps");
  sub->add_option("--dt", o.dt, "time step");
  sub->add_option("--mode", o.mode, "guidance|vink");
  sub->add_option("--f2-variant", o.f2_variant, "printed|analytic");
  sub->add_option("--feedback-sign", o.feedback_sign, "+|-");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-particle conditional wave function simulator"};
  app.set_version_flag("--version", std::string(io::kVersion));
  app.require_subcommand(1);

  CommonOptions sim_opts, wit_opts, nash_opts, fb_opts, vink_opts;
  auto* simulate = app.add_subcommand("simulate", "coupled run");
  add_common(simulate, sim_opts, true);

  auto* wit = app.add_subcommand("witness", "witness sweep over R");
  add_common(wit, wit_opts, false);

  std::string game_path;
  nash::SearchOptions search;
  auto* nsh = app.add_subcommand("nash", "equilibrium of a bimatrix game");
  add_common(nsh, nash_opts, false);
  nsh->add_option("game", game_path, "game file (A, blank line, B)");
  nsh->add_option("--tol", search.tol)->capture_default_str();
  nsh->add_option("--max-iter", search.max_iter)->capture_default_str();
  nsh->add_option("--damping", search.damping)->capture_default_str();

  std::size_t samples = 100;
  auto* fb = app.add_subcommand("feedback-check",
                                "finite-difference oracle for the feedback fields");
  add_common(fb, fb_opts, true);
  fb->add_option("--samples", samples)->capture_default_str();

  checks::EquivarianceConfig vcfg;
  auto* vk = app.add_subcommand("vink", "lattice-walker equivariance test");
  add_common(vk, vink_opts, true);
  vk->add_option("--walkers", vcfg.walkers)->capture_default_str();
  vk->add_option("--bins", vcfg.bins)->capture_default_str();
  vk->add_option("--time", vcfg.total_time)->capture_default_str();
  vk->add_option("--sigma", vcfg.sigma)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string cmd = command_line(argc, argv);
  try {
    if (*simulate) return run_simulate(sim_opts, cmd);
    if (*wit) return run_witness(wit_opts, cmd);
    if (*nsh) return run_nash(nash_opts, game_path, search, cmd);
    if (*fb) return run_feedback_check(fb_opts, samples);
    if (*vk) return run_vink(vink_opts, vcfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dyneq::Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
