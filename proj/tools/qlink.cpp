// qlink: deterministic simulator for a jamming-protected optical link
// built on photon-pair interference. Subcommands map to the experiments
// the toolkit reproduces: message transfer, image transfer, SNR sweeps,
// eye diagrams and the security check.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qlink/runner.hpp"
#include "qlink/scenario.hpp"

namespace {

constexpr const char* kScenarioHelp = R"(Scenario keys (key=value, # comments):
  link.n_quantum        pairs per second per source (1/s)     [required]
  link.phi              pump phase at the second source (rad) [0]
  link.phi_a            idler-path phase (rad)                [0]
  link.phi_b            signal-path phase, Bob's (rad)        [0]
  link.eta_det          Alice detection efficiency (0..1)     [1]
  link.t_meas           measurement time (s)                  [0.05]
  link.pump_rate        pump photons per second (1/s)         [2e16]
  actors.alpha_sq       Bob's deviation probability (0..1)    [0]
  actors.alpha_e_sq     Eve's tap probability (0..1)          [0]
  actors.eta_det_e      Eve detection efficiency (0..1)       [1]
  actors.n_class        jamming photons per second (1/s)      [0]
  actors.eta_losses_sq  link leakage probability (0..1)       [0]
  encoding.kind         amplitude | phase                     [amplitude]
  encoding.bit_duration seconds per bit                       [1]
  encoding.rise_time    keying ramp duration (s)              [0]
  payload.text          ASCII message (simulate/send-message)
  payload.image         PGM file path (send-image)
  payload.eye_bits      bits in the 1010... eye pattern       [60]
  image.pixel_pitch     object pixel pitch (mm)               [0.5]
  image.scan_speed      horizontal scan speed (mm/s)          [1]
  image.dwell           integration per scan event (s)        [0.05]
  image.calib_events    reference events per scan edge        [20]
  image.null_trials     random-matrix audit trials            [100000]
  sampling.bin_duration detector bin (s)                      [0.05]
  sampling.seed         64-bit RNG seed                       [required]
  sampling.dark_rate    background counts (1/s)               [0]
  sweep.min_ratio       first N_class/N_quantum point         [1]
  sweep.max_ratio       last point                            [1e5]
  sweep.points          log-spaced point count                [11]
  sweep.blocks          measurement blocks per level          [20]
  outputs.dir           output directory                      [qlink_out]

Environment: QLINK_WORKERS bounds parallel sweep evaluation (default:
number of processors). Exit codes: 0 ok, 2 config error, 3 runtime error.)";

struct Options {
  std::string scenario_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
};

qlink::Scenario load(const Options& opt) {
  auto scenario = qlink::parse_scenario(opt.scenario_path);
  if (!opt.out_override.empty()) scenario.out_dir = opt.out_override;
  if (opt.has_seed_override) scenario.seed = opt.seed_override;
  return scenario;
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--scenario", opt.scenario_path, "scenario file")
      ->required();
  cmd->add_option("--out", opt.out_override, "output directory override");
  cmd->add_option("--seed", opt.seed_override, "seed override (u64)")
      ->each([&opt](const std::string&) { opt.has_seed_override = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for secure optical communication over a"
               " photon-pair link with a classical jamming source"};
  app.footer(kScenarioHelp);
  app.require_subcommand(1);

  Options opt;
  auto* simulate = app.add_subcommand(
      "simulate", "sample both detector traces and decode the payload");
  auto* sweep = app.add_subcommand(
      "sweep-snr", "measured and analytic SNR vs jamming ratio");
  auto* message = app.add_subcommand(
      "send-message", "text transfer read by Alice and by Eve");
  auto* image = app.add_subcommand(
      "send-image", "raster-scanned image transfer plus correlation audit");
  auto* eye = app.add_subcommand(
      "eye", "eye diagram of a periodic pattern with switching ramps");
  auto* security = app.add_subcommand(
      "security-check", "thresholds, SNR, jamming margin and DFG validity");
  for (auto* cmd : {simulate, sweep, message, image, eye, security})
    add_common(cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto scenario = load(opt);
    if (simulate->parsed()) {
      const auto out = qlink::runner::run_simulate(scenario);
      std::cout << "alice_ber: " << out.alice_ber << "\n";
      std::cout << "eve: "
                << (out.eve_calibrated ? "decoded" : "calibration failed")
                << "\n";
    } else if (sweep->parsed()) {
      const auto rows = qlink::runner::run_sweep(scenario);
      std::cout << "sweep points: " << rows.size() << "\n";
    } else if (message->parsed()) {
      const auto out = qlink::runner::run_send_message(scenario);
      std::cout << "alice_ber: " << out.alice_ber << "\n";
      std::cout << "eve: "
                << (out.eve_calibrated ? "decoded" : "calibration failed")
                << "\n";
    } else if (image->parsed()) {
      const auto out = qlink::runner::run_send_image(scenario);
      std::cout << "alice_mae: " << out.alice_mae << "\n";
      std::cout << "eve_corr: " << out.eve_corr << " (null "
                << out.baseline.lo << " .. " << out.baseline.hi << ")\n";
    } else if (eye->parsed()) {
      const auto out = qlink::runner::run_eye(scenario);
      std::cout << "vertical_opening: " << out.metrics.vertical_opening
                << "\nhorizontal_opening: " << out.metrics.horizontal_opening
                << "\ntransition_fraction: "
                << out.metrics.transition_fraction << "\n";
    } else if (security->parsed()) {
      std::cout << qlink::runner::run_security_check(scenario).to_text();
    }
  } catch (const qlink::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
