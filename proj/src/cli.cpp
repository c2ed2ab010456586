#include "nvsim/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "nvsim/fitting.hpp"
#include "nvsim/io.hpp"

namespace nvsim {

namespace {

struct Common {
  std::string config;
  std::string preset_name;
  std::string out;
  std::uint64_t seed = 0;
  std::string mode = "expected";
  std::uint64_t shots = 100000;
};

void add_common(CLI::App* cmd, Common& c, bool simulation) {
  cmd->add_option("--config", c.config, "scenario JSON file");
  cmd->add_option("--preset", c.preset_name, "built-in scenario: bulk or nanocrystal");
  cmd->add_option("--out", c.out, "output CSV path");
  cmd->add_option("--seed", c.seed, "random seed for Monte Carlo runs");
  if (simulation) {
    cmd->add_option("--mode", c.mode, "expected or mc")
        ->check(CLI::IsMember({"expected", "mc"}));
    cmd->add_option("--shots", c.shots, "Monte Carlo shots");
  }
}

std::filesystem::path resolve_config(const std::string& name) {
  std::filesystem::path p(name);
  if (std::filesystem::exists(p)) return p;
  // Bare names fall back to the shipped presets directory.
  const std::filesystem::path shipped = std::filesystem::path(NVSIM_PRESET_DIR) / p;
  if (!p.has_parent_path() && std::filesystem::exists(shipped)) return shipped;
  return p;
}

ScenarioConfig scenario(const Common& c) {
  if (!c.config.empty() && !c.preset_name.empty())
    throw ConfigError("--config", "give either --config or --preset, not both");
  if (!c.config.empty()) return load_config(resolve_config(c.config));
  return preset(c.preset_name.empty() ? "bulk" : c.preset_name);
}

std::filesystem::path output_path(const Common& c, const ScenarioConfig& cfg,
                                  const std::string& command) {
  if (!c.out.empty()) return c.out;
  return std::filesystem::path(cfg.output_directory) / (command + ".csv");
}

Manifold parse_manifold(const std::string& s) {
  if (s == "ground") return Manifold::Ground;
  if (s == "excited") return Manifold::Excited;
  throw ConfigError("--manifold", "expected ground or excited");
}

Eigen::Vector3d to_vector(const std::vector<double>& v, const std::string& flag) {
  if (v.size() != 3) throw ConfigError(flag, "expected three comma-separated numbers");
  return {v[0], v[1], v[2]};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("--input: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string fit_report_csv(const FitResult& fit) {
  std::string out = "parameter,value,std_error\n";
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out += fit.names[i] + "," + format_number(fit.values(k)) + "," +
           format_number(fit.std_errors(k)) + "\n";
  }
  return out;
}

void print_fit(std::ostream& out, const FitResult& fit) {
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << fit.names[i] << " = " << fit.values(k) << " +/- " << fit.std_errors(k) << "\n";
  }
  out << "converged: " << (fit.converged ? "yes" : "no") << " (" << fit.message << ")\n";
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
  return s;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"NV center ODMR and photodynamics simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::vector<std::string> arguments(argv + 1, argv + argc);
  std::function<void()> action;
  RunManifest manifest;

  auto finish = [&](const ScenarioConfig& cfg, const std::string& command, const Common& c,
                    std::vector<OutputFile> files, const std::string& extra_hash = "") {
    manifest.command = command;
    manifest.arguments = arguments;
    manifest.config_hash = fnv1a_hex(to_json(cfg).dump() + extra_hash);
    manifest.seed = c.seed;
    manifest = emit_outputs(files, manifest);
    for (const auto& f : manifest.outputs) out << "wrote " << f << "\n";
  };

  // spectrum -----------------------------------------------------------------
  Common spectrum_c;
  std::optional<double> spectrum_b;
  double fmin = 1000, fmax = 3200, fstep = 1;
  auto* spectrum = app.add_subcommand("spectrum", "cw ODMR spectrum over both manifolds");
  add_common(spectrum, spectrum_c, false);
  spectrum->add_option("--b", spectrum_b, "field magnitude, gauss");
  spectrum->add_option("--fmin", fmin, "MHz");
  spectrum->add_option("--fmax", fmax, "MHz");
  spectrum->add_option("--fstep", fstep, "MHz");
  spectrum->callback([&] {
    action = [&] {
      auto cfg = scenario(spectrum_c);
      if (spectrum_b) {
        if (*spectrum_b < 0) throw ConfigError("--b", "must be >= 0");
        cfg.field.vector_gauss.reset();
        cfg.field.magnitude_gauss = *spectrum_b;
      }
      const auto grid = stepped_grid(fmin, fmax, fstep);
      const auto s = odmr_spectrum(cfg.ground, cfg.excited, cfg.rates, cfg.drives,
                                   cfg.field.nv(cfg.nv_orientation()), grid);
      out << "dips (MHz): " << join(s.dips) << "\n";
      if (s.near_lac) out << "warning: a transition lies within one linewidth of zero frequency\n";
      CsvTable t{{"frequency_mhz", "pl_normalized"}, {s.frequency, s.pl}};
      finish(cfg, "spectrum", spectrum_c, {{output_path(spectrum_c, cfg, "spectrum"), to_csv(t)}});
    };
  });

  // zeeman -------------------------------------------------------------------
  Common zeeman_c;
  double bmin = 0, bmax = 600;
  std::size_t steps = 120;
  std::string manifold = "excited";
  auto* zeeman = app.add_subcommand("zeeman", "transition frequencies versus axial field");
  add_common(zeeman, zeeman_c, false);
  zeeman->add_option("--bmin", bmin, "gauss");
  zeeman->add_option("--bmax", bmax, "gauss");
  zeeman->add_option("--steps", steps, "number of intervals");
  zeeman->add_option("--manifold", manifold, "ground or excited");
  zeeman->callback([&] {
    action = [&] {
      const auto cfg = scenario(zeeman_c);
      if (steps < 1) throw ConfigError("--steps", "must be >= 1");
      if (!(bmax >= bmin) || bmin < 0) throw ConfigError("--bmin", "need 0 <= bmin <= bmax");
      const auto& params = parse_manifold(manifold) == Manifold::Ground ? cfg.ground : cfg.excited;
      const auto grid = linear_grid(bmin, bmax, steps + 1);
      const auto points = zeeman_scan(params, grid);
      CsvTable t{{"b_gauss", "omega_minus_mhz", "omega_plus_mhz"}, {{}, {}, {}}};
      for (const auto& p : points) {
        t.columns[0].push_back(p.b_gauss);
        t.columns[1].push_back(p.omega_minus);
        t.columns[2].push_back(p.omega_plus);
      }
      out << "anti-crossing field (G): " << lac_field(params) << "\n";
      finish(cfg, "zeeman", zeeman_c, {{output_path(zeeman_c, cfg, "zeeman"), to_csv(t)}});
    };
  });

  // rotation -----------------------------------------------------------------
  Common rotation_c;
  double rotation_b = 100;
  std::vector<double> axis_v, initial_v;
  std::size_t rotation_steps = 360;
  std::string rotation_manifold = "excited";
  bool all_orientations = false;
  auto* rotation = app.add_subcommand("rotation", "transition frequencies while rotating the field");
  add_common(rotation, rotation_c, false);
  rotation->add_option("--b", rotation_b, "field magnitude, gauss");
  rotation->add_option("--axis", axis_v, "rotation axis x,y,z")->delimiter(',')->required();
  rotation->add_option("--initial", initial_v, "field direction at angle 0, x,y,z")
      ->delimiter(',')
      ->required();
  rotation->add_option("--steps", rotation_steps, "angle intervals over 360 degrees");
  rotation->add_option("--manifold", rotation_manifold, "ground or excited");
  rotation->add_flag("--all-orientations", all_orientations, "scan all four NV axes");
  rotation->callback([&] {
    action = [&] {
      const auto cfg = scenario(rotation_c);
      const Eigen::Vector3d axis = to_vector(axis_v, "--axis");
      const Eigen::Vector3d initial = to_vector(initial_v, "--initial");
      if (axis.norm() == 0) throw ConfigError("--axis", "must be non-zero");
      if (rotation_steps < 1) throw ConfigError("--steps", "must be >= 1");
      RotationScan<double> scan{axis.normalized(), rotation_b,
                                linear_grid(0.0, 360.0, rotation_steps + 1)};
      const auto& params =
          parse_manifold(rotation_manifold) == Manifold::Ground ? cfg.ground : cfg.excited;
      CsvTable t;
      t.header = {"angle_deg"};
      t.columns.push_back(scan.angle_grid);
      auto append = [&](const std::vector<RotationPoint<double>>& pts, const std::string& prefix) {
        t.header.push_back(prefix + "omega_minus_mhz");
        t.header.push_back(prefix + "omega_plus_mhz");
        std::vector<double> lo, hi;
        for (const auto& p : pts) {
          lo.push_back(p.omega_minus);
          hi.push_back(p.omega_plus);
        }
        t.columns.push_back(lo);
        t.columns.push_back(hi);
      };
      if (all_orientations) {
        const auto all = rotation_scan_all_orientations(scan, initial, params);
        for (std::size_t i = 0; i < all.size(); ++i) append(all[i], "nv" + std::to_string(i + 1) + "_");
      } else {
        append(rotation_scan_frequencies(scan, initial, params, cfg.nv_orientation()), "");
      }
      finish(cfg, "rotation", rotation_c, {{output_path(rotation_c, cfg, "rotation"), to_csv(t)}});
    };
  });

  // decay --------------------------------------------------------------------
  Common decay_c;
  bool pi_gs = false, pi_es = false;
  std::optional<double> pi_es_at, decay_fidelity;
  auto* decay = app.add_subcommand("decay", "spin-selective fluorescence decay histogram");
  add_common(decay, decay_c, true);
  decay->add_flag("--pi-gs", pi_gs, "ground-state pi pulse before the excitation");
  decay->add_flag("--pi-es", pi_es, "excited-state pi pulse during the readout");
  decay->add_option("--pi-es-at", pi_es_at, "readout time of the excited-state pulse, ns");
  decay->add_option("--fidelity", decay_fidelity, "pi pulse fidelity in [0, 1]");
  decay->callback([&] {
    action = [&] {
      auto cfg = scenario(decay_c);
      if (pi_es_at) {
        cfg.decay.es_pi_time_ns = *pi_es_at;
        pi_es = true;
      }
      if (decay_fidelity) cfg.decay.fidelity = *decay_fidelity;
      cfg.validate();
      if (cfg.decay.fidelity < 0 || cfg.decay.fidelity > 1)
        throw ConfigError("--fidelity", "must lie in [0, 1]");
      if (pi_es && !(cfg.decay.es_pi_time_ns > 0 && cfg.decay.es_pi_time_ns < cfg.decay.readout_ns))
        throw ConfigError("--pi-es-at", "must lie inside the readout window");

      const auto seq = decay_sequence(cfg.decay, pi_gs, pi_es);
      const SpinContext spins{cfg.ground, cfg.excited, cfg.field.nv(cfg.nv_orientation())};
      const RunOptions opts{decay_c.mode == "mc", decay_c.seed, decay_c.shots};
      const auto result = run_sequence(seq, cfg.rates, spins, opts);
      if (result.warning) out << "warning: " << *result.warning << "\n";

      if (pi_es) {
        const auto fit = fit_piecewise_decay(result.histogram, cfg.decay.es_pi_time_ns);
        print_fit(out, fit);
      } else {
        print_fit(out, fit_exponential(result.histogram, 0, cfg.decay.readout_ns));
      }
      finish(cfg, "decay", decay_c,
             {{output_path(decay_c, cfg, "decay"), to_csv(histogram_to_csv(result.histogram))}});
    };
  });

  // rabi ---------------------------------------------------------------------
  Common rabi_c;
  double rabi = 200, detuning = 0, tmax = 20;
  std::size_t rabi_steps = 2000;
  auto* rabi_cmd = app.add_subcommand("rabi", "coherent transfer probability versus pulse length");
  add_common(rabi_cmd, rabi_c, false);
  rabi_cmd->add_option("--rabi", rabi, "Rabi frequency, MHz");
  rabi_cmd->add_option("--detuning", detuning, "MHz");
  rabi_cmd->add_option("--tmax", tmax, "ns");
  rabi_cmd->add_option("--steps", rabi_steps, "time intervals");
  rabi_cmd->callback([&] {
    action = [&] {
      const auto cfg = scenario(rabi_c);
      if (!(rabi >= 0)) throw ConfigError("--rabi", "must be >= 0");
      if (!(tmax > 0)) throw ConfigError("--tmax", "must be > 0");
      if (rabi_steps < 1) throw ConfigError("--steps", "must be >= 1");
      MicrowaveDrive drive;
      drive.frequency = 1000.0 + detuning;
      drive.rabi_frequency = rabi;
      const auto grid = linear_grid(0.0, tmax, rabi_steps + 1);
      CsvTable t{{"t_ns", "p_transfer"}, {grid, rabi_curve(drive, 1000.0, grid)}};
      finish(cfg, "rabi", rabi_c, {{output_path(rabi_c, cfg, "rabi"), to_csv(t)}});
    };
  });

  // lac ----------------------------------------------------------------------
  Common lac_c;
  double lac_bmin = 0, lac_bmax = 1200, misalignment = 2;
  std::size_t lac_steps = 1200;
  auto* lac = app.add_subcommand("lac", "photoluminescence versus field through the anti-crossings");
  add_common(lac, lac_c, false);
  lac->add_option("--bmin", lac_bmin, "gauss");
  lac->add_option("--bmax", lac_bmax, "gauss");
  lac->add_option("--steps", lac_steps, "number of intervals");
  lac->add_option("--misalignment", misalignment, "field angle from the NV axis, degrees");
  lac->callback([&] {
    action = [&] {
      const auto cfg = scenario(lac_c);
      if (lac_steps < 1) throw ConfigError("--steps", "must be >= 1");
      if (!(lac_bmax >= lac_bmin) || lac_bmin < 0) throw ConfigError("--bmin", "need 0 <= bmin <= bmax");
      const auto grid = linear_grid(lac_bmin, lac_bmax, lac_steps + 1);
      const auto scan = lac_scan(cfg.ground, cfg.excited, cfg.rates, grid, misalignment);
      out << "PL minima (G): " << join(scan.minima) << "\n";
      if (scan.trivially_flat) out << "note: aligned field without strain gives a flat trace\n";
      CsvTable t{{"b_gauss", "pl_normalized"}, {scan.b_grid, scan.pl}};
      finish(cfg, "lac", lac_c, {{output_path(lac_c, cfg, "lac"), to_csv(t)}});
    };
  });

  // fit-zeeman ---------------------------------------------------------------
  Common fz_c;
  std::string fz_input;
  double bmin_fit = 0;
  std::optional<double> bmax_fit;
  auto* fit_zeeman_cmd = app.add_subcommand("fit-zeeman", "linear Zeeman fit of D and g");
  add_common(fit_zeeman_cmd, fz_c, false);
  fit_zeeman_cmd->add_option("--input", fz_input, "CSV with b_gauss, omega_minus_mhz, omega_plus_mhz")
      ->required();
  fit_zeeman_cmd->add_option("--bmin-fit", bmin_fit, "ignore points below this field, gauss");
  fit_zeeman_cmd->add_option("--bmax-fit", bmax_fit, "ignore points above this field, gauss");
  fit_zeeman_cmd->callback([&] {
    action = [&] {
      const auto cfg = scenario(fz_c);
      const std::string text = read_text(fz_input);
      const auto table = parse_csv(text);
      const auto& b = table.column("b_gauss");
      const auto& lo = table.column("omega_minus_mhz");
      const auto& hi = table.column("omega_plus_mhz");
      std::vector<ZeemanSample> samples;
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i] < bmin_fit || (bmax_fit && b[i] > *bmax_fit)) continue;
        samples.push_back({b[i], lo[i], -1});
        samples.push_back({b[i], hi[i], +1});
      }
      const auto fit = fit_zeeman(samples);
      print_fit(out, fit);
      finish(cfg, "fit-zeeman", fz_c, {{output_path(fz_c, cfg, "fit-zeeman"), fit_report_csv(fit)}},
             text);
    };
  });

  // fit-decay ----------------------------------------------------------------
  Common fd_c;
  std::string fd_input;
  std::optional<double> break_time, tmin_fit, tmax_fit;
  auto* fit_decay_cmd = app.add_subcommand("fit-decay", "exponential fit of a decay histogram");
  add_common(fit_decay_cmd, fd_c, true);
  fit_decay_cmd->add_option("--input", fd_input, "CSV with t_ns, pl")->required();
  fit_decay_cmd->add_option("--break", break_time, "fit two slopes split at this time, ns");
  fit_decay_cmd->add_option("--tmin", tmin_fit, "ns");
  fit_decay_cmd->add_option("--tmax", tmax_fit, "ns");
  fit_decay_cmd->callback([&] {
    action = [&] {
      const auto cfg = scenario(fd_c);
      const std::string text = read_text(fd_input);
      const auto hist = histogram_from_csv(parse_csv(text), fd_c.mode == "mc");
      const FitResult fit =
          break_time ? fit_piecewise_decay(hist, *break_time)
                     : fit_exponential(hist, tmin_fit.value_or(hist.bin_edges.front()),
                                       tmax_fit.value_or(hist.bin_edges.back()));
      print_fit(out, fit);
      finish(cfg, "fit-decay", fd_c, {{output_path(fd_c, cfg, "fit-decay"), fit_report_csv(fit)}},
             text);
    };
  });

  // fit-spectrum -------------------------------------------------------------
  Common fs_c;
  std::string fs_input;
  std::vector<double> centers;
  auto* fit_spectrum_cmd = app.add_subcommand("fit-spectrum", "Lorentzian dip fit of a spectrum");
  add_common(fit_spectrum_cmd, fs_c, false);
  fit_spectrum_cmd->add_option("--input", fs_input, "CSV with frequency_mhz, pl_normalized")
      ->required();
  fit_spectrum_cmd->add_option("--centers", centers, "initial dip centers, MHz")->delimiter(',');
  fit_spectrum_cmd->callback([&] {
    action = [&] {
      const auto cfg = scenario(fs_c);
      const std::string text = read_text(fs_input);
      const auto table = parse_csv(text);
      const auto& f = table.column("frequency_mhz");
      const auto& pl = table.column("pl_normalized");
      std::vector<double> start = centers;
      if (start.empty()) start = detect_dips(f, pl);
      if (start.empty()) throw FitDomainError("no dips found; pass --centers");
      const auto fit = fit_lorentzian_dips(f, pl, start);
      print_fit(out, fit.fit);
      if (fit.overlap_warning) out << "warning: dips overlap; uncertainties are poorly conditioned\n";
      finish(cfg, "fit-spectrum", fs_c,
             {{output_path(fs_c, cfg, "fit-spectrum"), fit_report_csv(fit.fit)}}, text);
    };
  });

  // run-sequence -------------------------------------------------------------
  Common rs_c;
  std::string sequence_path;
  auto* run_seq = app.add_subcommand("run-sequence", "run a pulse sequence from a JSON file");
  add_common(run_seq, rs_c, true);
  run_seq->add_option("--sequence", sequence_path, "sequence JSON file")->required();
  run_seq->callback([&] {
    action = [&] {
      const auto cfg = scenario(rs_c);
      const auto seq = load_sequence(sequence_path);
      const SpinContext spins{cfg.ground, cfg.excited, cfg.field.nv(cfg.nv_orientation())};
      const RunOptions opts{rs_c.mode == "mc", rs_c.seed, rs_c.shots};
      const auto result = run_sequence(seq, cfg.rates, spins, opts);
      if (result.warning) out << "warning: " << *result.warning << "\n";
      out << "final populations:";
      for (int i = 0; i < kNumLevels; ++i) out << " " << result.final_populations(i);
      out << "\n";
      finish(cfg, "run-sequence", rs_c,
             {{output_path(rs_c, cfg, "run-sequence"), to_csv(histogram_to_csv(result.histogram))}},
             to_json(seq).dump());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    action();
    return 0;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nvsim
