// Command-line driver. Exit codes: 0 success, 1 other error, 2 invalid
// configuration, 3 SCF failure, 4 QMC failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "magdmc/binary_io.hpp"
#include "magdmc/config.hpp"
#include "magdmc/hf.hpp"
#include "magdmc/kernel_table.hpp"
#include "magdmc/oracle.hpp"
#include "magdmc/pipeline.hpp"

namespace {

using namespace magdmc;

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kScf = 3, kQmc = 4 };

// Leftover `--key value` or `--key=value` arguments become config overrides.
// A leading bare argument is the configuration file.
ConfigMap parse_overrides(const std::vector<std::string>& extras, std::string& config_path) {
  ConfigMap out;
  std::size_t i = 0;
  if (!extras.empty() && extras[0].rfind("--", 0) != 0) config_path = extras[i++];
  for (; i < extras.size(); ++i) {
    std::string a = extras[i];
    if (a.rfind("--", 0) != 0) throw ConfigError({"unexpected argument '" + a + "'"});
    a = a.substr(2);
    if (const auto eq = a.find('='); eq != std::string::npos) {
      out[a.substr(0, eq)] = a.substr(eq + 1);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError({"override --" + a + " needs a value"});
      out[a] = extras[++i];
    }
  }
  return out;
}

RunConfig load(std::string& path, const std::vector<std::string>& extras) {
  const ConfigMap over = parse_overrides(extras, path);
  if (path.empty()) return resolve_config(over);
  return load_config_file(path, over);
}

std::string energy_text(double hartree) {
  std::ostringstream o;
  o << std::setprecision(10) << hartree << " Ha (" << hartree_to_kev(hartree) << " keV)";
  return o.str();
}

int cmd_print_config(const RunConfig& cfg) {
  std::cout << print_config(cfg);
  return kOk;
}

int cmd_kernels(const RunConfig& cfg) {
  const std::string cache = default_cache_dir(cfg);
  bool hit = false;
  const auto t0 = std::chrono::steady_clock::now();
  auto table = obtain_kernels(cfg, cache, &hit);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "kernels " << hex64(table->key()) << (hit ? " loaded from cache " : " built into ") << cache << " in "
            << std::setprecision(3) << dt << " s\n";
  return kOk;
}

int cmd_hf(const RunConfig& cfg) {
  OrbitalSource src = obtain_orbitals(cfg, default_cache_dir(cfg), false, true);
  std::cout << "kernel cache " << (src.kernel_cache_hit ? "hit" : "miss") << " (" << std::setprecision(3)
            << src.kernel_seconds << " s)\n";
  std::cout << "SCF converged in " << src.orbitals.log.size() << " iterations (" << src.scf_seconds << " s)\n";
  for (const auto& o : src.orbitals.orbitals)
    std::cout << "  m=" << o.m << " nu_z=" << o.nu_z << " eps=" << std::setprecision(10) << o.eigenvalue << '\n';
  std::cout << "E_HF = " << energy_text(src.orbitals.e_hf.hartree) << '\n';
  std::cout << "orbitals written to " << cfg.out.resolve(cfg.out.orbitals) << '\n';
  return kOk;
}

int cmd_run(const RunConfig& cfg, const std::string& config_path, bool resume, const std::string& stage,
            int stop_after, bool quiet) {
  PipelineOptions opt;
  opt.resume = resume;
  opt.stages = stage_selection_from_string(stage);
  opt.stop_after_blocks = stop_after;
  opt.log = &std::cerr;
  if (!quiet)
    opt.on_block = [](const BlockStats& b) {
      std::cerr << std::fixed << std::setprecision(6) << to_string(b.stage) << ' ' << std::setw(4) << b.block
                << "  E_B " << b.e_block << "  <E_B> " << b.e_average << "  pop " << std::setprecision(1)
                << b.population << "  acc " << std::setprecision(4) << b.acceptance << '\n'
                << std::defaultfloat;
    };
  const auto t0 = std::chrono::steady_clock::now();
  PipelineResult res = run_pipeline(cfg, opt);
  res.timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string manifest = cfg.out.resolve(cfg.out.manifest);
  std::ofstream(manifest) << manifest_json(cfg, res, config_path) << '\n';

  std::cout << "E_HF   = " << energy_text(res.e_hf.hartree) << '\n';
  for (const auto& r : res.stages) {
    if (r.blocks.empty()) continue;
    std::cout << std::left << std::setw(7) << to_string(r.spec.kind) << "= " << energy_text(r.energy)
              << "  sigma " << std::setprecision(4) << r.sigma << "  error " << r.error << "  ("
              << r.blocks.size() << '/' << r.spec.n_blocks << " blocks)\n";
  }
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  if (!res.failure.empty()) {
    std::cerr << "QMC failure: " << res.failure << '\n';
    return kQmc;
  }
  if (res.interrupted) std::cout << "stopped early; continue with --resume\n";
  return kOk;
}

int cmd_trace_export(const std::string& trace_path, const std::string& refs_path, const std::string& prefix,
                     const std::string& config_path) {
  std::uint64_t expected = 0;
  if (!config_path.empty()) expected = config_hash(load_config_file(config_path));
  const Trace t = read_trace(trace_path, expected);
  std::vector<ReferenceLine> refs;
  if (!refs_path.empty()) refs = read_reference_lines(refs_path);
  const std::size_t n = export_trace(t, refs, prefix);
  std::cout << n << " rows written to " << prefix << ".dat, reference lines to " << prefix << "_refs.dat\n";
  return kOk;
}

int cmd_oracle(const std::string& what, double beta, double charge, int m, int mp, double zeta, long samples) {
  const double gamma = kGammaPerBeta * beta;
  std::cout << std::setprecision(12);
  if (what == "nuclear-eigen") {
    const double L = 40.0 / std::sqrt(charge) + 10.0;
    oracle::GridEigenProblem p;
    p.potential = [&](double z) { return oracle::nuclear_kernel_m0(gamma, charge, z); };
    p.lower = -L;
    p.upper = L;
    p.points = 40001;
    p.n_eigen = 2;
    const auto r = oracle::grid_eigensolve(p);
    for (std::size_t k = 0; k < r.eigenvalues.size(); ++k)
      std::cout << "eps_" << k << " = " << r.eigenvalues[k] << " +- " << r.error[k] << '\n';
    return kOk;
  }
  if (what == "direct" || what == "exchange") {
    const auto e = what == "direct" ? oracle::mc_integral_kernel(gamma, m, mp, zeta, samples, 1)
                                    : oracle::mc_exchange_kernel(gamma, m, mp, zeta, samples, 1);
    std::cout << what << "(" << m << "," << mp << ")(" << zeta << ") = " << e.value << " +- " << e.error << '\n';
    return kOk;
  }
  std::cerr << "unknown oracle '" << what << "' (nuclear-eigen, direct, exchange)\n";
  return kOther;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-state energies of spin-polarized atoms in strong magnetic fields"};
  app.require_subcommand(1);
  std::string config_path;

  auto add_config = [&](CLI::App* sub) {
    sub->allow_extras();
    sub->footer("Usage: " + sub->get_name() +
                " [CONFIG] [--key value ...]. CONFIG holds `key = value` lines; each --key value pair\n"
                "overrides one entry, e.g. --seed 7 --out.dir runs/he.");
  };

  auto* print = app.add_subcommand("print-config", "print the fully resolved configuration");
  add_config(print);
  auto* kernels = app.add_subcommand("kernels", "build or load the effective-interaction kernel cache");
  add_config(kernels);
  auto* hf = app.add_subcommand("hf", "solve the Hartree-Fock equations and write the orbital file");
  add_config(hf);

  auto* run = app.add_subcommand("run", "VQMC, fixed-phase and released-phase DQMC");
  add_config(run);
  bool resume = false, quiet = false;
  std::string stage = "all";
  int stop_after = -1;
  run->add_flag("--resume", resume, "continue from the checkpoint");
  run->add_option("--stage", stage, "all | vqmc-only | fpdqmc-only | rpdqmc-only")->capture_default_str();
  run->add_option("--stop-after-blocks", stop_after, "stop after this many blocks (checkpoint first)");
  run->add_flag("--quiet", quiet, "no per-block log lines");

  auto* exp = app.add_subcommand("trace-export", "convert a trace CSV into plot-ready columns");
  std::string trace_path, refs_path, prefix = "trace_plot", check_config;
  exp->add_option("trace", trace_path, "trace CSV")->required();
  exp->add_option("--refs", refs_path, "reference lines, 'label keV' per line");
  exp->add_option("--out", prefix, "output prefix")->capture_default_str();
  exp->add_option("--config", check_config, "refuse traces that were not produced by this configuration");

  auto* orc = app.add_subcommand("oracle", "");  // hidden: empty description
  orc->group("");
  std::string what;
  double beta = 1.0, charge = 1.0, zeta = 1.0;
  int m = 0, mp = 0;
  long samples = 1000000;
  orc->add_option("what", what, "nuclear-eigen | direct | exchange")->required();
  orc->add_option("--beta", beta);
  orc->add_option("--z", charge);
  orc->add_option("--m", m);
  orc->add_option("--mp", mp);
  orc->add_option("--zeta", zeta);
  orc->add_option("--samples", samples);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*exp) return cmd_trace_export(trace_path, refs_path, prefix, check_config);
    if (*orc) return cmd_oracle(what, beta, charge, m, mp, zeta, samples);
    CLI::App* sub = app.get_subcommands().front();
    const RunConfig cfg = load(config_path, sub->remaining());
    if (*print) return cmd_print_config(cfg);
    if (*kernels) return cmd_kernels(cfg);
    if (*hf) return cmd_hf(cfg);
    if (*run) return cmd_run(cfg, config_path, resume, stage, stop_after, quiet);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfig;
  } catch (const ScfError& e) {
    std::cerr << "SCF failure: " << e.what() << "\nenergy history:\n";
    for (const auto& r : e.history())
      std::cerr << "  " << r.iteration << ' ' << std::setprecision(12) << r.energy << ' ' << r.delta_energy << ' '
                << r.orbital_change << '\n';
    return kScf;
  } catch (const QmcError& e) {
    std::cerr << "QMC failure: " << e.what() << '\n';
    return kQmc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
