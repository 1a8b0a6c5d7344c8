// Acceptance runner: `acceptance N` evaluates criterion N (1-6) and prints
// one PASS/FAIL line per check. Exit status 0 only if every check passes.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "magdmc/hf.hpp"
#include "magdmc/kernel_table.hpp"
#include "magdmc/oracle.hpp"
#include "magdmc/pipeline.hpp"
#include "properties.hpp"
#include "support.hpp"

namespace {

using namespace magdmc;
using Clock = std::chrono::steady_clock;

struct Report {
  int criterion = 0;
  int failures = 0;

  void line(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << " [" << criterion << "] " << name << ": " << detail << std::endl;
    failures += !pass;
  }
  void info(const std::string& text) { std::cout << "INFO [" << criterion << "] " << text << std::endl; }
};

template <class... T>
std::string fmt(const T&... parts) {
  std::ostringstream o;
  o << std::setprecision(7);
  ((o << parts), ...);
  return o.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

RunConfig shipped_config(const std::string& name, const std::string& tag) {
  RunConfig cfg = load_config_file(std::string(MAGDMC_SOURCE_DIR) + "/configs/" + name);
  cfg.out.dir = test::scratch_dir(tag);
  return cfg;
}

double kev(double hartree) { return hartree_to_kev(hartree); }

// |E - target| within 2 standard errors plus a relative margin.
void energy_target(Report& r, const std::string& name, const StageResult& s, double target_kev, double margin) {
  const double e = kev(s.energy), err = kev(s.error);
  const double tol = 2.0 * err + margin * std::abs(target_kev);
  r.line(name, std::abs(e - target_kev) <= tol,
         fmt(e, " +- ", err, " keV vs ", target_kev, " (|diff| ", std::abs(e - target_kev), ", allowed ", tol, ")"));
}

const StageResult* stage(const PipelineResult& res, StageKind k) {
  for (const auto& s : res.stages)
    if (s.spec.kind == k && s.complete) return &s;
  return nullptr;
}

PipelineResult full_run(Report& r, const RunConfig& cfg, double limit_s) {
  PipelineOptions opt;
  opt.cache_dir = cfg.out.dir + "/cache";
  const auto t0 = Clock::now();
  PipelineResult res = run_pipeline(cfg, opt);
  const double dt = seconds_since(t0);
  r.line("run completes", res.complete && res.failure.empty(), res.failure.empty() ? "all stages done" : res.failure);
  r.line(fmt("runtime < ", limit_s, " s"), dt < limit_s, fmt(dt, " s"));
  r.info(fmt("E_HF ", kev(res.e_hf.hartree), " keV"));
  for (const auto& w : res.warnings) r.info("warning: " + w);
  return res;
}

void criterion_1(Report& r) {
  const RunConfig cfg = shipped_config("he.cfg", "acc1");
  const auto t0 = Clock::now();
  auto kernels = obtain_kernels(cfg, "");
  const OrbitalSet orbs = scf(cfg, kernels);
  const double dt = seconds_since(t0);
  const double e = orbs.e_hf.kev(), target = -0.5754;
  r.line("He HF within 1 % of -0.5754 keV", std::abs(e / target - 1.0) < 0.01,
         fmt(e, " keV (", 100 * (e / target - 1.0), " %), spin term included = ", cfg.spin_zeeman_included));
  const double other = kev(orbs.e_hf.hartree + cfg.n_electrons * cfg.field.gamma() / 2);
  r.info(fmt("without the spin term the same orbitals give ", other, " keV"));
  r.line("HF runtime < 60 s", dt < 60.0, fmt(dt, " s including kernel tables"));
}

void criterion_2(Report& r) {
  const RunConfig cfg = shipped_config("he.cfg", "acc2");
  const PipelineResult res = full_run(r, cfg, 600.0);
  const StageResult *v = stage(res, StageKind::Vqmc), *f = stage(res, StageKind::Fpdqmc),
                    *p = stage(res, StageKind::Rpdqmc);
  if (!v || !f || !p) {
    r.line("three stages present", false, "missing stage results");
    return;
  }
  energy_target(r, "VQMC vs -0.5791 keV", *v, -0.5791, 0.005);
  energy_target(r, "FPDQMC vs -0.5827 keV", *f, -0.5827, 0.005);
  const double comb = std::hypot(f->error, p->error);
  r.line("RPDQMC <= FPDQMC within combined error", p->energy <= f->energy + comb,
         fmt("RP ", kev(p->energy), " FP ", kev(f->energy), " combined error ", kev(comb), " keV"));
  const double lowering = (f->energy - p->energy) / std::abs(f->energy);
  r.line("RPDQMC lowering <= 0.2 %", lowering <= 0.002, fmt(100 * lowering, " %"));
}

void criterion_3(Report& r) {
  const RunConfig cfg = shipped_config("li.cfg", "acc3");
  const PipelineResult res = full_run(r, cfg, 1200.0);
  const StageResult *v = stage(res, StageKind::Vqmc), *f = stage(res, StageKind::Fpdqmc),
                    *p = stage(res, StageKind::Rpdqmc);
  if (!v || !f || !p) {
    r.line("three stages present", false, "missing stage results");
    return;
  }
  auto order = [&](const std::string& name, double lo, double lo_err, double hi, double hi_err) {
    const double tol = 2.0 * std::hypot(lo_err, hi_err);
    r.line(name + " at 2 sigma", lo <= hi + tol, fmt(kev(lo), " <= ", kev(hi), " keV (2 sigma = ", kev(tol), ")"));
  };
  order("RPDQMC <= FPDQMC", p->energy, p->error, f->energy, f->error);
  order("FPDQMC <= VQMC", f->energy, f->error, v->energy, v->error);
  order("VQMC <= HF", v->energy, v->error, res.e_hf.hartree, 0.0);
  const double e = kev(v->energy);
  r.line("Li VQMC within 1.5 % of -1.220 keV", std::abs(e / -1.220 - 1.0) < 0.015,
         fmt(e, " keV (", 100 * (e / -1.220 - 1.0), " %)"));
}

void criterion_4(Report& r) {
  r.info("Fe at 5e8 T (E0 = -109.079 keV, sigma 0.186 keV) is a long-run result, not a desk-scale target");
  const RunConfig cfg = shipped_config("fe.cfg", "acc4");
  r.line("Fe config validates", cfg.z == 26 && cfg.n_electrons == 26, fmt("Z ", cfg.z, ", N ", cfg.n_electrons));
  r.line("beta from 5e8 T", std::abs(cfg.field.beta() - 1063.603) < 1e-3, fmt("beta ", cfg.field.beta()));

  bool distinct = cfg.occupations.size() == 26;
  for (std::size_t i = 0; i < cfg.occupations.size(); ++i)
    distinct = distinct && cfg.occupations[i] == Occupation{static_cast<int>(i), 0};
  r.line("default occupations m = 0..25 tightly bound", distinct, fmt(cfg.occupations.size(), " orbitals"));

  const StageKind kinds[3] = {StageKind::Vqmc, StageKind::Fpdqmc, StageKind::Rpdqmc};
  bool shape = cfg.schedule.size() == 3;
  int blocks = 0;
  for (std::size_t k = 0; shape && k < 3; ++k) {
    shape = cfg.schedule[k].kind == kinds[k] && cfg.schedule[k].steps_per_block == 200;
    blocks += cfg.schedule[k].n_blocks;
  }
  r.line("schedule vqmc/fpdqmc/rpdqmc x 200 steps", shape && blocks == 700, fmt(blocks, " blocks"));
  const double fp_time = cfg.schedule[1].n_blocks * cfg.schedule[1].steps_per_block * cfg.dtau;
  r.line("FPDQMC spans 0.3 a.u. of imaginary time", std::abs(fp_time - 0.3) < 1e-12, fmt(fp_time, " a.u."));

  const RunConfig again = validate_config(print_config(cfg));
  r.line("printed config round-trips", config_hash(again) == config_hash(cfg), hex64(config_hash(cfg)));
}

void criterion_5(Report& r) {
  const std::vector<std::pair<const char*, std::function<props::Checks()>>> suite = {
      {"jastrow cusps", props::jastrow_cusps},
      {"antisymmetry", props::determinant_antisymmetry},
      {"finite differences", props::drift_laplacian_fd},
      {"Landau orthonormality", props::landau_orthonormality},
      {"kernel far field", props::kernel_far_field_symmetry},
      {"zero variance", props::zero_variance},
      {"branching", props::branching_expectation},
      {"population control", props::population_control},
      {"time step", props::time_step_halving},
      {"reproducibility", props::reproducibility},
  };
  const auto t0 = Clock::now();
  for (const auto& [group, run] : suite) {
    const auto t = Clock::now();
    for (const auto& c : run()) r.line(c.name, c.pass, c.detail);
    r.info(fmt(group, ": ", seconds_since(t), " s"));
  }
  const double dt = seconds_since(t0);
  r.line("property suite < 300 s", dt < 300.0, fmt(dt, " s"));
}

// One electron, Z = 1, m = 0: the B-spline Galerkin channel solver against
// finite differences on the closed-form kernel.
void criterion_6(Report& r) {
  for (double beta : {1.0, 31.6, 1000.0}) {
    ConfigMap m{{"z", "1"}, {"n_electrons", "1"}, {"beta", fmt(beta)}};
    const RunConfig cfg = resolve_config(m);
    auto kernels = obtain_kernels(cfg, "");
    const LongitudinalProblem prob(hf_basis(cfg), cfg.hf.quad_points, kernels);
    const double spline = prob.solve_channel(0).eigenvalues[0];

    const double gamma = cfg.field.gamma();
    oracle::GridEigenProblem g;
    g.potential = [gamma](double z) { return oracle::nuclear_kernel_m0(gamma, 1.0, z); };
    g.lower = -30.0;
    g.upper = 30.0;
    g.points = 120001;
    const auto grid = oracle::grid_eigensolve(g);
    const double diff = std::abs(spline - grid.eigenvalues[0]);
    r.line(fmt("beta = ", beta, " ground eigenvalue"), diff < 1e-7,
           fmt(std::setprecision(12), "spline ", spline, ", grid ", grid.eigenvalues[0], " +- ", grid.error[0],
               ", |diff| ", diff));
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <1-6>\n";
    return 2;
  }
  Report r;
  r.criterion = std::atoi(argv[1]);
  const std::vector<void (*)(Report&)> all = {criterion_1, criterion_2, criterion_3,
                                              criterion_4, criterion_5, criterion_6};
  if (r.criterion < 1 || r.criterion > 6) {
    std::cerr << "criterion must be 1-6\n";
    return 2;
  }
  try {
    all[r.criterion - 1](r);
  } catch (const std::exception& e) {
    r.line("criterion ran", false, e.what());
  }
  std::cout << (r.failures ? "FAIL" : "PASS") << " criterion " << r.criterion << std::endl;
  return r.failures ? 1 : 0;
}
