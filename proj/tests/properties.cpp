#include "properties.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "magdmc/kernel_table.hpp"
#include "magdmc/landau.hpp"
#include "magdmc/oracle.hpp"
#include "magdmc/pipeline.hpp"
#include "magdmc/qmc.hpp"
#include "support.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace magdmc::props {

namespace {

using test::atom_config;
using test::atom_guiding;
using test::atom_orbitals;

template <class... T>
std::string fmt(const T&... parts) {
  std::ostringstream o;
  o.precision(6);
  ((o << parts), ...);
  return o.str();
}

double log_abs_at(const GuidingFunction& psi, const Configuration& R) {
  GuidingEval e;
  if (!psi.evaluate(R, e)) throw std::runtime_error("configuration on a node");
  return e.log_abs;
}

// Linear coefficient of the quadratic through three points.
double quadratic_slope(const double r[3], const double f[3]) {
  Eigen::Matrix3d a;
  Eigen::Vector3d b;
  for (int k = 0; k < 3; ++k) {
    a(k, 0) = 1.0;
    a(k, 1) = r[k];
    a(k, 2) = r[k] * r[k];
    b[k] = f[k];
  }
  return a.colPivHouseholderQr().solve(b)[1];
}

Eigen::Vector3d unit(double x, double y, double z) { return Eigen::Vector3d(x, y, z).normalized(); }

Population sample_configs(const GuidingFunction& psi, int n, std::uint64_t seed) {
  return init_walkers(psi, n, seed, StepLaw{1e-4, true, MoveMode::AllElectron}, 20);
}

}  // namespace

Checks jastrow_cusps() {
  Checks out;
  const GuidingFunction& psi = atom_guiding(2);
  const double radii[3] = {1e-5, 1e-4, 1e-3};
  const Eigen::Vector3d dirs[3] = {unit(1, 0, 0), unit(0.3, -0.5, 0.8), unit(-0.2, 0.1, -1.0)};

  // Nucleus: symmetrizing over +-r cancels the smooth linear part.
  double worst = 0.0;
  for (const auto& n : dirs) {
    double f[3];
    for (int k = 0; k < 3; ++k) {
      double s = 0.0;
      for (double sign : {1.0, -1.0}) {
        Configuration R(2);
        R.set(0, sign * radii[k] * n[0], sign * radii[k] * n[1], sign * radii[k] * n[2]);
        R.set(1, 0.04, -0.03, 0.08);
        s += 0.5 * log_abs_at(psi, R);
      }
      f[k] = s;
    }
    worst = std::max(worst, std::abs(quadratic_slope(radii, f) + 2.0));
  }
  out.push_back({"electron-nucleus cusp -Z", worst < 1e-3, fmt("max |slope + Z| = ", worst)});

  // Coalescence about a fixed centre; the antisymmetric factor r_12 is divided out.
  worst = 0.0;
  const Eigen::Vector3d c(0.03, 0.02, 0.05);
  for (const auto& n : dirs) {
    double r12[3], f[3];
    for (int k = 0; k < 3; ++k) {
      const double s = 0.5 * radii[k];
      Configuration R(2);
      R.set(0, c[0] + s * n[0], c[1] + s * n[1], c[2] + s * n[2]);
      R.set(1, c[0] - s * n[0], c[1] - s * n[1], c[2] - s * n[2]);
      r12[k] = radii[k];
      f[k] = log_abs_at(psi, R) - std::log(radii[k]);
    }
    worst = std::max(worst, std::abs(quadratic_slope(r12, f) - 0.25));
  }
  out.push_back({"electron-electron cusp +1/4", worst < 1e-3, fmt("max |slope - 1/4| = ", worst)});
  return out;
}

Checks determinant_antisymmetry() {
  Checks out;
  for (int z : {2, 3}) {
    const GuidingFunction& psi = atom_guiding(z);
    const Population pop = sample_configs(psi, 8, 17);
    double worst_log = 0.0, worst_phase = 0.0;
    for (const auto& w : pop) {
      GuidingEval a, b;
      psi.evaluate(w.R, a);
      for (std::size_t i = 0; i < psi.n_electrons(); ++i)
        for (std::size_t j = i + 1; j < psi.n_electrons(); ++j) {
          Configuration s = w.R;
          s.set(i, w.R.x(j), w.R.y(j), w.R.z(j));
          s.set(j, w.R.x(i), w.R.y(i), w.R.z(i));
          psi.evaluate(s, b);
          worst_log = std::max(worst_log, std::abs(b.log_abs - a.log_abs));
          worst_phase =
              std::max(worst_phase, std::abs(std::remainder(b.phase - a.phase - std::numbers::pi, 2 * std::numbers::pi)));
        }
    }
    out.push_back({fmt("antisymmetry Z=", z), worst_log < 1e-10 && worst_phase < 1e-10,
                   fmt("max |d log|Psi|| = ", worst_log, ", max |d phase - pi| = ", worst_phase)});
  }
  return out;
}

Checks drift_laplacian_fd() {
  Checks out;
  const GuidingFunction& psi = atom_guiding(2);
  const Population pop = sample_configs(psi, 6, 23);
  double worst_drift = 0.0, worst_phase = 0.0, worst_lap = 0.0;
  for (const auto& w : pop) {
    GuidingEval e;
    psi.evaluate(w.R, e);
    const std::size_t dim = w.R.coords().size();
    std::vector<double> fd_drift(dim), fd_phase(dim);
    double fd_lap = 0.0;
    const double h1 = 1e-4, h2 = 1e-3;
    for (std::size_t k = 0; k < dim; ++k) {
      auto at = [&](double d) {
        Configuration R = w.R;
        R.coords()[k] += d;
        GuidingEval t;
        psi.evaluate(R, t);
        return t;
      };
      const GuidingEval m2 = at(-2 * h1), m1 = at(-h1), p1 = at(h1), p2 = at(2 * h1);
      fd_drift[k] = (m2.log_abs - 8 * m1.log_abs + 8 * p1.log_abs - p2.log_abs) / (12 * h1);
      auto dph = [&](const GuidingEval& x) { return std::remainder(x.phase - e.phase, 2 * std::numbers::pi); };
      fd_phase[k] = (dph(m2) - 8 * dph(m1) + 8 * dph(p1) - dph(p2)) / (12 * h1);
      const GuidingEval n2 = at(-2 * h2), n1 = at(-h2), q1 = at(h2), q2 = at(2 * h2);
      fd_lap += (-n2.log_abs + 16 * n1.log_abs - 30 * e.log_abs + 16 * q1.log_abs - q2.log_abs) / (12 * h2 * h2);
    }
    double dd = 0.0, dn = 0.0, pd = 0.0, pn = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      dd += std::pow(e.drift[k] - fd_drift[k], 2);
      dn += e.drift[k] * e.drift[k];
      pd += std::pow(e.phase_grad[k] - fd_phase[k], 2);
      pn += e.phase_grad[k] * e.phase_grad[k];
    }
    worst_drift = std::max(worst_drift, std::sqrt(dd / dn));
    worst_phase = std::max(worst_phase, std::sqrt(pd / pn));
    worst_lap = std::max(worst_lap, std::abs(e.laplacian_log.real() - fd_lap) / std::abs(fd_lap));
  }
  out.push_back({"drift vs finite differences", worst_drift < 1e-6, fmt("max relative error ", worst_drift)});
  out.push_back({"phase gradient vs finite differences", worst_phase < 1e-6, fmt("max relative error ", worst_phase)});
  out.push_back({"Laplacian vs finite differences", worst_lap < 1e-4, fmt("max relative error ", worst_lap)});
  return out;
}

Checks landau_orthonormality() {
  const double gamma = atom_config(2).field.gamma();
  const int n_phi = 64, n_rho = 20000;
  const double rmax = std::sqrt(2.0 * 80.0 / gamma), h = rmax / n_rho;
  double worst = 0.0;
  for (int m = 0; m <= 4; ++m)
    for (int mp = m; mp <= 4; ++mp) {
      // Simpson in rho, trapezoid in phi (exact for these trigonometric integrands).
      std::complex<double> sum = 0.0;
      for (int i = 0; i <= n_rho; ++i) {
        const double rho = i * h;
        const double wr = (i == 0 || i == n_rho) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        std::complex<double> ring = 0.0;
        for (int k = 0; k < n_phi; ++k) {
          const double phi = 2 * std::numbers::pi * k / n_phi;
          ring += std::conj(eval_transverse({m, gamma}, rho, phi)) * eval_transverse({mp, gamma}, rho, phi);
        }
        sum += wr * rho * ring * (2 * std::numbers::pi / n_phi);
      }
      sum *= h / 3.0;
      worst = std::max(worst, std::abs(sum - (m == mp ? 1.0 : 0.0)));
    }
  return {{"Landau orthonormality", worst < 1e-9, fmt("max |<m|m'> - delta| = ", worst)}};
}

Checks kernel_far_field_symmetry() {
  Checks out;
  const RunConfig cfg = atom_config(2);
  const double gamma = cfg.field.gamma();
  const KernelTable t = KernelTable::build(gamma, 2.0, {0, 1}, kernel_grid_for(cfg));
  const double far = 100.0 / std::sqrt(gamma);
  double worst = 0.0;
  for (int m : {0, 1}) {
    worst = std::max(worst, std::abs(t.nuclear(m, far) * far / -2.0 - 1.0));
    worst = std::max(worst, std::abs(nuclear_kernel(gamma, m, 2.0, far).value * far / -2.0 - 1.0));
  }
  for (auto [m, mp] : {std::pair{0, 0}, {0, 1}, {1, 1}}) {
    worst = std::max(worst, std::abs(t.direct(m, mp, far) * far - 1.0));
    worst = std::max(worst, std::abs(direct_kernel(gamma, m, mp, far).value * far - 1.0));
  }
  out.push_back({"kernel far field 1/|z|", worst < 1e-3, fmt("max |z K(z)/q - 1| = ", worst)});

  double asym = 0.0, odd = 0.0;
  for (double zeta : {0.0, 0.013, 0.07, 0.4, 2.5}) {
    asym = std::max(asym, std::abs(t.direct(0, 1, zeta) - t.direct(1, 0, zeta)));
    asym = std::max(asym, std::abs(t.exchange(0, 1, zeta) - t.exchange(1, 0, zeta)));
    asym = std::max(asym, std::abs(direct_kernel(gamma, 0, 1, zeta).value - direct_kernel(gamma, 1, 0, zeta).value) /
                              direct_kernel(gamma, 0, 1, zeta).value);
    for (int m : {0, 1}) odd = std::max(odd, std::abs(t.nuclear(m, zeta) - t.nuclear(m, -zeta)));
    odd = std::max(odd, std::abs(t.direct(0, 1, zeta) - t.direct(0, 1, -zeta)));
  }
  out.push_back({"kernel m <-> m' symmetry", asym < 1e-13, fmt("max asymmetry ", asym)});
  out.push_back({"kernel evenness", odd == 0.0, fmt("max |K(z) - K(-z)| = ", odd)});
  return out;
}

Checks zero_variance() {
  Checks out;
  const auto sep = oracle::separable_test_hamiltonian(2.0, 1.0);
  const StepLaw law{0.01, true, MoveMode::AllElectron};
  PopulationControl control;
  control.target = 20;
  control.e_t = sep.exact_energy;
  control.block_time = 20 * law.dtau;
  BranchContext ctx{5, 0, 0, 20};

  Population pop = init_walkers(sep.guiding, 20, 5, law, 10);
  StageResult v;
  v.spec = {StageKind::Vqmc, 6, 20, 1};
  run_stage(v, pop, sep.guiding, law, control, ctx);
  double var = v.sigma * v.sigma;
  out.push_back({"zero-variance VQMC", std::abs(v.energy - sep.exact_energy) < 1e-8 && var < 1e-12,
                 fmt("E - E0 = ", v.energy - sep.exact_energy, ", block variance ", var)});

  // One step: every weight must equal exp(-dtau (E0 - E_T)).
  Population one = pop;
  const double e_t = sep.exact_energy + 0.3;
  fp_step(one, sep.guiding, law, e_t);
  double wdev = 0.0;
  const double expect = std::exp(-law.dtau * (sep.exact_energy - e_t));
  for (const auto& w : one) wdev = std::max(wdev, std::abs(w.weight / expect - 1.0));
  out.push_back({"zero-variance weights", wdev < 1e-12, fmt("max relative weight deviation ", wdev)});

  StageResult f;
  f.spec = {StageKind::Fpdqmc, 6, 20, 1};
  run_stage(f, pop, sep.guiding, law, control, ctx);
  var = f.sigma * f.sigma;
  out.push_back({"zero-variance FPDQMC", std::abs(f.energy - sep.exact_energy) < 1e-8 && var < 1e-12,
                 fmt("E - E0 = ", f.energy - sep.exact_energy, ", block variance ", var)});
  return out;
}

Checks branching_expectation() {
  Checks out;
  BranchContext ctx{99, 0, 0, 1e9};
  Walker w;
  w.rng = make_walker_rng(99, 0);
  const int trials = 100000;
  long twos = 0, threes = 0;
  for (int t = 0; t < trials; ++t) {
    w.weight = 2.5;
    Population pop{w};
    ++ctx.step;
    branch(pop, ctx);
    twos += pop.size() == 2;
    threes += pop.size() == 3;
    w = std::move(pop.front());
  }
  const double f2 = static_cast<double>(twos) / trials;
  out.push_back({"weight 2.5 -> 2 or 3 copies at 1/2", twos + threes == trials && std::abs(f2 - 0.5) < 0.005,
                 fmt("P(2) = ", f2, ", P(3) = ", static_cast<double>(threes) / trials)});

  // Expected population equals the total weight.
  Rng rng(1234);
  Population base(100);
  double total = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    base[k].weight = std::uniform_real_distribution<double>(0.05, 3.0)(rng);
    base[k].rng = make_walker_rng(1234, k);
    total += base[k].weight;
  }
  const int reps = 4000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    Population pop = base;
    for (auto& x : pop) x.rng.discard(static_cast<unsigned long long>(r) * 3);
    ++ctx.step;
    branch(pop, ctx);
    const double n = static_cast<double>(pop.size());
    s += n;
    s2 += n * n;
  }
  const double mean = s / reps, sd = std::sqrt(std::max(0.0, s2 / reps - mean * mean));
  const double z = std::abs(mean - total) / (sd / std::sqrt(static_cast<double>(reps)));
  out.push_back({"E[population] = total weight", z < 3.0, fmt("mean ", mean, " vs ", total, " (", z, " sigma)")});
  return out;
}

Checks population_control() {
  const GuidingFunction& psi = atom_guiding(2);
  const double w0 = 100;
  const StepLaw law{1e-4, true, MoveMode::AllElectron};
  Population pop = init_walkers(psi, static_cast<int>(w0), 31, law, 50);
  PopulationControl control;
  control.target = w0;
  control.gain = 0.1;
  BranchContext ctx{31, 0, 0, w0};
  StageResult v;
  v.spec = {StageKind::Vqmc, 10, 50, 2};
  run_stage(v, pop, psi, law, control, ctx);
  control.e_t = v.energy;
  StageResult f;
  f.spec = {StageKind::Fpdqmc, 300, 20, 30};
  control.block_time = f.spec.steps_per_block * law.dtau;
  double lo = 1e300, hi = 0.0;
  auto hook = [&](const StageResult& r) {
    const double p = r.blocks.back().population;
    lo = std::min({lo, p, static_cast<double>(pop.size())});
    hi = std::max({hi, p, static_cast<double>(pop.size())});
    return true;
  };
  run_stage(f, pop, psi, law, control, ctx, hook);
  double mean = 0.0;
  int n = 0;
  for (const auto& b : f.blocks)
    if (!b.equilibration) {
      mean += b.population;
      ++n;
    }
  mean /= n;
  return {{"population within [0.5, 2] W0 over 300 blocks", lo >= 0.5 * w0 && hi <= 2.0 * w0,
           fmt("min ", lo, ", max ", hi, ", W0 ", w0)},
          {"mean population within 10 % of W0", std::abs(mean / w0 - 1.0) < 0.1, fmt("mean ", mean)}};
}

Checks time_step_halving() {
  const OrbitalSet& orbs = atom_orbitals(2);
  auto run = [&](double dtau, int steps, std::uint64_t seed) {
    RunConfig cfg = atom_config(2);
    cfg.n_walkers = 200;
    cfg.dtau = dtau;
    cfg.qmc.vqmc_dtau = 1e-4;
    cfg.seed = seed;
    cfg.schedule = {{StageKind::Vqmc, 10, 100, 2}, {StageKind::Fpdqmc, 100, steps, 20}};
    PipelineOptions opt;
    opt.write_outputs = false;
    return run_pipeline(cfg, orbs, opt).stages.back();
  };
  const StageResult a = run(1e-4, 100, 41), b = run(5e-5, 200, 42);
  const double comb = std::hypot(a.error, b.error);
  const double shift = std::abs(a.energy - b.energy);
  return {{"He FPDQMC dtau halving < 2 combined sigma", shift < 2.0 * comb,
           fmt("E(1e-4) = ", a.energy, " +- ", a.error, ", E(5e-5) = ", b.energy, " +- ", b.error, ", shift ", shift,
               " = ", shift / comb, " sigma")}};
}

Checks reproducibility() {
  Checks out;
#ifdef _OPENMP
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
#endif
  const OrbitalSet& orbs = atom_orbitals(2);
  auto config = [&](const std::string& dir) {
    RunConfig cfg = atom_config(2);
    cfg.n_walkers = 40;
    cfg.schedule = {{StageKind::Vqmc, 4, 20, 1}, {StageKind::Fpdqmc, 6, 20, 2}, {StageKind::Rpdqmc, 6, 20, 2}};
    cfg.qmc.checkpoint_interval = 2;
    cfg.out.dir = dir;
    return cfg;
  };
  auto outputs = [](const RunConfig& cfg) {
    return test::slurp(cfg.out.resolve(cfg.out.summary)) + test::slurp(cfg.out.resolve(cfg.out.trace));
  };
  const RunConfig a = config(test::scratch_dir("repro-a")), b = config(test::scratch_dir("repro-b")),
                  c = config(test::scratch_dir("repro-c"));
  run_pipeline(a, orbs, {});
  run_pipeline(c, orbs, {});
  out.push_back({"seeded rerun identical", !outputs(a).empty() && outputs(a) == outputs(c), "summary and trace bytes"});

  PipelineOptions stop;
  stop.stop_after_blocks = 7;  // four VQMC blocks, then three into FPDQMC
  const PipelineResult part = run_pipeline(b, orbs, stop);
  PipelineOptions resume;
  resume.resume = true;
  const PipelineResult rest = run_pipeline(b, orbs, resume);
  out.push_back({"kill and resume mid-FPDQMC identical",
                 part.interrupted && rest.resumed && rest.complete && outputs(a) == outputs(b),
                 fmt("interrupted after ", part.stages[0].blocks.size() + part.stages[1].blocks.size(), " blocks")});
#ifdef _OPENMP
  const RunConfig d = config(test::scratch_dir("repro-d"));
  omp_set_num_threads(3);
  run_pipeline(d, orbs, {});
  out.push_back({"independent of worker count", outputs(a) == outputs(d), "1 vs 3 threads"});
  omp_set_num_threads(threads);
#endif
  return out;
}

}  // namespace magdmc::props
