#include "magdmc/qmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "magdmc/parallel.hpp"

namespace magdmc {

namespace {

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

Rng make_walker_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{lo32(seed), hi32(seed), lo32(index), hi32(index), 0u};
  return Rng(seq);
}

Rng make_child_rng(std::uint64_t seed, std::uint64_t step, std::uint64_t birth) {
  std::seed_seq seq{lo32(seed), hi32(seed), lo32(step), hi32(step), lo32(birth), hi32(birth), 1u};
  return Rng(seq);
}

// ------------------------------------------------------------ sampling

void sample_transverse(int m, double gamma, Rng& rng, double& rho, double& phi) {
  std::gamma_distribution<double> g(m + 1.0, 1.0);
  const double u = g(rng);  // gamma rho^2 / 2
  rho = std::sqrt(2.0 * u / gamma);
  phi = 2.0 * std::numbers::pi * uniform01(rng);
}

LongitudinalSampler::LongitudinalSampler(const LongitudinalSet& orbs, int points) {
  const double a = orbs.lower(), b = orbs.upper();
  z_.resize(points);
  for (int k = 0; k < points; ++k) z_[k] = a + (b - a) * k / (points - 1.0);
  const std::size_t n = orbs.size();
  std::vector<LongitudinalValue> f(n);
  std::vector<std::vector<double>> dens(n, std::vector<double>(points));
  for (int k = 0; k < points; ++k) {
    orbs.eval_all(z_[k], f.data());
    for (std::size_t nu = 0; nu < n; ++nu) dens[nu][k] = f[nu].f * f[nu].f;
  }
  cdf_.assign(n, std::vector<double>(points, 0.0));
  for (std::size_t nu = 0; nu < n; ++nu) {
    for (int k = 1; k < points; ++k)
      cdf_[nu][k] = cdf_[nu][k - 1] + 0.5 * (dens[nu][k] + dens[nu][k - 1]) * (z_[k] - z_[k - 1]);
    const double total = cdf_[nu].back();
    if (!(total > 0.0)) throw QmcError("longitudinal orbital has no weight on its domain");
    for (double& c : cdf_[nu]) c /= total;
  }
}

double LongitudinalSampler::sample(std::size_t nu, double u) const {
  const auto& c = cdf_.at(nu);
  auto it = std::upper_bound(c.begin(), c.end(), u);
  std::size_t k = static_cast<std::size_t>(std::distance(c.begin(), it));
  k = std::clamp<std::size_t>(k, 1, c.size() - 1);
  const double span = c[k] - c[k - 1];
  const double t = span > 0.0 ? (u - c[k - 1]) / span : 0.5;
  return z_[k - 1] + t * (z_[k] - z_[k - 1]);
}

// --------------------------------------------------------------- moves

namespace {

void move_all(const GuidingFunction& psi, Walker& w, const StepLaw& law, MoveCounts& counts) {
  thread_local GuidingEval trial;
  thread_local Configuration Rp;
  const double tau = law.dtau, sq = std::sqrt(tau);
  std::normal_distribution<double> normal;
  const auto& x = w.R.coords();
  const auto& v = w.eval.drift;
  Rp = w.R;
  auto& xp = Rp.coords();
  double chi2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double chi = normal(w.rng);
    chi2 += chi * chi;
    xp[k] = x[k] + tau * v[k] + sq * chi;
  }
  const double u = uniform01(w.rng);
  ++counts.proposed;
  if (!psi.evaluate(Rp, trial)) {
    ++w.age;
    return;
  }
  bool accept = true;
  if (law.accept_reject) {
    double back = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double d = x[k] - xp[k] - tau * trial.drift[k];
      back += d * d;
    }
    const double log_a = 2.0 * (trial.log_abs - w.eval.log_abs) - back / (2.0 * tau) + 0.5 * chi2;
    accept = log_a >= 0.0 || u < std::exp(log_a);
  }
  if (accept) {
    std::swap(w.R, Rp);
    std::swap(w.eval, trial);
    w.age = 0;
    ++counts.accepted;
  } else {
    ++w.age;
  }
}

// Electron-by-electron sweep; the determinant ratio comes from the
// Sherman-Morrison-maintained inverse and the cached eval is refreshed once
// at the end.
void move_single(const GuidingFunction& psi, Walker& w, const StepLaw& law, MoveCounts& counts) {
  const double tau = law.dtau, sq = std::sqrt(tau);
  const double gamma = psi.hamiltonian().gamma;
  const std::size_t n = w.R.size();
  std::normal_distribution<double> normal;
  SlaterMatrix sm(psi.orbitals_ptr(), gamma);
  if (!sm.build(w.R)) throw QmcError("walker sits on a node at the start of a sweep");
  JastrowValue jv;
  if (psi.uses_jastrow()) jv = jastrow_u(psi.jastrow(), w.R);
  OrbitalRow cur, prop;
  Configuration Rp = w.R;
  bool moved = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = w.R.x(i), y = w.R.y(i), z = w.R.z(i);
    orbital_row(psi.orbitals(), gamma, x, y, z, cur);
    const Eigen::Vector3cd gd = sm.grad_at(i, cur, 1.0);
    double v[3], chi[3], xp[3];
    const double r[3] = {x, y, z};
    double chi2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      v[k] = gd[k].real() - (psi.uses_jastrow() ? jv.grad[3 * i + k] : 0.0);
      chi[k] = normal(w.rng);
      chi2 += chi[k] * chi[k];
      xp[k] = r[k] + tau * v[k] + sq * chi[k];
    }
    const double u = uniform01(w.rng);
    ++counts.proposed;
    Rp.set(i, xp[0], xp[1], xp[2]);
    auto reject = [&] {
      Rp.set(i, x, y, z);
    };
    if (!psi.admissible(Rp) || !orbital_row(psi.orbitals(), gamma, xp[0], xp[1], xp[2], prop)) {
      reject();
      continue;
    }
    const cplx q = sm.ratio(i, prop);
    if (!(std::abs(q) > 0.0) || !std::isfinite(std::abs(q))) {
      reject();
      continue;
    }
    JastrowValue jp;
    if (psi.uses_jastrow()) jp = jastrow_u(psi.jastrow(), Rp);
    const Eigen::Vector3cd gp = sm.grad_at(i, prop, q);
    double back = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double vp = gp[k].real() - (psi.uses_jastrow() ? jp.grad[3 * i + k] : 0.0);
      const double d = r[k] - xp[k] - tau * vp;
      back += d * d;
    }
    const double du = psi.uses_jastrow() ? jp.u - jv.u : 0.0;
    const double log_ratio = std::log(std::abs(q)) + prop.log_scale - cur.log_scale - du;
    const double log_a = 2.0 * log_ratio - back / (2.0 * tau) + 0.5 * chi2;
    if (log_a >= 0.0 || u < std::exp(log_a)) {
      sm.accept(i, prop, q);
      w.R.set(i, xp[0], xp[1], xp[2]);
      jv = std::move(jp);
      ++counts.accepted;
      moved = true;
    } else {
      reject();
    }
  }
  if (moved) {
    if (!psi.evaluate(w.R, w.eval)) throw QmcError("accepted configuration failed to evaluate");
    w.age = 0;
  } else {
    ++w.age;
  }
}

}  // namespace

void move_walker(const GuidingFunction& psi, Walker& w, const StepLaw& law, MoveCounts& counts) {
  if (law.moves == MoveMode::SingleElectron)
    move_single(psi, w, law, counts);
  else
    move_all(psi, w, law, counts);
}

Population init_walkers(const GuidingFunction& psi, int n_walkers, std::uint64_t seed, const StepLaw& law,
                        int pre_steps) {
  if (n_walkers < 1) throw std::invalid_argument("n_walkers must be >= 1");
  const LongitudinalSampler sampler(psi.orbitals());
  const double gamma = psi.hamiltonian().gamma;
  const std::size_t n = psi.n_electrons();
  Population pop(static_cast<std::size_t>(n_walkers));
  parallel_for(pop.size(), [&](std::size_t k) {
    Walker& w = pop[k];
    w.rng = make_walker_rng(seed, k);
    w.R = Configuration(n);
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw QmcError("could not place an initial walker off the nodes");
      for (std::size_t i = 0; i < n; ++i) {
        double rho, phi;
        sample_transverse(psi.orbitals().m(i), gamma, w.rng, rho, phi);
        w.R.set_cylindrical(i, rho, phi, sampler.sample(i, uniform01(w.rng)));
      }
      if (psi.evaluate(w.R, w.eval)) break;
    }
    MoveCounts c;
    for (int s = 0; s < pre_steps; ++s) move_walker(psi, w, law, c);
  });
  return pop;
}

BlockStats vqmc_block(Population& pop, const GuidingFunction& psi, int steps, const StepLaw& law) {
  BlockStats b;
  b.stage = StageKind::Vqmc;
  std::vector<MoveCounts> counts(pop.size());
  double sum = 0.0, im = 0.0;
  long accepted = 0, proposed = 0;
  for (int s = 0; s < steps; ++s) {
    for (auto& c : counts) c = {};
    parallel_for(pop.size(), [&](std::size_t k) { move_walker(psi, pop[k], law, counts[k]); });
    for (std::size_t k = 0; k < pop.size(); ++k) {
      sum += pop[k].eval.e_local.real();
      im += pop[k].eval.e_local.imag();
      accepted += counts[k].accepted;
      proposed += counts[k].proposed;
    }
  }
  const double n = static_cast<double>(steps) * static_cast<double>(pop.size());
  b.e_block = sum / n;
  b.im_energy = im / n;
  b.acceptance = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  b.population = static_cast<double>(pop.size());
  return b;
}

// ------------------------------------------------------------ diffusion

StepTally fp_step(Population& pop, const GuidingFunction& psi, const StepLaw& law, double e_t, bool release) {
  struct Part {
    cplx e{0.0, 0.0};
    MoveCounts moves;
    bool clamped = false;
  };
  std::vector<Part> parts(pop.size());
  const double tau = law.dtau;
  parallel_for(pop.size(), [&](std::size_t k) {
    Walker& w = pop[k];
    const cplx e_old = w.eval.e_local;
    move_walker(psi, w, law, parts[k].moves);
    const cplx e_new = w.eval.e_local;
    double wt = w.weight * std::exp(-tau * (0.5 * (e_old.real() + e_new.real()) - e_t));
    if (!(wt >= kWeightMin)) {
      wt = kWeightMin;
      parts[k].clamped = true;
    } else if (wt > kWeightMax) {
      wt = kWeightMax;
      parts[k].clamped = true;
    }
    w.weight = wt;
    if (release) w.phase += -tau * 0.5 * (e_old.imag() + e_new.imag());
    parts[k].e = e_new;
  });
  StepTally t;
  for (std::size_t k = 0; k < pop.size(); ++k) {
    const Walker& w = pop[k];
    const cplx u = release ? std::polar(w.weight, w.phase) : cplx(w.weight, 0.0);
    // f = Psi_G^* Psi: the mixed estimator pairs the walker phase with conj(E_L).
    t.num += u * std::conj(parts[k].e);
    t.den += u;
    t.weight += w.weight;
    t.fp_num += w.weight * parts[k].e.real();
    t.im_num += w.weight * parts[k].e.imag();
    t.clamps += parts[k].clamped ? 1 : 0;
    t.moves.accepted += parts[k].moves.accepted;
    t.moves.proposed += parts[k].moves.proposed;
  }
  return t;
}

void branch(Population& pop, BranchContext& ctx) {
  Population next;
  next.reserve(pop.size() + pop.size() / 4 + 4);
  std::size_t best = 0;
  for (std::size_t k = 0; k < pop.size(); ++k) {
    if (!(pop[k].weight > 0.0)) throw QmcError("branch: non-positive walker weight");
    if (pop[k].weight > pop[best].weight) best = k;
  }
  for (std::size_t k = 0; k < pop.size(); ++k) {
    Walker& w = pop[k];
    const long copies = static_cast<long>(std::floor(w.weight + uniform01(w.rng)));
    if (copies <= 0) continue;
    w.weight = 1.0;
    const std::size_t first = next.size();
    next.push_back(std::move(w));
    for (long c = 1; c < copies; ++c) {
      Walker child = next[first];
      child.rng = make_child_rng(ctx.seed, ctx.step, ++ctx.births);
      next.push_back(std::move(child));
    }
    if (static_cast<double>(next.size()) > kPopulationAbortFactor * ctx.target)
      throw QmcError("population exceeded " + std::to_string(kPopulationAbortFactor) + "x target (" +
                     std::to_string(next.size()) + " walkers at step " + std::to_string(ctx.step) +
                     "); population control failed");
  }
  if (next.empty()) {
    pop[best].weight = 1.0;
    next.push_back(std::move(pop[best]));
  }
  pop = std::move(next);
}

double update_offset(PopulationControl& c, double e_best, double population) {
  if (!(population > 0.0)) throw QmcError("update_offset: empty population");
  double e = e_best + (c.gain / c.block_time) * std::log(c.target / population);
  if (!c.recent.empty()) {
    const std::vector<double> r(c.recent.begin(), c.recent.end());
    const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    const double s = std::max(r.size() > 1 ? std_of(r) : 0.0, 1e-3 * std::abs(mean_of(r)));
    e = std::clamp(e, *lo - 10.0 * s, *hi + 10.0 * s);
  }
  if (!std::isfinite(e)) throw QmcError("update_offset: non-finite energy offset");
  c.e_t = e;
  return e;
}

BlockStats dqmc_block(Population& pop, const GuidingFunction& psi, int steps, const StepLaw& law,
                      PopulationControl& control, BranchContext& ctx, bool release) {
  BlockStats b;
  b.stage = release ? StageKind::Rpdqmc : StageKind::Fpdqmc;
  b.e_t = control.e_t;
  cplx num = 0.0, den = 0.0;
  double weight = 0.0, fp = 0.0, im = 0.0, pop_sum = 0.0;
  long accepted = 0, proposed = 0;
  for (int s = 0; s < steps; ++s) {
    const StepTally t = fp_step(pop, psi, law, control.e_t, release);
    num += t.num;
    den += t.den;
    weight += t.weight;
    fp += t.fp_num;
    im += t.im_num;
    accepted += t.moves.accepted;
    proposed += t.moves.proposed;
    b.clamp_events += t.clamps;
    ++ctx.step;
    branch(pop, ctx);
    pop_sum += static_cast<double>(pop.size());
  }
  b.e_fixed_phase = fp / weight;
  b.e_block = release ? (num / den).real() : b.e_fixed_phase;
  b.rp_signal = release ? std::abs(den) / weight : 1.0;
  b.im_energy = im / weight;
  b.acceptance = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  b.population = pop_sum / steps;
  return b;
}

// ------------------------------------------------------------- statistics

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(x.size());
}

double std_of(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double reblocked_error(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  std::vector<double> level = x;
  double best = std_of(level) / std::sqrt(static_cast<double>(level.size()));
  while (level.size() / 2 >= 8) {
    std::vector<double> next(level.size() / 2);
    for (std::size_t k = 0; k < next.size(); ++k) next[k] = 0.5 * (level[2 * k] + level[2 * k + 1]);
    level = std::move(next);
    best = std::max(best, std_of(level) / std::sqrt(static_cast<double>(level.size())));
  }
  return best;
}

namespace {

bool counts_toward_average(const StageResult& r, const BlockStats& b) {
  if (b.equilibration) return false;
  return !(r.signal_lost && b.block >= r.signal_lost_block);
}

std::vector<double> used_energies(const StageResult& r) {
  std::vector<double> e;
  for (const auto& b : r.blocks)
    if (counts_toward_average(r, b)) e.push_back(b.e_block);
  return e;
}

}  // namespace

void fill_running(StageResult& r, BlockStats& b) {
  if (r.spec.kind == StageKind::Rpdqmc && !r.signal_lost && b.rp_signal < kRpSignalFloor) {
    r.signal_lost = true;
    r.signal_lost_block = b.block;
  }
  std::vector<double> e = used_energies(r);
  if (counts_toward_average(r, b)) e.push_back(b.e_block);
  b.e_average = mean_of(e);
  b.sigma = std_of(e);
}

void finalize_stage(StageResult& r) {
  const std::vector<double> e = used_energies(r);
  r.used_blocks = static_cast<int>(e.size());
  r.energy = mean_of(e);
  r.sigma = std_of(e);
  r.error = reblocked_error(e);
  double acc = 0.0, pop = 0.0;
  long clamps = 0;
  for (const auto& b : r.blocks) {
    acc += b.acceptance;
    pop += b.population;
    clamps += b.clamp_events;
  }
  const double n = r.blocks.empty() ? 1.0 : static_cast<double>(r.blocks.size());
  r.acceptance = acc / n;
  r.mean_population = pop / n;
  r.clamp_events = clamps;
}

void run_stage(StageResult& r, Population& pop, const GuidingFunction& psi, const StepLaw& law,
               PopulationControl& control, BranchContext& ctx, const BlockHook& hook) {
  const StageSpec& spec = r.spec;
  r.dtau = law.dtau;
  for (int k = static_cast<int>(r.blocks.size()); k < spec.n_blocks; ++k) {
    BlockStats b;
    if (spec.kind == StageKind::Vqmc) {
      b = vqmc_block(pop, psi, spec.steps_per_block, law);
      b.e_fixed_phase = b.e_block;
      b.e_t = std::numeric_limits<double>::quiet_NaN();
    } else {
      b = dqmc_block(pop, psi, spec.steps_per_block, law, control, ctx, spec.kind == StageKind::Rpdqmc);
    }
    b.block = k;
    b.equilibration = k < spec.equilibration_blocks;
    fill_running(r, b);
    r.blocks.push_back(b);
    if (spec.kind != StageKind::Vqmc) {
      control.recent.push_back(b.e_fixed_phase);
      while (control.recent.size() > control.history) control.recent.pop_front();
      std::vector<double> fp;
      for (const auto& x : r.blocks)
        if (!x.equilibration) fp.push_back(x.e_fixed_phase);
      update_offset(control, fp.empty() ? b.e_fixed_phase : mean_of(fp), static_cast<double>(pop.size()));
    }
    if (hook && !hook(r) && k + 1 < spec.n_blocks) {
      finalize_stage(r);
      return;
    }
  }
  r.complete = true;
  finalize_stage(r);
}

StageResult rp_stage(Population& pop, const GuidingFunction& psi, const StageSpec& spec, const StepLaw& law,
                     PopulationControl& control, BranchContext& ctx) {
  StageResult r;
  r.spec = spec;
  for (auto& w : pop) w.phase = 0.0;
  run_stage(r, pop, psi, law, control, ctx);
  return r;
}

}  // namespace magdmc
