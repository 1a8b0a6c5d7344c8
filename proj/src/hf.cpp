#include "magdmc/hf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "magdmc/binary_io.hpp"
#include "magdmc/parallel.hpp"

namespace magdmc {

// ---------------------------------------------------------------- FemGrid

FemGrid::FemGrid(const SplineBasis& basis, int ppe) : basis_(basis), per_element_(ppe) {
  const GaussRule g = gauss_legendre(ppe);
  const auto& bp = basis_.breakpoints();
  auto add_rule = [&](double a, double b, std::vector<Point>& out) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < ppe; ++i) {
      Point pt;
      pt.z = mid + half * g.x[i];
      pt.w = half * g.w[i];
      pt.basis = basis_.evaluate(pt.z);
      out.push_back(pt);
    }
  };
  for (std::size_t e = 0; e + 1 < bp.size(); ++e) add_rule(bp[e], bp[e + 1], outer_);
  split_.resize(outer_.size());
  for (std::size_t p = 0; p < outer_.size(); ++p) {
    const std::size_t e = element(p);
    split_[p].reserve(2 * ppe);
    add_rule(bp[e], outer_[p].z, split_[p]);
    add_rule(outer_[p].z, bp[e + 1], split_[p]);
  }
}

double FemGrid::combine(const Point& pt, const Eigen::VectorXd& c, std::size_t n) {
  double s = 0.0;
  for (int k = 0; k < pt.basis.count; ++k) {
    const long a = pt.basis.first + k - 1;
    if (a >= 0 && a < static_cast<long>(n)) s += c[a] * pt.basis.v[k];
  }
  return s;
}

// ------------------------------------------------------ LongitudinalProblem

namespace {

template <class F>
void for_each_pair(const FemGrid::Point& pt, std::size_t n, F f) {
  for (int k = 0; k < pt.basis.count; ++k) {
    const long a = pt.basis.first + k - 1;
    if (a < 0 || a >= static_cast<long>(n)) continue;
    for (int l = 0; l < pt.basis.count; ++l) {
      const long b = pt.basis.first + l - 1;
      if (b < 0 || b >= static_cast<long>(n)) continue;
      f(a, b, k, l);
    }
  }
}

}  // namespace

LongitudinalProblem::LongitudinalProblem(const SplineBasis& basis, int ppe, std::shared_ptr<const KernelTable> kernels)
    : grid_(basis, ppe), n_(basis.size()), kernels_(std::move(kernels)) {
  overlap_ = Eigen::MatrixXd::Zero(n_, n_);
  kinetic_ = Eigen::MatrixXd::Zero(n_, n_);
  for (const auto& pt : grid_.outer()) {
    for_each_pair(pt, n_, [&](long a, long b, int k, int l) {
      overlap_(a, b) += pt.w * pt.basis.v[k] * pt.basis.v[l];
      kinetic_(a, b) += 0.5 * pt.w * pt.basis.d1[k] * pt.basis.d1[l];
    });
  }
  if (kernels_)
    for (int m : kernels_->channels()) {
      const HermiteTable& v = kernels_->nuclear_table(m);
      nuclear_[m] = local_potential([&](double z) { return v(z); });
    }
}

const Eigen::MatrixXd& LongitudinalProblem::nuclear(int m) const {
  auto it = nuclear_.find(m);
  if (it == nuclear_.end()) throw std::out_of_range("no nuclear kernel for m=" + std::to_string(m));
  return it->second;
}

Eigen::MatrixXd LongitudinalProblem::local_potential(const std::function<double(double)>& v) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
  for (const auto& pt : grid_.outer()) {
    const double wv = pt.w * v(pt.z);
    for_each_pair(pt, n_, [&](long a, long b, int k, int l) { out(a, b) += wv * pt.basis.v[k] * pt.basis.v[l]; });
  }
  return out;
}

ChannelSolution LongitudinalProblem::solve(const Eigen::MatrixXd& h) const {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(h, overlap_, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("generalized eigensolver failed: overlap matrix singular or not positive definite (n=" +
                             std::to_string(n_) + ")");
  ChannelSolution sol;
  sol.eigenvalues = es.eigenvalues();
  sol.vectors = es.eigenvectors();
  const Eigen::Index check = std::min<Eigen::Index>(sol.vectors.cols(), 8);
  for (Eigen::Index j = 0; j < check; ++j) {
    const Eigen::VectorXd c = sol.vectors.col(j);
    const double r = (h * c - sol.eigenvalues[j] * (overlap_ * c)).norm() / c.norm();
    sol.max_residual = std::max(sol.max_residual, r);
  }
  return sol;
}

ChannelSolution LongitudinalProblem::solve_channel(int m, const Eigen::MatrixXd* mean_field) const {
  Eigen::MatrixXd h = kinetic_ + nuclear(m);
  if (mean_field) h += *mean_field;
  return solve(h);
}

const LongitudinalProblem::PairKernel& LongitudinalProblem::pair_kernel(bool exchange, int m, int mp) const {
  if (!exchange || m == mp) exchange = false;
  const auto key = std::make_tuple(exchange, std::min(m, mp), std::max(m, mp));
  std::lock_guard lock(cache_mutex_);
  auto it = pair_cache_.find(key);
  if (it != pair_cache_.end()) return it->second;
  const HermiteTable& t = exchange ? kernels_->exchange_table(m, mp) : kernels_->direct_table(m, mp);
  const auto& outer = grid_.outer();
  const std::size_t nq = outer.size(), ns = 2 * grid_.per_element();
  PairKernel pk;
  pk.outer.resize(nq, nq);
  pk.split.resize(nq, ns);
  for (std::size_t p = 0; p < nq; ++p) {
    for (std::size_t q = 0; q <= p; ++q) pk.outer(p, q) = pk.outer(q, p) = t(outer[p].z - outer[q].z);
    const auto& sp = grid_.split(p);
    for (std::size_t s = 0; s < ns; ++s) pk.split(p, s) = t(outer[p].z - sp[s].z);
  }
  return pair_cache_.emplace(key, std::move(pk)).first->second;
}

std::vector<double> LongitudinalProblem::values_at_outer(const Eigen::VectorXd& c) const {
  std::vector<double> f(grid_.outer().size());
  for (std::size_t p = 0; p < f.size(); ++p) f[p] = FemGrid::combine(grid_.outer()[p], c, n_);
  return f;
}

Eigen::MatrixXd LongitudinalProblem::direct_matrix(int m, const std::vector<LongitudinalOrbital>& orbitals) const {
  const auto& outer = grid_.outer();
  const std::size_t nq = outer.size(), ppe = grid_.per_element();
  std::vector<double> j_field(nq, 0.0);
  for (const auto& orb : orbitals) {
    const PairKernel& pk = pair_kernel(false, m, orb.m);
    const std::vector<double> f = values_at_outer(orb.coeffs);
    std::vector<double> wrho(nq);
    for (std::size_t q = 0; q < nq; ++q) wrho[q] = outer[q].w * f[q] * f[q];
    for (std::size_t p = 0; p < nq; ++p) {
      const std::size_t e0 = grid_.element(p) * ppe, e1 = e0 + ppe;
      double acc = 0.0;
      for (std::size_t q = 0; q < e0; ++q) acc += wrho[q] * pk.outer(p, q);
      for (std::size_t q = e1; q < nq; ++q) acc += wrho[q] * pk.outer(p, q);
      const auto& sp = grid_.split(p);
      for (std::size_t s = 0; s < sp.size(); ++s) {
        const double fs = FemGrid::combine(sp[s], orb.coeffs, n_);
        acc += sp[s].w * fs * fs * pk.split(p, s);
      }
      j_field[p] += acc;
    }
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
  for (std::size_t p = 0; p < nq; ++p) {
    const double wj = outer[p].w * j_field[p];
    for_each_pair(outer[p], n_, [&](long a, long b, int k, int l) { out(a, b) += wj * outer[p].basis.v[k] * outer[p].basis.v[l]; });
  }
  return out;
}

Eigen::MatrixXd LongitudinalProblem::exchange_matrix(int m, const std::vector<LongitudinalOrbital>& orbitals) const {
  const auto& outer = grid_.outer();
  const std::size_t nq = outer.size(), ppe = grid_.per_element();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
  Eigen::MatrixXd inner(nq, n_);
  auto scatter = [&](std::size_t p, const FemGrid::Point& pt, double coef) {
    for (int k = 0; k < pt.basis.count; ++k) {
      const long a = pt.basis.first + k - 1;
      if (a >= 0 && a < static_cast<long>(n_)) inner(p, a) += coef * pt.basis.v[k];
    }
  };
  for (const auto& orb : orbitals) {
    const PairKernel& pk = pair_kernel(true, m, orb.m);
    const std::vector<double> f = values_at_outer(orb.coeffs);
    inner.setZero();
    for (std::size_t p = 0; p < nq; ++p) {
      const std::size_t e0 = grid_.element(p) * ppe, e1 = e0 + ppe;
      for (std::size_t q = 0; q < nq; ++q) {
        if (q >= e0 && q < e1) continue;
        scatter(p, outer[q], outer[q].w * f[q] * pk.outer(p, q));
      }
      const auto& sp = grid_.split(p);
      for (std::size_t s = 0; s < sp.size(); ++s)
        scatter(p, sp[s], sp[s].w * FemGrid::combine(sp[s], orb.coeffs, n_) * pk.split(p, s));
    }
    for (std::size_t p = 0; p < nq; ++p) {
      const auto& pt = outer[p];
      for (int k = 0; k < pt.basis.count; ++k) {
        const long a = pt.basis.first + k - 1;
        if (a < 0 || a >= static_cast<long>(n_)) continue;
        out.row(a) += (pt.w * f[p] * pt.basis.v[k]) * inner.row(p);
      }
    }
  }
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd LongitudinalProblem::mean_field(int m, const std::vector<LongitudinalOrbital>& orbitals) const {
  return direct_matrix(m, orbitals) - exchange_matrix(m, orbitals);
}

HfEnergyParts LongitudinalProblem::energy(const std::vector<LongitudinalOrbital>& orbitals, double beta,
                                          bool spin_zeeman) const {
  HfEnergyParts e;
  std::map<int, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> fields;
  for (const auto& o : orbitals)
    if (!fields.count(o.m)) fields[o.m] = {direct_matrix(o.m, orbitals), exchange_matrix(o.m, orbitals)};
  for (const auto& o : orbitals) {
    const auto& c = o.coeffs;
    e.kinetic += c.dot(kinetic_ * c);
    e.nuclear += c.dot(nuclear(o.m) * c);
    e.hartree += 0.5 * c.dot(fields[o.m].first * c);
    e.exchange += 0.5 * c.dot(fields[o.m].second * c);
  }
  const double n = static_cast<double>(orbitals.size());
  const double gamma = kGammaPerBeta * beta;
  e.transverse = 0.5 * n * gamma;
  e.spin = spin_zeeman ? -0.5 * n * gamma : 0.0;
  return e;
}

int LongitudinalProblem::count_nodes(const Eigen::VectorXd& c) const {
  const std::vector<double> f = values_at_outer(c);
  double fmax = 0.0;
  for (double v : f) fmax = std::max(fmax, std::abs(v));
  int nodes = 0, last = 0;
  for (double v : f) {
    if (std::abs(v) < 1e-6 * fmax) continue;
    const int s = v > 0 ? 1 : -1;
    if (last != 0 && s != last) ++nodes;
    last = s;
  }
  return nodes;
}

// ----------------------------------------------------------------- SCF

double hf_half_width(const RunConfig& c) {
  if (c.hf.half_width > 0.0) return c.hf.half_width;
  return 60.0 / std::sqrt(c.field.beta()) + 30.0 / c.z;
}

SplineBasis hf_basis(const RunConfig& c) {
  const double beta = c.field.beta();
  const double h0 = c.hf.first_element > 0.0 ? c.hf.first_element
                                              : 0.05 * std::min(1.0 / std::sqrt(beta), 1.0 / c.z);
  return SplineBasis::graded_symmetric(hf_half_width(c), c.hf.elements_per_side, h0, c.hf.spline_degree,
                                       std::max(1, c.hf.spline_degree - 2));
}

KernelGridSpec kernel_grid_for(const RunConfig& c) {
  KernelGridSpec g;
  g.z_extent = hf_half_width(c);
  return g;
}

std::vector<int> occupied_channels(const std::vector<Occupation>& occupations) {
  std::set<int> ms;
  for (const auto& o : occupations) ms.insert(o.m);
  return {ms.begin(), ms.end()};
}

namespace {

void fix_sign(Eigen::VectorXd& c) {
  Eigen::Index best = c.size() / 2;
  for (Eigen::Index a = c.size() / 2; a < c.size(); ++a)
    if (std::abs(c[a]) > std::abs(c[best])) best = a;
  if (c[best] < 0) c = -c;
}

std::vector<LongitudinalOrbital> select_orbitals(const LongitudinalProblem& prob, const RunConfig& cfg,
                                                 const std::map<int, ChannelSolution>& sols) {
  std::vector<LongitudinalOrbital> out;
  for (const auto& occ : cfg.occupations) {
    const ChannelSolution& s = sols.at(occ.m);
    const Eigen::Index scan = std::min<Eigen::Index>(s.vectors.cols(), 3 * (occ.nu_z + 1) + 6);
    bool found = false;
    for (Eigen::Index j = 0; j < scan; ++j) {
      Eigen::VectorXd c = s.vectors.col(j);
      if (prob.count_nodes(c) != occ.nu_z) continue;
      fix_sign(c);
      out.push_back({occ.m, occ.nu_z, s.eigenvalues[j], std::move(c)});
      found = true;
      break;
    }
    if (!found)
      throw ScfError("no eigenvector with " + std::to_string(occ.nu_z) + " nodes in channel m=" +
                         std::to_string(occ.m),
                     {});
  }
  return out;
}

}  // namespace

OrbitalSet scf(const RunConfig& cfg, std::shared_ptr<const KernelTable> kernels) {
  const double beta = cfg.field.beta();
  if (std::abs(kernels->gamma() - cfg.field.gamma()) > 1e-12 * cfg.field.gamma() || kernels->charge() != cfg.z)
    throw std::invalid_argument("kernel table was built for a different field or charge");
  const std::vector<int> channels = occupied_channels(cfg.occupations);
  for (int m : channels)
    if (std::find(kernels->channels().begin(), kernels->channels().end(), m) == kernels->channels().end())
      throw std::invalid_argument("kernel table lacks channel m=" + std::to_string(m));

  LongitudinalProblem prob(hf_basis(cfg), cfg.hf.quad_points, kernels);

  std::map<int, ChannelSolution> sols;
  for (int m : channels) sols[m] = prob.solve_channel(m);
  std::vector<LongitudinalOrbital> orbs = select_orbitals(prob, cfg, sols);

  std::map<int, Eigen::MatrixXd> field;
  double damping = cfg.hf.damping;
  double e_prev = prob.energy(orbs, beta, cfg.spin_zeeman_included).total();
  double de_prev = 0.0;
  int oscillations = 0;
  std::vector<ScfRecord> log;
  log.push_back({0, e_prev, 0.0, 0.0, damping});

  for (int it = 1; it <= cfg.hf.max_iterations; ++it) {
    std::vector<Eigen::MatrixXd> fresh(channels.size());
    parallel_for(channels.size(), [&](std::size_t i) { fresh[i] = prob.mean_field(channels[i], orbs); });
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const int m = channels[i];
      if (it == 1) field[m] = fresh[i];
      else field[m] = damping * field[m] + (1.0 - damping) * fresh[i];
    }
    std::vector<ChannelSolution> solved(channels.size());
    parallel_for(channels.size(),
                 [&](std::size_t i) { solved[i] = prob.solve_channel(channels[i], &field.at(channels[i])); });
    for (std::size_t i = 0; i < channels.size(); ++i) sols[channels[i]] = std::move(solved[i]);

    std::vector<LongitudinalOrbital> next = select_orbitals(prob, cfg, sols);
    double change = 0.0;
    for (std::size_t k = 0; k < next.size(); ++k) {
      if (next[k].coeffs.dot(prob.overlap() * orbs[k].coeffs) < 0) next[k].coeffs = -next[k].coeffs;
      const Eigen::VectorXd d = next[k].coeffs - orbs[k].coeffs;
      change = std::max(change, std::sqrt(std::max(0.0, d.dot(prob.overlap() * d))));
    }
    const double e = prob.energy(next, beta, cfg.spin_zeeman_included).total();
    const double de = e - e_prev;
    log.push_back({it, e, de, change, damping});
    orbs = std::move(next);
    e_prev = e;
    if (!std::isfinite(e)) throw ScfError("SCF energy became non-finite", log);
    if (std::abs(de) < cfg.hf.energy_tol && change < cfg.hf.orbital_tol) {
      OrbitalSet set;
      set.beta = beta;
      set.charge = cfg.z;
      set.spin_zeeman_included = cfg.spin_zeeman_included;
      set.basis = prob.basis();
      for (auto& o : orbs) fix_sign(o.coeffs);
      set.orbitals = std::move(orbs);
      set.parts = prob.energy(set.orbitals, beta, cfg.spin_zeeman_included);
      set.e_hf = {set.parts.total()};
      set.log = std::move(log);
      set.source_hash = hf_hash(cfg);
      return set;
    }
    // Energy oscillating without shrinking: damp harder.
    if (de * de_prev < 0.0 && std::abs(de) > 0.5 * std::abs(de_prev)) {
      if (++oscillations >= 2) {
        damping = 0.5 * (1.0 + damping);
        oscillations = 0;
      }
    } else {
      oscillations = 0;
    }
    de_prev = de;
  }
  throw ScfError("SCF did not converge in " + std::to_string(cfg.hf.max_iterations) + " iterations", log);
}

EnergyValue hf_total_energy(const OrbitalSet& set, const KernelTable& kernels, int ppe) {
  std::shared_ptr<const KernelTable> view(&kernels, [](const KernelTable*) {});
  LongitudinalProblem prob(set.basis, ppe, view);
  return {prob.energy(set.orbitals, set.beta, set.spin_zeeman_included).total()};
}

LongitudinalValue eval_longitudinal(const OrbitalSet& set, std::size_t nu, double z) {
  const auto v = set.basis.combine(set.orbitals.at(nu).coeffs, z);
  return {v[0], v[1], v[2]};
}

// ------------------------------------------------------------- file I/O

namespace {
constexpr const char* kOrbitalMagic = "magdmc-orbitals";
constexpr int kOrbitalVersion = 1;
}  // namespace

void write_orbital_file(const std::string& path, const OrbitalSet& s) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write orbital file '" + path + "'");
  out << std::setprecision(17);
  out << kOrbitalMagic << ' ' << kOrbitalVersion << '\n';
  out << "config_hash " << hex64(s.source_hash) << '\n';
  out << "beta " << s.beta << '\n';
  out << "charge " << s.charge << '\n';
  out << "spin_zeeman " << (s.spin_zeeman_included ? 1 : 0) << '\n';
  out << "degree " << s.basis.degree() << '\n';
  out << "breakpoints " << s.basis.breakpoints().size();
  for (double b : s.basis.breakpoints()) out << ' ' << b;
  out << '\n' << "multiplicity " << s.basis.multiplicity().size();
  for (int m : s.basis.multiplicity()) out << ' ' << m;
  out << '\n';
  out << "e_hf " << s.e_hf.hartree << '\n';
  out << "parts " << s.parts.kinetic << ' ' << s.parts.nuclear << ' ' << s.parts.hartree << ' ' << s.parts.exchange
      << ' ' << s.parts.transverse << ' ' << s.parts.spin << '\n';
  out << "orbitals " << s.orbitals.size() << '\n';
  for (const auto& o : s.orbitals) {
    out << "orbital " << o.m << ' ' << o.nu_z << ' ' << o.eigenvalue << ' ' << o.coeffs.size() << '\n';
    for (Eigen::Index a = 0; a < o.coeffs.size(); ++a) out << (a ? " " : "") << o.coeffs[a];
    out << '\n';
  }
  out << "scf_log " << s.log.size() << '\n';
  for (const auto& r : s.log)
    out << r.iteration << ' ' << r.energy << ' ' << r.delta_energy << ' ' << r.orbital_change << ' ' << r.damping
        << '\n';
  out << "end\n";
  if (!out) throw FormatError("write failed for orbital file '" + path + "'");
}

OrbitalSet read_orbital_file(const std::string& path, std::uint64_t expected_hash) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read orbital file '" + path + "'");
  auto expect = [&](const char* word) {
    std::string w;
    if (!(in >> w) || w != word) throw FormatError("orbital file '" + path + "': expected '" + word + "'");
  };
  int version = 0;
  expect(kOrbitalMagic);
  in >> version;
  if (version != kOrbitalVersion) throw FormatError("orbital file '" + path + "': unsupported version");
  OrbitalSet s;
  std::string hash;
  expect("config_hash");
  in >> hash;
  s.source_hash = std::stoull(hash, nullptr, 16);
  if (expected_hash != 0 && s.source_hash != expected_hash)
    throw FormatError("orbital file '" + path + "' was produced by a different configuration (hash " + hash +
                      ", expected " + hex64(expected_hash) + ")");
  int spin = 0, degree = 0;
  std::size_t nbp = 0, nmul = 0, norb = 0, nlog = 0;
  expect("beta");
  in >> s.beta;
  expect("charge");
  in >> s.charge;
  expect("spin_zeeman");
  in >> spin;
  s.spin_zeeman_included = spin != 0;
  expect("degree");
  in >> degree;
  expect("breakpoints");
  in >> nbp;
  std::vector<double> bp(nbp);
  for (auto& b : bp) in >> b;
  expect("multiplicity");
  in >> nmul;
  std::vector<int> mult(nmul);
  for (auto& m : mult) in >> m;
  if (!in) throw FormatError("orbital file '" + path + "': malformed basis");
  s.basis = SplineBasis(std::move(bp), degree, std::move(mult));
  expect("e_hf");
  in >> s.e_hf.hartree;
  expect("parts");
  in >> s.parts.kinetic >> s.parts.nuclear >> s.parts.hartree >> s.parts.exchange >> s.parts.transverse >>
      s.parts.spin;
  expect("orbitals");
  in >> norb;
  for (std::size_t i = 0; i < norb; ++i) {
    LongitudinalOrbital o;
    Eigen::Index nc = 0;
    expect("orbital");
    in >> o.m >> o.nu_z >> o.eigenvalue >> nc;
    if (!in || nc != static_cast<Eigen::Index>(s.basis.size()))
      throw FormatError("orbital file '" + path + "': coefficient count mismatch");
    o.coeffs.resize(nc);
    for (Eigen::Index a = 0; a < nc; ++a) in >> o.coeffs[a];
    s.orbitals.push_back(std::move(o));
  }
  expect("scf_log");
  in >> nlog;
  for (std::size_t i = 0; i < nlog; ++i) {
    ScfRecord r;
    in >> r.iteration >> r.energy >> r.delta_energy >> r.orbital_change >> r.damping;
    s.log.push_back(r);
  }
  expect("end");
  if (!in) throw FormatError("orbital file '" + path + "' is truncated");
  return s;
}

}  // namespace magdmc
