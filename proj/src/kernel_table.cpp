#include "magdmc/kernel_table.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>

#include "magdmc/binary_io.hpp"
#include "magdmc/landau.hpp"
#include "magdmc/parallel.hpp"

namespace magdmc {

namespace {

constexpr char kMagic[8] = {'M', 'G', 'D', 'K', 'T', 'B', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

using KernelFn = std::function<KernelValue(double)>;

HermiteTable tabulate(const KernelFn& f, double scale, double delta, double extent) {
  const double xi_max = std::asinh(extent / scale);
  const auto n = static_cast<std::size_t>(std::ceil(xi_max / delta)) + 2;
  std::vector<double> v(n), s(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double xi = j * delta;
    const KernelValue kv = f(scale * std::sinh(xi));
    v[j] = kv.value;
    s[j] = kv.derivative * scale * std::cosh(xi);
  }
  return HermiteTable(scale, delta, std::move(v), std::move(s));
}

double midpoint_error(const HermiteTable& t, const KernelFn& f) {
  double worst = 0.0;
  for (std::size_t j = 0; j + 1 < t.size(); ++j) {
    const double z = t.scale() * std::sinh((j + 0.5) * t.delta());
    const double exact = f(z).value;
    worst = std::max(worst, std::abs(t(z) - exact) / std::abs(exact));
  }
  return worst;
}

}  // namespace

HermiteTable::HermiteTable(double scale, double delta, std::vector<double> values, std::vector<double> slopes)
    : scale_(scale), delta_(delta), values_(std::move(values)), slopes_(std::move(slopes)) {}

double HermiteTable::node(std::size_t j) const { return scale_ * std::sinh(j * delta_); }
double HermiteTable::extent() const { return node(values_.size() - 1); }

double HermiteTable::operator()(double z) const {
  const double az = std::abs(z);
  const double xi = std::asinh(az / scale_);
  const double pos = xi / delta_;
  const auto last = values_.size() - 1;
  if (pos >= static_cast<double>(last)) return values_[last] * extent() / az;
  const auto j = static_cast<std::size_t>(pos);
  const double t = pos - j;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * values_[j] + h10 * delta_ * slopes_[j] + h01 * values_[j + 1] + h11 * delta_ * slopes_[j + 1];
}

std::uint64_t KernelTable::make_key(double gamma, double charge, std::vector<int> channels, const KernelGridSpec& g) {
  std::sort(channels.begin(), channels.end());
  channels.erase(std::unique(channels.begin(), channels.end()), channels.end());
  std::uint64_t h = fnv1a(&kVersion, sizeof kVersion);
  for (double d : {gamma, charge, g.z_extent, g.delta, g.tolerance}) h = fnv1a(&d, sizeof d, h);
  h = fnv1a(&g.max_refinements, sizeof g.max_refinements, h);
  for (int m : channels) h = fnv1a(&m, sizeof m, h);
  return h;
}

KernelTable KernelTable::build(double gamma, double charge, std::vector<int> channels, const KernelGridSpec& grid) {
  std::sort(channels.begin(), channels.end());
  channels.erase(std::unique(channels.begin(), channels.end()), channels.end());

  KernelTable kt;
  kt.gamma_ = gamma;
  kt.charge_ = charge;
  kt.z_extent_ = grid.z_extent;
  kt.channels_ = channels;
  kt.key_ = make_key(gamma, charge, channels, grid);

  struct Job {
    int kind;  // 0 nuclear, 1 direct, 2 exchange
    int m, mp;
    KernelFn f;
    double extent;
    HermiteTable table;
    double err = 0.0;
  };
  std::vector<Job> jobs;
  for (int m : channels)
    jobs.push_back({0, m, m, [=](double z) { return nuclear_kernel(gamma, m, charge, z); }, grid.z_extent, {}});
  for (std::size_t a = 0; a < channels.size(); ++a)
    for (std::size_t b = a; b < channels.size(); ++b) {
      const int m = channels[a], mp = channels[b];
      jobs.push_back({1, m, mp, [=](double z) { return direct_kernel(gamma, m, mp, z); }, 2 * grid.z_extent, {}});
      if (m != mp)
        jobs.push_back(
            {2, m, mp, [=](double z) { return exchange_kernel(gamma, m, mp, z); }, 2 * grid.z_extent, {}});
    }

  const double scale = 1.0 / std::sqrt(gamma);
  double delta = grid.delta;
  int refinements = 0;
  double worst = 0.0;
  for (;; ++refinements) {
    parallel_for(jobs.size(), [&](std::size_t i) {
      jobs[i].table = tabulate(jobs[i].f, scale, delta, jobs[i].extent);
      jobs[i].err = midpoint_error(jobs[i].table, jobs[i].f);
    });
    worst = 0.0;
    for (const auto& j : jobs) worst = std::max(worst, j.err);
    if (worst < grid.tolerance) break;
    if (refinements >= grid.max_refinements) {
      std::ostringstream msg;
      msg << "kernel table: interpolation error " << worst << " exceeds " << grid.tolerance << " after "
          << refinements << " refinements (delta " << delta << ")";
      throw KernelRefinementError(msg.str());
    }
    delta /= 2.0;
  }
  kt.info_ = {worst, delta, refinements};
  for (auto& j : jobs) {
    if (j.kind == 0) kt.nuclear_[j.m] = std::move(j.table);
    else if (j.kind == 1) kt.direct_[{j.m, j.mp}] = std::move(j.table);
    else kt.exchange_[{j.m, j.mp}] = std::move(j.table);
  }
  return kt;
}

const HermiteTable& KernelTable::nuclear_table(int m) const {
  auto it = nuclear_.find(m);
  if (it == nuclear_.end()) throw std::out_of_range("kernel table has no channel m=" + std::to_string(m));
  return it->second;
}

const HermiteTable& KernelTable::direct_table(int m, int mp) const {
  auto it = direct_.find(ordered(m, mp));
  if (it == direct_.end())
    throw std::out_of_range("kernel table has no direct pair (" + std::to_string(m) + "," + std::to_string(mp) + ")");
  return it->second;
}

const HermiteTable& KernelTable::exchange_table(int m, int mp) const {
  if (m == mp) return direct_table(m, m);
  auto it = exchange_.find(ordered(m, mp));
  if (it == exchange_.end())
    throw std::out_of_range("kernel table has no exchange pair (" + std::to_string(m) + "," + std::to_string(mp) +
                            ")");
  return it->second;
}

double KernelTable::nuclear(int m, double z) const { return nuclear_table(m)(z); }
double KernelTable::direct(int m, int mp, double zeta) const { return direct_table(m, mp)(zeta); }
double KernelTable::exchange(int m, int mp, double zeta) const { return exchange_table(m, mp)(zeta); }

void KernelTable::save(const std::string& path) const {
  BinaryWriter w;
  w.put_bytes(kMagic, sizeof kMagic);
  w.put(kVersion);
  w.put(key_);
  w.put(gamma_);
  w.put(charge_);
  w.put(z_extent_);
  w.put(info_.max_rel_error);
  w.put(info_.delta_used);
  w.put<std::int32_t>(info_.refinements);
  w.put<std::uint32_t>(channels_.size());
  for (int m : channels_) w.put<std::int32_t>(m);
  auto put_table = [&](std::uint8_t kind, int m, int mp, const HermiteTable& t) {
    w.put(kind);
    w.put<std::int32_t>(m);
    w.put<std::int32_t>(mp);
    w.put(t.scale());
    w.put(t.delta());
    w.put_doubles(t.values());
    w.put_doubles(t.slopes());
  };
  w.put<std::uint32_t>(nuclear_.size() + direct_.size() + exchange_.size());
  for (const auto& [m, t] : nuclear_) put_table(0, m, m, t);
  for (const auto& [p, t] : direct_) put_table(1, p.first, p.second, t);
  for (const auto& [p, t] : exchange_) put_table(2, p.first, p.second, t);
  w.write_file(path);
}

KernelTable KernelTable::load(const std::string& path) {
  BinaryReader r = BinaryReader::from_file(path);
  char magic[8];
  r.get_bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("'" + path + "' is not a kernel table");
  if (r.get<std::uint32_t>() != kVersion) throw FormatError("unsupported kernel table version in '" + path + "'");
  KernelTable kt;
  kt.key_ = r.get<std::uint64_t>();
  kt.gamma_ = r.get<double>();
  kt.charge_ = r.get<double>();
  kt.z_extent_ = r.get<double>();
  kt.info_.max_rel_error = r.get<double>();
  kt.info_.delta_used = r.get<double>();
  kt.info_.refinements = r.get<std::int32_t>();
  const auto nch = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nch; ++i) kt.channels_.push_back(r.get<std::int32_t>());
  const auto ntab = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < ntab; ++i) {
    const auto kind = r.get<std::uint8_t>();
    const int m = r.get<std::int32_t>(), mp = r.get<std::int32_t>();
    const double scale = r.get<double>(), delta = r.get<double>();
    auto values = r.get_doubles();
    auto slopes = r.get_doubles();
    if (values.size() != slopes.size() || values.size() < 2) throw FormatError("malformed table in '" + path + "'");
    HermiteTable t(scale, delta, std::move(values), std::move(slopes));
    if (kind == 0) kt.nuclear_[m] = std::move(t);
    else if (kind == 1) kt.direct_[{m, mp}] = std::move(t);
    else if (kind == 2) kt.exchange_[{m, mp}] = std::move(t);
    else throw FormatError("unknown table kind in '" + path + "'");
  }
  if (!r.at_end()) throw FormatError("trailing bytes in '" + path + "'");
  return kt;
}

KernelTable load_or_build_kernels(double gamma, double charge, const std::vector<int>& channels,
                                  const KernelGridSpec& grid, const std::string& cache_dir, bool* cache_hit) {
  const std::uint64_t key = KernelTable::make_key(gamma, charge, channels, grid);
  const std::string path = (std::filesystem::path(cache_dir) / ("kernels-" + hex64(key) + ".bin")).string();
  if (cache_hit) *cache_hit = false;
  if (!cache_dir.empty() && std::filesystem::exists(path)) {
    try {
      KernelTable kt = KernelTable::load(path);
      if (kt.key() == key) {
        if (cache_hit) *cache_hit = true;
        return kt;
      }
    } catch (const FormatError&) {
      // corrupted or stale: rebuild below
    }
  }
  KernelTable kt = KernelTable::build(gamma, charge, channels, grid);
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    kt.save(path);
  }
  return kt;
}

}  // namespace magdmc
