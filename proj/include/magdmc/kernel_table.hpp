#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace magdmc {

/// Even function of z tabulated for z >= 0 on nodes z_j = scale * sinh(j * delta):
/// uniform spacing ~ scale*delta near the origin, geometric stretching outward.
/// Interpolation is piecewise cubic Hermite using exact node derivatives.
/// Beyond the last node the 1/|z| tail is continued from the last value.
class HermiteTable {
 public:
  HermiteTable() = default;
  HermiteTable(double scale, double delta, std::vector<double> values, std::vector<double> slopes);

  double operator()(double z) const;
  double extent() const;
  double node(std::size_t j) const;
  std::size_t size() const { return values_.size(); }
  double scale() const { return scale_; }
  double delta() const { return delta_; }
  const std::vector<double>& values() const { return values_; }
  /// d/dxi at the nodes, xi = asinh(z / scale).
  const std::vector<double>& slopes() const { return slopes_; }

 private:
  double scale_ = 1.0;
  double delta_ = 0.1;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

struct KernelGridSpec {
  double z_extent = 10.0;  // longitudinal half-width; pair kernels cover 2 * z_extent
  double delta = 0.05;
  double tolerance = 1e-7;  // relative interpolation error on held-out midpoints
  int max_refinements = 4;
};

class KernelRefinementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KernelTableInfo {
  double max_rel_error = 0.0;  // on held-out midpoints
  double delta_used = 0.0;
  int refinements = 0;
};

/// Tabulated effective 1D interactions for one field strength, charge and
/// set of occupied magnetic quantum numbers.
class KernelTable {
 public:
  using Pair = std::pair<int, int>;

  static KernelTable build(double gamma, double charge, std::vector<int> channels, const KernelGridSpec& grid);

  /// Field in Hartree atomic units.
  double gamma() const { return gamma_; }
  double charge() const { return charge_; }
  const std::vector<int>& channels() const { return channels_; }
  double z_extent() const { return z_extent_; }
  const KernelTableInfo& info() const { return info_; }
  std::uint64_t key() const { return key_; }

  double nuclear(int m, double z) const;
  double direct(int m, int mp, double zeta) const;
  double exchange(int m, int mp, double zeta) const;

  const HermiteTable& nuclear_table(int m) const;
  const HermiteTable& direct_table(int m, int mp) const;
  const HermiteTable& exchange_table(int m, int mp) const;

  /// Binary cache file; see docs/file-formats.md.
  void save(const std::string& path) const;
  static KernelTable load(const std::string& path);

  static std::uint64_t make_key(double gamma, double charge, std::vector<int> channels, const KernelGridSpec& grid);

 private:
  static Pair ordered(int a, int b) { return a < b ? Pair{a, b} : Pair{b, a}; }

  double gamma_ = 1.0;
  double charge_ = 1.0;
  double z_extent_ = 0.0;
  std::vector<int> channels_;
  std::map<int, HermiteTable> nuclear_;
  std::map<Pair, HermiteTable> direct_;
  std::map<Pair, HermiteTable> exchange_;  // only m < m'; m == m' uses direct
  KernelTableInfo info_;
  std::uint64_t key_ = 0;
};

/// Loads the table from `cache_dir` when a valid file for the same key
/// exists, otherwise builds and stores it. `cache_hit` reports which happened.
KernelTable load_or_build_kernels(double gamma, double charge, const std::vector<int>& channels,
                                  const KernelGridSpec& grid, const std::string& cache_dir, bool* cache_hit = nullptr);

}  // namespace magdmc
