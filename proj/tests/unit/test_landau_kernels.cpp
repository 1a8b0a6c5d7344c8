#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "magdmc/hf.hpp"
#include "magdmc/kernel_table.hpp"
#include "magdmc/landau.hpp"
#include "magdmc/oracle.hpp"
#include "support.hpp"

using namespace magdmc;
using std::numbers::pi;

namespace {
const double kGammaHe = 2.0 * 212.7207;

double radial_norm(int m, double gamma) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double rho) { return 2 * pi * rho * std::norm(eval_transverse({m, gamma}, rho, 0.3)); };
  return gauss_kronrod<double, 61>::integrate(f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-14);
}
}  // namespace

TEST_CASE("Landau orbital values") {
  CHECK(std::abs(eval_transverse({0, 1.0}, 0.0, 0.0)) == doctest::Approx(std::sqrt(1.0 / (2 * pi))).epsilon(1e-14));
  for (double g : {0.5, 3.0, kGammaHe}) CHECK(std::abs(eval_transverse({1, g}, 0.0, 1.0)) == 0.0);
  // Phase exp(-i m phi).
  const auto v = eval_transverse({2, 1.5}, 0.7, 0.4);
  CHECK(std::arg(v) == doctest::Approx(-0.8).epsilon(1e-13));
  CHECK(landau_rho2_mean(3, 2.0) == 4.0);
}

TEST_CASE("Landau orbitals are normalized") {
  for (int m = 0; m <= 5; ++m) {
    CHECK(std::abs(radial_norm(m, kGammaHe) - 1.0) < 1e-10);
    CHECK(std::abs(radial_norm(m, 1.0) - 1.0) < 1e-10);
  }
  for (int m = 0; m <= 5; ++m)
    for (double rho : {0.0, 0.1, 0.5, 1.7})
      CHECK(std::norm(eval_transverse({m, 2.0}, rho, 0.0)) ==
            doctest::Approx(oracle::landau_density(m, 2.0, rho)).epsilon(1e-12));
}

TEST_CASE("nuclear kernel matches the closed form") {
  CHECK(nuclear_kernel(2.0, 0, 1.0, 0.0).value == doctest::Approx(-std::sqrt(pi)).epsilon(1e-12));
  for (double gamma : {1.0, 2.0, kGammaHe})
    for (double z : {0.0, 1e-4, 0.01, 0.3, 2.0, 9.0}) {
      const double ref = oracle::nuclear_kernel_m0(gamma, 3.0, z);
      CHECK(std::abs(nuclear_kernel(gamma, 0, 3.0, z).value / ref - 1.0) < 1e-8);
    }
}

TEST_CASE("nuclear kernel shape") {
  for (int m = 0; m <= 4; ++m) {
    const double far = 100.0 / std::sqrt(kGammaHe);
    CHECK(std::abs(nuclear_kernel(kGammaHe, m, 2.0, far).value * far / -2.0 - 1.0) < 1e-3);
    for (double z : {0.0, 0.01, 0.05, 0.2, 1.0}) {
      const double v = nuclear_kernel(kGammaHe, m, 2.0, z).value;
      CHECK(std::isfinite(v));
      CHECK(v < 0.0);
      CHECK(v == nuclear_kernel(kGammaHe, m, 2.0, -z).value);
      if (z > 0) CHECK(std::abs(v) <= 2.0 / z);
    }
  }
  // Derivative against central differences.
  const double h = 1e-5, z = 0.07;
  const double fd = (nuclear_kernel(kGammaHe, 2, 2.0, z + h).value - nuclear_kernel(kGammaHe, 2, 2.0, z - h).value) /
                    (2 * h);
  CHECK(nuclear_kernel(kGammaHe, 2, 2.0, z).derivative == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("direct kernel against the Simpson oracle") {
  for (double gamma : {1.0, kGammaHe})
    for (double zeta : {0.0, 0.02, 0.5, 3.0}) {
      const double ref = oracle::direct_kernel_00(gamma, zeta);
      CHECK(std::abs(direct_kernel(gamma, 0, 0, zeta).value / ref - 1.0) < 1e-6);
    }
}

TEST_CASE("pair kernel symmetries") {
  for (double zeta : {0.0, 0.03, 0.4, 2.0}) {
    const double d01 = direct_kernel(kGammaHe, 0, 1, zeta).value, d10 = direct_kernel(kGammaHe, 1, 0, zeta).value;
    CHECK(d01 > 0.0);
    CHECK(std::abs(d01 - d10) <= 1e-14 * d01);
    const double x13 = exchange_kernel(kGammaHe, 1, 3, zeta).value, x31 = exchange_kernel(kGammaHe, 3, 1, zeta).value;
    CHECK(std::abs(x13 - x31) <= 1e-14 * x13);
    CHECK(exchange_kernel(kGammaHe, 2, 2, zeta).value == doctest::Approx(direct_kernel(kGammaHe, 2, 2, zeta).value));
    CHECK(direct_kernel(kGammaHe, 0, 2, zeta).value == direct_kernel(kGammaHe, 0, 2, -zeta).value);
  }
  for (auto [m, mp] : {std::pair{0, 0}, {0, 1}, {1, 3}}) {
    const double far = 100.0 / std::sqrt(kGammaHe);
    CHECK(std::abs(direct_kernel(kGammaHe, m, mp, far).value * far - 1.0) < 1e-3);
  }
}

TEST_CASE("Monte Carlo oracle agrees with the kernels") {
  const double gamma = 2.0;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  const KernelTable t = KernelTable::build(gamma, 1.0, {0, 1}, KernelGridSpec{});
  int outliers = 0;
  for (int k = 0; k < 10; ++k) {
    const double zeta = u(rng);
    const auto mc = oracle::mc_integral_kernel(gamma, 0, 0, zeta, 200000, 100 + k);
    outliers += std::abs(mc.value - t.direct(0, 0, zeta)) > 3.0 * mc.error;
  }
  CHECK(outliers == 0);

  // Far enough that the finite-size correction <rho_12^2> / zeta^2 is below 1e-5.
  const double zfar = 1000.0;
  const auto far = oracle::mc_integral_kernel(gamma, 0, 0, zfar, 100000, 7);
  CHECK(std::abs(far.value * zfar - 1.0) < 3.0 * far.error * zfar + 1e-5);
  const auto a = oracle::mc_integral_kernel(gamma, 0, 1, 0.3, 200000, 8);
  const auto b = oracle::mc_integral_kernel(gamma, 1, 0, 0.3, 200000, 9);
  CHECK(std::abs(a.value - b.value) < 3.0 * std::hypot(a.error, b.error));
  const auto x = oracle::mc_exchange_kernel(gamma, 0, 1, 0.3, 200000, 10);
  CHECK(std::abs(x.value - t.exchange(0, 1, 0.3)) < 3.0 * x.error);
}

TEST_CASE("kernel table interpolation and refinement") {
  const RunConfig cfg = test::atom_config(2);
  const KernelTable t = KernelTable::build(cfg.field.gamma(), 2.0, {0, 1}, kernel_grid_for(cfg));
  CHECK(t.info().max_rel_error < kernel_grid_for(cfg).tolerance);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, t.z_extent());
  for (int k = 0; k < 20; ++k) {
    const double z = u(rng);
    CHECK(t.nuclear(1, z) == doctest::Approx(nuclear_kernel(t.gamma(), 1, 2.0, z).value).epsilon(1e-7));
    CHECK(t.direct(0, 1, z) == doctest::Approx(direct_kernel(t.gamma(), 0, 1, z).value).epsilon(1e-7));
    CHECK(t.exchange(0, 1, z) == doctest::Approx(exchange_kernel(t.gamma(), 0, 1, z).value).epsilon(1e-7));
  }
  CHECK_THROWS(KernelTable::build(cfg.field.gamma(), 2.0, {0, 1}, KernelGridSpec{10.0, 2.0, 1e-15, 0}));
}

TEST_CASE("kernel cache: hit, key mismatch, corruption") {
  const RunConfig cfg = test::atom_config(2);
  const std::string dir = test::scratch_dir("kcache");
  const KernelGridSpec grid = kernel_grid_for(cfg);
  bool hit = true;
  const KernelTable a = load_or_build_kernels(cfg.field.gamma(), 2.0, {0, 1}, grid, dir, &hit);
  CHECK_FALSE(hit);
  const KernelTable b = load_or_build_kernels(cfg.field.gamma(), 2.0, {0, 1}, grid, dir, &hit);
  CHECK(hit);
  CHECK(b.key() == a.key());
  CHECK(b.direct(0, 1, 0.123) == a.direct(0, 1, 0.123));

  // A different charge is a different key, never a silent reuse.
  load_or_build_kernels(cfg.field.gamma(), 3.0, {0, 1}, grid, dir, &hit);
  CHECK_FALSE(hit);

  // Flip bytes in every cache file: the loader must detect it and rebuild.
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::fstream f(e.path(), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(std::filesystem::file_size(e.path()) / 2);
    f.put('\x5a').put('\xa5').put('\x11');
  }
  const KernelTable c = load_or_build_kernels(cfg.field.gamma(), 2.0, {0, 1}, grid, dir, &hit);
  CHECK_FALSE(hit);
  CHECK(c.direct(0, 1, 0.123) == a.direct(0, 1, 0.123));
  load_or_build_kernels(cfg.field.gamma(), 2.0, {0, 1}, grid, dir, &hit);
  CHECK(hit);
}
