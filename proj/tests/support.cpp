#include "support.hpp"

#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <unistd.h>

#include "magdmc/pipeline.hpp"

namespace magdmc::test {

RunConfig atom_config(int z) {
  std::ostringstream s;
  s << "z = " << z << "\nb_tesla = 1e8\nspin_zeeman = true\nn_walkers = 500\ndtau = 1e-4\n"
    << "schedule = vqmc:100:200:20 fpdqmc:300:200:60 rpdqmc:300:200:60\nseed = 1\n";
  return validate_config(s.str());
}

namespace {
std::mutex g_mutex;
std::map<int, std::unique_ptr<OrbitalSet>> g_orbitals;
std::map<int, std::unique_ptr<GuidingFunction>> g_guiding;
}  // namespace

const OrbitalSet& atom_orbitals(int z) {
  std::lock_guard lock(g_mutex);
  auto& slot = g_orbitals[z];
  if (!slot) {
    const RunConfig cfg = atom_config(z);
    auto kernels = obtain_kernels(cfg, "");
    slot = std::make_unique<OrbitalSet>(scf(cfg, kernels));
  }
  return *slot;
}

const GuidingFunction& atom_guiding(int z) {
  const OrbitalSet& set = atom_orbitals(z);
  std::lock_guard lock(g_mutex);
  auto& slot = g_guiding[z];
  if (!slot) slot = std::make_unique<GuidingFunction>(GuidingFunction::from_orbitals(set));
  return *slot;
}

std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("magdmc-" + name + "-" + std::to_string(static_cast<long>(::getpid())));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace magdmc::test
