#pragma once

#include <filesystem>
#include <string>

#include "magdmc/config.hpp"
#include "magdmc/guiding.hpp"
#include "magdmc/hf.hpp"

namespace magdmc::test {

/// Z = 2 or 3 at B = 1e8 T with the shipped reference schedule.
RunConfig atom_config(int z);

/// Converged orbitals for atom_config(z), computed once per process.
const OrbitalSet& atom_orbitals(int z);
const GuidingFunction& atom_guiding(int z);

/// Fresh, empty directory under the system temp dir.
std::string scratch_dir(const std::string& name);

/// Reads a whole file; empty string if missing.
std::string slurp(const std::string& path);

}  // namespace magdmc::test
