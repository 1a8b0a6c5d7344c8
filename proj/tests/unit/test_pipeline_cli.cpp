#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "magdmc/binary_io.hpp"
#include "magdmc/pipeline.hpp"
#include "support.hpp"

using namespace magdmc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(const std::string& dir) {
  RunConfig cfg = test::atom_config(2);
  cfg.n_walkers = 30;
  cfg.schedule = {{StageKind::Vqmc, 3, 10, 1}, {StageKind::Fpdqmc, 4, 10, 1}, {StageKind::Rpdqmc, 4, 10, 1}};
  cfg.out.dir = dir;
  return cfg;
}

int cli(const std::string& args, std::string* output = nullptr, const std::string& tag = "cli") {
  const std::string log = test::scratch_dir(tag + "-log") + "/out.txt";
  const int status = std::system((std::string(MAGDMC_CLI) + ' ' + args + " > " + log + " 2>&1").c_str());
  if (output) *output = test::slurp(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string hf_args(const std::string& dir) { return "hf --z 2 --b_tesla 1e8 --out.dir " + dir; }

}  // namespace

TEST_CASE("pipeline artifacts carry the configuration hash") {
  const std::string dir = test::scratch_dir("artifacts");
  const RunConfig cfg = tiny(dir);
  PipelineOptions opt;
  opt.cache_dir = dir + "/cache";
  const PipelineResult res = run_pipeline(cfg, opt);
  REQUIRE(res.complete);
  const std::string hash = hex64(config_hash(cfg));
  REQUIRE(res.artifacts.size() >= 4);
  for (const auto& a : res.artifacts) CHECK(fs::exists(a));

  CHECK(test::slurp(cfg.out.resolve(cfg.out.trace)).find("config_hash=" + hash) != std::string::npos);
  CHECK(test::slurp(cfg.out.resolve(cfg.out.orbitals)).find("config_hash " + hex64(hf_hash(cfg))) != std::string::npos);
  const json summary = json::parse(test::slurp(cfg.out.resolve(cfg.out.summary)));
  CHECK(summary["config_hash"] == hash);
  CHECK(summary["complete"] == true);
  CHECK(summary["stages"].size() == 3);
  CHECK(summary["e_hf"]["kev"].get<double>() == doctest::Approx(res.e_hf.kev()));
  CHECK(summary["final"]["stage"] == "rpdqmc");
  CHECK(summary["stages"][1]["schedule"]["imaginary_time"].get<double>() == doctest::Approx(4 * 10 * 1e-4));

  const GuidingFunction psi = GuidingFunction::from_orbitals(read_orbital_file(cfg.out.resolve(cfg.out.orbitals)));
  const CheckpointState st = load_checkpoint(cfg.out.resolve(cfg.out.checkpoint), psi, config_hash(cfg));
  CHECK(st.population.size() > 0);
  CHECK_THROWS_AS(load_checkpoint(cfg.out.resolve(cfg.out.checkpoint), psi, config_hash(cfg) ^ 1), FormatError);

  // A second run reuses the orbital file and the kernel cache.
  const PipelineResult again = run_pipeline(cfg, opt);
  CHECK(again.e_hf.hartree == res.e_hf.hartree);
  CHECK(again.final_energy == res.final_energy);
}

TEST_CASE("stage selection continues from the checkpoint") {
  const std::string dir = test::scratch_dir("stages");
  const RunConfig cfg = tiny(dir);
  const OrbitalSet& orbs = test::atom_orbitals(2);
  PipelineOptions opt;
  opt.stages = StageSelection::VqmcOnly;
  const PipelineResult v = run_pipeline(cfg, orbs, opt);
  CHECK(v.stages[0].complete);
  CHECK(v.stages[1].blocks.empty());

  opt.stages = StageSelection::FpdqmcOnly;
  const PipelineResult f = run_pipeline(cfg, orbs, opt);
  CHECK(f.stages[0].blocks.size() == v.stages[0].blocks.size());
  CHECK(f.stages[0].energy == v.stages[0].energy);  // VQMC was not rerun
  CHECK(f.stages[1].complete);
  CHECK(f.stages[2].blocks.empty());
  CHECK(stage_selection_from_string("rpdqmc-only") == StageSelection::RpdqmcOnly);
  CHECK_THROWS(stage_selection_from_string("dmc"));
}

TEST_CASE("trace for the long schedule") {
  const RunConfig fe = load_config_file(std::string(MAGDMC_SOURCE_DIR) + "/configs/fe.cfg");
  std::vector<StageResult> stages;
  for (const auto& spec : fe.schedule) {
    StageResult r;
    r.spec = spec;
    for (int b = 0; b < spec.n_blocks; ++b) {
      BlockStats s;
      s.stage = spec.kind;
      s.block = b;
      s.equilibration = b < spec.equilibration_blocks;
      s.e_block = -4000.0 - b * 1e-3;
      r.blocks.push_back(s);
    }
    stages.push_back(r);
  }
  const std::string dir = test::scratch_dir("fetrace");
  write_trace(dir + "/trace.csv", config_hash(fe), -3990.0, stages);
  const Trace t = read_trace(dir + "/trace.csv", config_hash(fe));
  CHECK(t.rows.size() == 700);
  CHECK(t.rows[100].stage == "fpdqmc");
  CHECK(t.rows[160].equilibration == false);
  CHECK(t.rows[159].equilibration == true);
  CHECK_THROWS_AS(read_trace(dir + "/trace.csv", config_hash(fe) ^ 1), FormatError);
  CHECK(export_trace(t, {}, dir + "/plot") == 700);

  std::ifstream data(dir + "/plot.dat");
  std::string line;
  int rows = 0;
  while (std::getline(data, line)) rows += !line.empty() && line[0] != '#';
  CHECK(rows == 700);
}

TEST_CASE("reference lines stack from the top") {
  const std::string dir = test::scratch_dir("refs");
  std::ofstream(dir + "/refs.txt") << "# label keV\nDF -109.0\nMCPH3 -108.9\n";
  const auto refs = read_reference_lines(dir + "/refs.txt");
  REQUIRE(refs.size() == 2);
  Trace t;
  t.has_hf = true;
  t.e_hf = kev_to_hartree(-108.1);
  t.rows.push_back(TraceRow{"vqmc", 0, true, -4000.0});
  export_trace(t, refs, dir + "/plot");
  std::istringstream all(test::slurp(dir + "/plot_refs.dat"));
  std::vector<std::string> labels;
  std::string label;
  double v;
  std::string header;
  std::getline(all, header);
  while (all >> label >> v) labels.push_back(label);
  CHECK(labels == std::vector<std::string>{"HFFEM", "MCPH3", "DF"});
}

TEST_CASE("empty trace exports empty files") {
  const std::string dir = test::scratch_dir("empty");
  std::ofstream(dir + "/trace.csv").close();
  const Trace t = read_trace(dir + "/trace.csv");
  CHECK(t.rows.empty());
  CHECK(export_trace(t, {}, dir + "/plot") == 0);
  CHECK(fs::file_size(dir + "/plot.dat") == 0);
  CHECK(fs::file_size(dir + "/plot_refs.dat") == 0);
  CHECK(cli("trace-export " + dir + "/trace.csv --out " + dir + "/cli") == 0);
  CHECK(fs::file_size(dir + "/cli.dat") == 0);
}

TEST_CASE("command line exit codes") {
  std::string out;
  CHECK(cli("print-config --z 2 --b_tesla 1e8", &out) == 0);
  CHECK(config_hash(validate_config(out)) == config_hash(validate_config("z = 2\nb_tesla = 1e8\n")));
  CHECK(cli("print-config --z 2 --b_tesla 1e8 --dtau 0", &out) == 2);
  CHECK(out.find("dtau") != std::string::npos);
  CHECK(cli("print-config /nonexistent/he.cfg") == 2);
  CHECK(cli("print-config " + std::string(MAGDMC_SOURCE_DIR) + "/configs/he.cfg --seed 5", &out) == 0);
  CHECK(validate_config(out).seed == 5);
  CHECK(cli("frobnicate") == 2);
  const std::string dir = test::scratch_dir("scf-fail");
  CHECK(cli("hf --z 3 --b_tesla 1e8 --hf.max_iterations 2 --out.dir " + dir, &out) == 3);
  CHECK(out.find("energy history") != std::string::npos);
  CHECK(cli("trace-export /nonexistent.csv") == 1);
}

TEST_CASE("hf command: cache reuse and identical output") {
  const std::string dir = test::scratch_dir("hfcli");
  std::string first, second;
  REQUIRE(cli("hf --z 2 --b_tesla 1e8 --out.dir " + dir, &first) == 0);
  const std::string orbitals = test::slurp(dir + "/orbitals.txt");
  REQUIRE(cli(hf_args(dir), &second) == 0);
  CHECK(first.find("kernel cache miss") != std::string::npos);
  CHECK(second.find("kernel cache hit") != std::string::npos);
  CHECK(test::slurp(dir + "/orbitals.txt") == orbitals);
  CHECK(first.find("-0.5753") != std::string::npos);

  // Corrupt the cached tables: detected and rebuilt.
  for (const auto& e : fs::directory_iterator(dir + "/cache")) std::ofstream(e.path(), std::ios::binary) << "junk";
  REQUIRE(cli(hf_args(dir), &second) == 0);
  CHECK(second.find("kernel cache miss") != std::string::npos);
  CHECK(test::slurp(dir + "/orbitals.txt") == orbitals);
}

TEST_CASE("run command writes a manifest and resumes") {
  const std::string dir = test::scratch_dir("runcli");
  const std::string base = "run --z 2 --b_tesla 1e8 --n_walkers 20 --schedule 'vqmc:3:5:1 fpdqmc:4:5:1' --quiet "
                           "--qmc.checkpoint_interval 1 --out.dir " + dir;
  std::string out;
  REQUIRE(cli(base + " --stop-after-blocks 5", &out) == 0);
  CHECK(out.find("--resume") != std::string::npos);
  REQUIRE(cli(base + " --resume", &out) == 0);
  const json m = json::parse(test::slurp(dir + "/manifest.json"));
  CHECK(m["resumed"] == true);
  CHECK(m["complete"] == true);
  for (const auto& a : m["outputs"]) CHECK(fs::exists(a.get<std::string>()));
  const std::string resumed = test::slurp(dir + "/summary.json");

  const std::string dir2 = test::scratch_dir("runcli2");
  REQUIRE(cli("run --z 2 --b_tesla 1e8 --n_walkers 20 --schedule 'vqmc:3:5:1 fpdqmc:4:5:1' --quiet "
              "--qmc.checkpoint_interval 1 --out.dir " + dir2) == 0);
  const std::string straight = test::slurp(dir2 + "/summary.json");
  CHECK(resumed == straight);
}
