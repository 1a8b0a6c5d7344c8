#include "magdmc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "magdmc/binary_io.hpp"
#include "magdmc/parallel.hpp"

namespace magdmc {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void ensure_parent(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  if (!p.empty()) fs::create_directories(p);
}

constexpr char kCheckpointMagic[8] = {'M', 'G', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr const char* kTraceMagic = "# magdmc-trace";
constexpr int kTraceVersion = 1;

}  // namespace

// ----------------------------------------------------------- orbitals

std::string default_cache_dir(const RunConfig& config) {
  if (const char* env = std::getenv("MAGDMC_CACHE_DIR"); env && *env) return env;
  return config.out.resolve("cache");
}

std::shared_ptr<const KernelTable> obtain_kernels(const RunConfig& config, const std::string& cache_dir,
                                                  bool* cache_hit) {
  return std::make_shared<const KernelTable>(load_or_build_kernels(config.field.gamma(), config.z,
                                                                   occupied_channels(config.occupations),
                                                                   kernel_grid_for(config), cache_dir, cache_hit));
}

OrbitalSource obtain_orbitals(const RunConfig& config, const std::string& cache_dir, bool reuse_file,
                              bool write_file) {
  OrbitalSource src;
  const std::string path = config.out.resolve(config.out.orbitals);
  const std::uint64_t hash = hf_hash(config);
  if (reuse_file && fs::exists(path)) {
    try {
      src.orbitals = read_orbital_file(path, hash);
      src.loaded_from_file = true;
      return src;
    } catch (const FormatError&) {
      // stale or damaged: recompute
    }
  }
  auto t0 = Clock::now();
  src.kernels = obtain_kernels(config, cache_dir, &src.kernel_cache_hit);
  src.kernel_seconds = seconds_since(t0);
  t0 = Clock::now();
  src.orbitals = scf(config, src.kernels);
  src.scf_seconds = seconds_since(t0);
  if (write_file) {
    ensure_parent(path);
    write_orbital_file(path, src.orbitals);
  }
  return src;
}

StageSelection stage_selection_from_string(const std::string& s) {
  if (s == "all") return StageSelection::All;
  if (s == "vqmc-only") return StageSelection::VqmcOnly;
  if (s == "fpdqmc-only") return StageSelection::FpdqmcOnly;
  if (s == "rpdqmc-only") return StageSelection::RpdqmcOnly;
  throw std::invalid_argument("unknown stage selection '" + s + "' (all, vqmc-only, fpdqmc-only, rpdqmc-only)");
}

// --------------------------------------------------------- checkpoint

void save_checkpoint(const std::string& path, const CheckpointState& st) {
  BinaryWriter w;
  w.put_bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(st.config_hash);
  w.put<double>(st.e_hf);
  w.put<std::uint64_t>(st.stage);

  w.put<std::uint64_t>(st.stages.size());
  for (const auto& r : st.stages) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(r.spec.kind));
    w.put<std::int32_t>(r.spec.n_blocks);
    w.put<std::int32_t>(r.spec.steps_per_block);
    w.put<std::int32_t>(r.spec.equilibration_blocks);
    w.put<double>(r.dtau);
    w.put<std::uint8_t>(r.complete ? 1 : 0);
    w.put<std::uint8_t>(r.signal_lost ? 1 : 0);
    w.put<std::int32_t>(r.signal_lost_block);
    w.put<std::uint64_t>(r.blocks.size());
    for (const auto& b : r.blocks) {
      w.put<std::uint8_t>(static_cast<std::uint8_t>(b.stage));
      w.put<std::int32_t>(b.block);
      w.put<std::uint8_t>(b.equilibration ? 1 : 0);
      for (double v : {b.e_block, b.e_fixed_phase, b.e_average, b.sigma, b.acceptance, b.population, b.e_t,
                       b.im_energy, b.rp_signal})
        w.put<double>(v);
      w.put<std::int64_t>(b.clamp_events);
    }
  }

  const auto& c = st.control;
  w.put<double>(c.e_t);
  w.put<double>(c.target);
  w.put<double>(c.gain);
  w.put<double>(c.block_time);
  w.put<std::uint64_t>(c.history);
  w.put_doubles(std::vector<double>(c.recent.begin(), c.recent.end()));

  w.put<std::uint64_t>(st.ctx.seed);
  w.put<std::uint64_t>(st.ctx.step);
  w.put<std::uint64_t>(st.ctx.births);
  w.put<double>(st.ctx.target);

  w.put<std::uint64_t>(st.population.size());
  for (const auto& wk : st.population) {
    w.put_doubles(wk.R.coords());
    w.put<double>(wk.weight);
    w.put<double>(wk.phase);
    w.put<std::int32_t>(wk.age);
    std::ostringstream rs;
    rs << wk.rng;
    w.put_string(rs.str());
  }
  ensure_parent(path);
  w.write_file(path);  // temp file + rename: never a truncated checkpoint
}

CheckpointState load_checkpoint(const std::string& path, const GuidingFunction& psi, std::uint64_t expected_hash) {
  BinaryReader r = BinaryReader::from_file(path);
  char magic[8];
  r.get_bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + 8, kCheckpointMagic)) throw FormatError("'" + path + "' is not a checkpoint");
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw FormatError("checkpoint '" + path + "': unsupported version");
  CheckpointState st;
  st.config_hash = r.get<std::uint64_t>();
  if (expected_hash != 0 && st.config_hash != expected_hash)
    throw FormatError("checkpoint '" + path + "' belongs to a different configuration (hash " +
                      hex64(st.config_hash) + ", expected " + hex64(expected_hash) + ")");
  st.e_hf = r.get<double>();
  st.stage = r.get<std::uint64_t>();

  st.stages.resize(r.get<std::uint64_t>());
  for (auto& s : st.stages) {
    s.spec.kind = static_cast<StageKind>(r.get<std::uint8_t>());
    s.spec.n_blocks = r.get<std::int32_t>();
    s.spec.steps_per_block = r.get<std::int32_t>();
    s.spec.equilibration_blocks = r.get<std::int32_t>();
    s.dtau = r.get<double>();
    s.complete = r.get<std::uint8_t>() != 0;
    s.signal_lost = r.get<std::uint8_t>() != 0;
    s.signal_lost_block = r.get<std::int32_t>();
    s.blocks.resize(r.get<std::uint64_t>());
    for (auto& b : s.blocks) {
      b.stage = static_cast<StageKind>(r.get<std::uint8_t>());
      b.block = r.get<std::int32_t>();
      b.equilibration = r.get<std::uint8_t>() != 0;
      for (double* v : {&b.e_block, &b.e_fixed_phase, &b.e_average, &b.sigma, &b.acceptance, &b.population, &b.e_t,
                        &b.im_energy, &b.rp_signal})
        *v = r.get<double>();
      b.clamp_events = r.get<std::int64_t>();
    }
    finalize_stage(s);
  }

  auto& c = st.control;
  c.e_t = r.get<double>();
  c.target = r.get<double>();
  c.gain = r.get<double>();
  c.block_time = r.get<double>();
  c.history = r.get<std::uint64_t>();
  const auto recent = r.get_doubles();
  c.recent.assign(recent.begin(), recent.end());

  st.ctx.seed = r.get<std::uint64_t>();
  st.ctx.step = r.get<std::uint64_t>();
  st.ctx.births = r.get<std::uint64_t>();
  st.ctx.target = r.get<double>();

  st.population.resize(r.get<std::uint64_t>());
  for (auto& wk : st.population) {
    wk.R.coords() = r.get_doubles();
    wk.weight = r.get<double>();
    wk.phase = r.get<double>();
    wk.age = r.get<std::int32_t>();
    std::istringstream rs(r.get_string());
    rs >> wk.rng;
    if (!rs) throw FormatError("checkpoint '" + path + "': bad random-number state");
  }
  if (!r.at_end()) throw FormatError("checkpoint '" + path + "': trailing bytes");
  parallel_for(st.population.size(), [&](std::size_t k) {
    auto& wk = st.population[k];
    if (!psi.evaluate(wk.R, wk.eval)) throw FormatError("checkpoint '" + path + "': walker on a node");
  });
  return st;
}

// -------------------------------------------------------------- trace

void write_trace(const std::string& path, std::uint64_t config_hash, double e_hf,
                 const std::vector<StageResult>& stages) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write trace '" + path + "'");
  out << std::setprecision(17);
  out << kTraceMagic << ' ' << kTraceVersion << " config_hash=" << hex64(config_hash) << " e_hf_hartree=" << e_hf
      << '\n';
  out << "stage,block,equilibration,e_block_hartree,e_block_kev,e_average_hartree,e_average_kev,sigma_hartree,"
         "sigma_kev,acceptance,population,e_t_hartree,e_t_kev,rp_signal,e_fixed_phase_hartree,clamp_events\n";
  for (const auto& s : stages)
    for (const auto& b : s.blocks) {
      out << to_string(b.stage) << ',' << b.block << ',' << (b.equilibration ? 1 : 0) << ',' << b.e_block << ','
          << hartree_to_kev(b.e_block) << ',' << b.e_average << ',' << hartree_to_kev(b.e_average) << ','
          << b.sigma << ',' << hartree_to_kev(b.sigma) << ',' << b.acceptance << ',' << b.population << ','
          << b.e_t << ',' << hartree_to_kev(b.e_t) << ',' << b.rp_signal << ',' << b.e_fixed_phase << ','
          << b.clamp_events << '\n';
    }
  if (!out) throw FormatError("write failed for trace '" + path + "'");
}

namespace {

double parse_number(const std::string& s) {
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) f.push_back(cur);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

}  // namespace

Trace read_trace(const std::string& path, std::uint64_t expected_hash) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read trace '" + path + "'");
  Trace t;
  std::string line;
  if (!std::getline(in, line)) return t;  // empty file: empty trace
  {
    std::istringstream h(line);
    std::string hash_mark, magic, kv;
    int version = 0;
    h >> hash_mark >> magic >> version;
    if (hash_mark + " " + magic != kTraceMagic) throw FormatError("'" + path + "' is not a magdmc trace");
    if (version != kTraceVersion) throw FormatError("trace '" + path + "': unsupported version");
    while (h >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "config_hash") t.config_hash = std::stoull(val, nullptr, 16);
      if (key == "e_hf_hartree") {
        t.e_hf = parse_number(val);
        t.has_hf = std::isfinite(t.e_hf);
      }
    }
  }
  if (expected_hash != 0 && t.config_hash != expected_hash)
    throw FormatError("trace '" + path + "' belongs to a different configuration (hash " + hex64(t.config_hash) +
                      ", expected " + hex64(expected_hash) + ")");
  if (!std::getline(in, line)) return t;  // header only
  const auto cols = split_csv(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw FormatError("trace '" + path + "': missing column " + name);
    return static_cast<std::size_t>(it - cols.begin());
  };
  const std::size_t c_stage = col("stage"), c_block = col("block"), c_eq = col("equilibration"),
                    c_e = col("e_block_hartree"), c_avg = col("e_average_hartree"), c_sig = col("sigma_hartree"),
                    c_acc = col("acceptance"), c_pop = col("population"), c_et = col("e_t_hartree"),
                    c_sg = col("rp_signal");
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != cols.size())
      throw FormatError("trace '" + path + "' line " + std::to_string(lineno) + ": wrong number of fields");
    try {
      TraceRow r;
      r.stage = f[c_stage];
      r.block = std::stoi(f[c_block]);
      r.equilibration = f[c_eq] == "1";
      r.e_block = parse_number(f[c_e]);
      r.e_average = parse_number(f[c_avg]);
      r.sigma = parse_number(f[c_sig]);
      r.acceptance = parse_number(f[c_acc]);
      r.population = parse_number(f[c_pop]);
      r.e_t = parse_number(f[c_et]);
      r.rp_signal = parse_number(f[c_sg]);
      t.rows.push_back(r);
    } catch (const std::invalid_argument&) {
      throw FormatError("trace '" + path + "' line " + std::to_string(lineno) + ": bad number");
    }
  }
  return t;
}

std::vector<ReferenceLine> read_reference_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read reference file '" + path + "'");
  std::vector<ReferenceLine> refs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    ReferenceLine r;
    if (!(ls >> r.label)) continue;
    if (!(ls >> r.kev))
      throw FormatError("reference file '" + path + "' line " + std::to_string(lineno) + ": expected 'label keV'");
    refs.push_back(r);
  }
  return refs;
}

std::size_t export_trace(const Trace& trace, const std::vector<ReferenceLine>& refs, const std::string& prefix) {
  ensure_parent(prefix);
  std::ofstream data(prefix + ".dat");
  std::ofstream lines(prefix + "_refs.dat");
  if (!data || !lines) throw FormatError("cannot write export files with prefix '" + prefix + "'");
  data << std::setprecision(12);
  lines << std::setprecision(12);
  if (!trace.rows.empty()) {
    data << "# block stage e_block_kev e_average_kev e_t_kev\n";
    int k = 0;
    for (const auto& r : trace.rows) {
      auto v = [](double x) { return std::isfinite(x) ? hartree_to_kev(x) : std::nan(""); };
      data << k++ << ' ' << r.stage << ' ' << v(r.e_block) << ' ' << v(r.e_average) << ' ' << v(r.e_t) << '\n';
    }
  }
  std::vector<ReferenceLine> all;
  if (trace.has_hf) all.push_back({"HFFEM", hartree_to_kev(trace.e_hf)});
  all.insert(all.end(), refs.begin(), refs.end());
  // Top line first, as the lines stack in a plot.
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.kev > b.kev; });
  if (!trace.rows.empty() || !refs.empty()) {
    lines << "# label e_kev\n";
    for (const auto& r : all) lines << r.label << ' ' << r.kev << '\n';
  }
  return trace.rows.size();
}

// ----------------------------------------------------------- pipeline

namespace {

bool selected(StageSelection sel, StageKind kind) {
  switch (sel) {
    case StageSelection::All: return true;
    case StageSelection::VqmcOnly: return kind == StageKind::Vqmc;
    case StageSelection::FpdqmcOnly: return kind == StageKind::Fpdqmc;
    case StageSelection::RpdqmcOnly: return kind == StageKind::Rpdqmc;
  }
  return false;
}

double mean_local_energy(const Population& pop) {
  double s = 0.0;
  for (const auto& w : pop) s += w.eval.e_local.real();
  return s / static_cast<double>(pop.size());
}

std::string suggest_dtau(double acceptance, double dtau) {
  std::ostringstream o;
  o << std::setprecision(3) << "acceptance " << acceptance << " is "
    << (acceptance > 0.99 ? "above 99 %: try a larger" : "below 1 %: try a smaller") << " qmc.vqmc_dtau (e.g. "
    << (acceptance > 0.99 ? dtau * 4.0 : dtau / 4.0) << ")";
  return o.str();
}

void write_outputs(const RunConfig& cfg, PipelineResult& res) {
  const std::string trace = cfg.out.resolve(cfg.out.trace);
  write_trace(trace, config_hash(cfg), res.e_hf.hartree, res.stages);
  const std::string summary = cfg.out.resolve(cfg.out.summary);
  ensure_parent(summary);
  std::ofstream(summary) << summary_json(cfg, res) << '\n';
  for (const auto& p : {trace, summary})
    if (std::find(res.artifacts.begin(), res.artifacts.end(), p) == res.artifacts.end()) res.artifacts.push_back(p);
}

void set_final(PipelineResult& res) {
  res.final_stage = -1;
  for (std::size_t s = 0; s < res.stages.size(); ++s)
    if (res.stages[s].used_blocks > 0) res.final_stage = static_cast<int>(s);
  if (res.final_stage >= 0) {
    const auto& r = res.stages[res.final_stage];
    res.final_energy = r.energy;
    res.final_sigma = r.sigma;
    res.final_error = r.error;
  }
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg, const PipelineOptions& opt) {
  const std::string cache = opt.cache_dir.empty() ? default_cache_dir(cfg) : opt.cache_dir;
  OrbitalSource src = obtain_orbitals(cfg, cache, true, opt.write_outputs);
  if (opt.log) {
    *opt.log << (src.loaded_from_file ? "orbitals: loaded " : "orbitals: computed ")
             << cfg.out.resolve(cfg.out.orbitals);
    if (!src.loaded_from_file) *opt.log << (src.kernel_cache_hit ? " (kernel cache hit)" : " (kernels built)");
    *opt.log << '\n';
  }
  PipelineResult res = run_pipeline(cfg, src.orbitals, opt);
  if (!src.loaded_from_file) {
    res.timings["kernels"] = src.kernel_seconds;
    res.timings["hf"] = src.scf_seconds;
  }
  if (opt.write_outputs) res.artifacts.insert(res.artifacts.begin(), cfg.out.resolve(cfg.out.orbitals));
  return res;
}

PipelineResult run_pipeline(const RunConfig& cfg, const OrbitalSet& orbitals, const PipelineOptions& opt) {
  PipelineResult res;
  res.e_hf = orbitals.e_hf;
  const std::uint64_t hash = config_hash(cfg);
  const std::string ckpt = cfg.out.resolve(cfg.out.checkpoint);
  const GuidingFunction psi = GuidingFunction::from_orbitals(orbitals);

  const StepLaw vqmc_law{cfg.vqmc_dtau(), true, cfg.qmc.vqmc_moves};
  const StepLaw dqmc_law{cfg.dtau, cfg.qmc.accept_reject, MoveMode::AllElectron};

  CheckpointState st;
  const bool want_checkpoint = opt.resume || opt.stages != StageSelection::All;
  if (want_checkpoint && fs::exists(ckpt)) {
    st = load_checkpoint(ckpt, psi, hash);
    res.resumed = true;
    if (st.stages.size() != cfg.schedule.size()) throw FormatError("checkpoint schedule does not match configuration");
  } else {
    if (want_checkpoint) res.warnings.push_back("no checkpoint at '" + ckpt + "': starting from fresh walkers");
    st.config_hash = hash;
    st.e_hf = orbitals.e_hf.hartree;
    st.stages.resize(cfg.schedule.size());
    for (std::size_t s = 0; s < cfg.schedule.size(); ++s) st.stages[s].spec = cfg.schedule[s];
    const auto t0 = Clock::now();
    st.population = init_walkers(psi, cfg.n_walkers, cfg.seed, vqmc_law, cfg.qmc.pre_equilibration_steps);
    res.timings["init_walkers"] = seconds_since(t0);
    st.control.target = cfg.n_walkers;
    st.control.gain = cfg.qmc.population_gain;
    st.ctx = BranchContext{cfg.seed, 0, 0, static_cast<double>(cfg.n_walkers)};
  }

  int blocks_this_run = 0;
  bool stop = false;
  auto persist = [&] {
    if (opt.write_outputs) {
      save_checkpoint(ckpt, st);
      if (std::find(res.artifacts.begin(), res.artifacts.end(), ckpt) == res.artifacts.end())
        res.artifacts.push_back(ckpt);
    }
  };

  for (std::size_t s = 0; s < st.stages.size() && !stop; ++s) {
    StageResult& r = st.stages[s];
    const StageKind kind = r.spec.kind;
    if (!selected(opt.stages, kind)) continue;
    if (opt.stages == StageSelection::All) {
      if (r.complete) continue;
    } else if (r.complete) {
      // Rerun from the checkpointed walkers; later results no longer follow from it.
      for (std::size_t t = s; t < st.stages.size(); ++t) {
        const StageSpec spec = st.stages[t].spec;
        st.stages[t] = StageResult{};
        st.stages[t].spec = spec;
      }
    }
    st.stage = s;
    const StepLaw& law = kind == StageKind::Vqmc ? vqmc_law : dqmc_law;
    st.control.block_time = r.spec.steps_per_block * law.dtau;

    if (r.blocks.empty()) {
      const bool after_diffusion = s > 0 && st.stages[s - 1].spec.kind != StageKind::Vqmc &&
                                   !st.stages[s - 1].blocks.empty();
      if (kind != StageKind::Vqmc && !after_diffusion) {
        // Start the offset at the variational estimate.
        const bool have_vqmc = s > 0 && st.stages[s - 1].used_blocks > 0;
        st.control.e_t = have_vqmc ? st.stages[s - 1].energy : mean_local_energy(st.population);
        st.control.recent.clear();
        for (auto& w : st.population) w.weight = 1.0;
      }
      if (kind == StageKind::Rpdqmc)
        for (auto& w : st.population) w.phase = 0.0;
    }

    bool warned = false;
    const auto t0 = Clock::now();
    auto hook = [&](const StageResult& cur) {
      const BlockStats& b = cur.blocks.back();
      if (opt.on_block) opt.on_block(b);
      if (kind == StageKind::Vqmc && !warned && (b.acceptance < 0.01 || b.acceptance > 0.99)) {
        warned = true;
        const std::string msg = to_string(kind) + " block " + std::to_string(b.block) + ": " +
                                suggest_dtau(b.acceptance, law.dtau);
        res.warnings.push_back(msg);
      }
      ++blocks_this_run;
      const bool last = static_cast<int>(cur.blocks.size()) == cur.spec.n_blocks;
      if (opt.stop_after_blocks >= 0 && blocks_this_run >= opt.stop_after_blocks) {
        stop = true;
        if (last) return true;  // let run_stage mark completion; saved below
        persist();
        return false;
      }
      if (!last && cfg.qmc.checkpoint_interval > 0 &&
          static_cast<int>(cur.blocks.size()) % cfg.qmc.checkpoint_interval == 0)
        persist();
      return true;
    };

    try {
      run_stage(r, st.population, psi, law, st.control, st.ctx, hook);
    } catch (const QmcError& e) {
      finalize_stage(r);
      res.failure = to_string(kind) + " stage " + std::to_string(s) + ": " + e.what();
      if (opt.log) *opt.log << "error: " << res.failure << '\n';
      stop = true;
    }
    res.timings[to_string(kind) + "#" + std::to_string(s)] += seconds_since(t0);

    if (r.complete) {
      st.stage = s + 1;
      persist();
      if (opt.log)
        *opt.log << std::setprecision(8) << to_string(kind) << ": <E_B> = " << r.energy << " Ha ("
                 << hartree_to_kev(r.energy) << " keV), sigma " << r.sigma << ", error " << r.error << ", "
                 << r.used_blocks << " blocks\n";
      if (r.clamp_events > 0)
        res.warnings.push_back(to_string(kind) + ": " + std::to_string(r.clamp_events) + " weight clamp events");
      if (r.signal_lost)
        res.warnings.push_back(to_string(kind) + ": released-phase signal lost at block " +
                               std::to_string(r.signal_lost_block));
    }
  }

  res.stages = st.stages;
  res.interrupted = res.failure.empty() &&
                    std::any_of(st.stages.begin(), st.stages.end(), [&](const StageResult& r) {
                      return selected(opt.stages, r.spec.kind) && !r.complete;
                    });
  res.complete = res.failure.empty() &&
                 std::all_of(st.stages.begin(), st.stages.end(), [](const StageResult& r) { return r.complete; });
  set_final(res);
  if (opt.write_outputs) write_outputs(cfg, res);
  return res;
}

// ------------------------------------------------------------ summary

namespace {

json dual(double hartree) {
  json j;
  j["hartree"] = hartree;
  j["kev"] = hartree_to_kev(hartree);
  return j;
}

}  // namespace

std::string summary_json(const RunConfig& cfg, const PipelineResult& res) {
  json j;
  j["format"] = "magdmc-summary";
  j["version"] = 1;
  j["config_hash"] = hex64(config_hash(cfg));
  j["z"] = cfg.z;
  j["n_electrons"] = cfg.n_electrons;
  j["b_tesla"] = cfg.field.b_tesla();
  j["beta"] = cfg.field.beta();
  j["n_walkers"] = cfg.n_walkers;
  j["dtau"] = cfg.dtau;
  j["seed"] = cfg.seed;
  j["spin_zeeman_included"] = cfg.spin_zeeman_included;
  j["complete"] = res.complete;
  if (!res.failure.empty()) j["failure"] = res.failure;
  j["e_hf"] = dual(res.e_hf.hartree);
  json stages = json::array();
  for (const auto& r : res.stages) {
    json s;
    s["stage"] = to_string(r.spec.kind);
    s["schedule"] = {{"blocks", r.spec.n_blocks},
                     {"steps_per_block", r.spec.steps_per_block},
                     {"equilibration_blocks", r.spec.equilibration_blocks},
                     {"dtau", r.dtau},
                     {"imaginary_time", r.spec.n_blocks * r.spec.steps_per_block * r.dtau}};
    s["blocks_run"] = r.blocks.size();
    s["complete"] = r.complete;
    s["used_blocks"] = r.used_blocks;
    s["energy"] = dual(r.energy);
    s["sigma"] = dual(r.sigma);
    s["error"] = dual(r.error);
    s["acceptance"] = r.acceptance;
    s["mean_population"] = r.mean_population;
    s["clamp_events"] = r.clamp_events;
    if (r.spec.kind == StageKind::Rpdqmc) {
      s["signal_lost"] = r.signal_lost;
      s["signal_lost_block"] = r.signal_lost_block;
    }
    stages.push_back(s);
  }
  j["stages"] = stages;
  if (res.final_stage >= 0) {
    j["final"] = {{"stage", to_string(res.stages[res.final_stage].spec.kind)},
                  {"energy", dual(res.final_energy)},
                  {"sigma", dual(res.final_sigma)},
                  {"error", dual(res.final_error)}};
  }
  return j.dump(2);
}

std::string manifest_json(const RunConfig& cfg, const PipelineResult& res, const std::string& config_path) {
  json j;
  j["format"] = "magdmc-manifest";
  j["version"] = 1;
  j["config_hash"] = hex64(config_hash(cfg));
  j["hf_hash"] = hex64(hf_hash(cfg));
  j["code_version"] = kVersion;
  j["inputs"] = json::array();
  if (!config_path.empty()) j["inputs"].push_back(config_path);
  j["outputs"] = res.artifacts;
  json t = json::object();
  for (const auto& [k, v] : res.timings) t[k] = v;
  j["timings_seconds"] = t;
  j["warnings"] = res.warnings;
  j["resumed"] = res.resumed;
  j["complete"] = res.complete;
  return j.dump(2);
}

}  // namespace magdmc
