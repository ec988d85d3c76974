#include "cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "thc/benchgen.hpp"
#include "thc/buffers.hpp"
#include "thc/coarsen.hpp"
#include "thc/divergence.hpp"
#include "thc/error.hpp"
#include "thc/lsu.hpp"
#include "thc/parser.hpp"
#include "thc/verify.hpp"

namespace thc::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string sha256_file(const fs::path& path) {
  const std::string data = read_text(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "cannot hash " + path.string());
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Kernel load_kernel(const fs::path& path) {
  try {
    return parse(read_text(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

// Everything needed to reproduce one invocation.
class RunRecord {
 public:
  RunRecord(std::string command, const std::vector<std::string>& args)
      : command_(std::move(command)), args_(args), started_(utc_now()) {}

  Json config = Json::object();
  std::uint64_t seed = 0;

  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }

  void write(const fs::path& manifest) const {
    Json j;
    j["format"] = "thc-run";
    j["version"] = 1;
    j["tool_version"] = kToolVersion;
    j["command"] = command_;
    j["argv"] = args_;
    j["cwd"] = fs::current_path().string();
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    j["started_at"] = started_;
    j["finished_at"] = utc_now();
    write_text(manifest, dump(j));
  }

 private:
  static Json files(const std::vector<fs::path>& paths) {
    Json list = Json::array();
    for (const auto& p : paths) list.push_back(Json{{"path", p.generic_string()}, {"sha256", sha256_file(p)}});
    return list;
  }

  std::string command_;
  std::vector<std::string> args_;
  std::string started_;
  std::vector<fs::path> inputs_, outputs_;
};

fs::path manifest_for(const fs::path& output) { return fs::path(output.string() + ".run.json"); }

void apply_scalars(const Kernel& kernel, const std::vector<std::string>& assignments, BufferSet& set) {
  for (const std::string& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw UsageError("--scalar expects NAME=VALUE, got '" + a + "'");
    const std::string name = a.substr(0, eq), value = a.substr(eq + 1);
    const Param* param = nullptr;
    for (const Param& p : kernel.params) {
      if (p.name == name && !p.type.pointer) param = &p;
    }
    if (!param) throw UsageError("kernel has no scalar parameter '" + name + "'");
    try {
      switch (param->type.scalar) {
        case ScalarType::Float: set.scalars[name] = ScalarValue::of_float(std::stof(value)); break;
        case ScalarType::Int: set.scalars[name] = ScalarValue::of_int(std::stoi(value)); break;
        case ScalarType::Uint: set.scalars[name] = ScalarValue::of_uint(static_cast<std::uint32_t>(std::stoul(value))); break;
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad value for scalar '" + name + "': " + value);
    }
  }
}

Json stats_json(const ExecStats& s) {
  return Json{{"loads", s.loads},           {"stores", s.stores},
              {"arithmetic", s.arithmetic}, {"barriers", s.barriers},
              {"local_loads", s.local_loads}, {"local_stores", s.local_stores}};
}

Json calibration_json(const Calibration& c) {
  return Json{{"target", c.target}, {"achieved", c.achieved}, {"D", c.degree}, {"reachable", c.reachable}};
}

// ---------------------------------------------------------------------------

struct CoarsenOpts {
  std::string input, output, kind = "consecutive", extent, tail = "require-divisible";
  int degree = 1, simd = 0, units = 0;
};

int cmd_coarsen(const CoarsenOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  CoarsenConfig cfg;
  cfg.kind = o.kind == "gapped" ? CoarsenKind::Gapped : CoarsenKind::Consecutive;
  cfg.degree = o.degree;
  cfg.tail_policy = o.tail == "guard-tails" ? TailPolicy::GuardTails : TailPolicy::RequireDivisible;
  if (!o.extent.empty()) cfg.extent_param = o.extent;
  if (cfg.kind == CoarsenKind::Gapped && !cfg.extent_param) throw UsageError("--kind gapped requires --extent");

  Kernel k = coarsen(load_kernel(o.input), cfg);
  if (o.simd > 0) k = emit_simd(k, o.simd);
  if (o.units > 0) k = emit_replication(k, o.units);
  const std::string text = print(k);
  if (o.output.empty()) {
    out << text;
    return kOk;
  }
  write_text(o.output, text);
  RunRecord rec("coarsen", args);
  rec.config = Json{{"kind", o.kind}, {"degree", o.degree}, {"extent", o.extent}, {"tail_policy", o.tail},
                    {"simd", o.simd}, {"compute_units", o.units}};
  rec.input(o.input);
  rec.output(o.output);
  rec.write(manifest_for(o.output));
  return kOk;
}

// ---------------------------------------------------------------------------

struct VerifyOpts {
  std::string original, transformed, buffers, dump_dir, output;
  std::size_t global = 0, local = 0, length = 0;
  int degree = 1, trials = 3;
  std::uint64_t seed = 0;
  std::vector<std::string> scalars;
};

Json mismatch_json(const Mismatch& m) {
  Json j{{"buffer", m.buffer}, {"index", m.index}, {"expected", m.expected}, {"actual", m.actual}};
  j["original_work_item"] = m.original_writer ? Json(*m.original_writer) : Json(nullptr);
  j["transformed_work_item"] = m.transformed_writer ? Json(*m.transformed_writer) : Json(nullptr);
  return j;
}

int cmd_verify(const VerifyOpts& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (o.trials < 1) throw UsageError("--trials must be positive");
  const Kernel original = load_kernel(o.original);
  const Kernel transformed = load_kernel(o.transformed);
  const Program p_orig(original), p_trans(transformed);
  const std::size_t length = o.length ? o.length : o.global;
  const fs::path dump_dir = o.dump_dir.empty() ? fs::path(o.transformed + ".mismatch") : fs::path(o.dump_dir);
  const int trials = o.buffers.empty() ? o.trials : 1;

  std::string verdicts;
  int status = kOk;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(o.seed, static_cast<std::uint64_t>(t));
    InputPlan plan;
    BufferSet inputs;
    if (o.buffers.empty()) {
      plan = random_plan(original, length, static_cast<std::int32_t>(length), trial_seed);
      inputs = materialize(plan);
    } else {
      inputs = load_buffers(o.buffers);
    }
    apply_scalars(original, o.scalars, inputs);

    const TrialResult r = compare_runs(p_orig, p_trans, o.global, o.local, o.degree, inputs);
    Json v{{"trial", t}, {"seed", trial_seed}, {"status", to_string(r.status)}};
    if (r.mismatch) v["mismatch"] = mismatch_json(*r.mismatch);
    if (r.status == TrialResult::Status::Error) {
      v["error"] = r.error;
      v["error_kind"] = to_string(*r.error_kind);
    }
    if (r.status == TrialResult::Status::Match) {
      v["original_stats"] = stats_json(r.original_stats);
      v["transformed_stats"] = stats_json(r.transformed_stats);
    }

    if (r.status == TrialResult::Status::Error &&
        (*r.error_kind == ErrorKind::Precondition || r.error.rfind("original kernel", 0) == 0)) {
      out << v.dump() << "\n";
      err << "thc verify: " << r.error << "\n";
      return kUsage;
    }
    if (r.status != TrialResult::Status::Match) {
      const std::string stem = "trial" + std::to_string(t);
      const fs::path manifest = dump_dir / (stem + ".buffers.json");
      fs::create_directories(dump_dir);
      save_buffers(inputs, manifest, dump_dir / (stem + ".bin"), o.buffers.empty() ? plan.fills : std::map<std::string, FillSpec>{});
      v["buffers"] = manifest.generic_string();
      RunRecord rec("verify", {"verify", o.original, o.transformed, "--global-size", std::to_string(o.global),
                               "--local-size", std::to_string(o.local), "--degree", std::to_string(o.degree),
                               "--buffers", manifest.string()});
      rec.config = Json{{"global_size", o.global}, {"local_size", o.local}, {"degree", o.degree}};
      rec.input(o.original);
      rec.input(o.transformed);
      rec.input(manifest);
      rec.write(dump_dir / (stem + ".replay.json"));
      if (r.mismatch) {
        err << "thc verify: trial " << t << ": " << r.mismatch->buffer << "[" << r.mismatch->index << "] expected "
            << r.mismatch->expected << ", got " << r.mismatch->actual << "\n";
      } else {
        err << "thc verify: trial " << t << ": " << r.error << "\n";
      }
      status = kMismatch;
    }
    const std::string line = v.dump() + "\n";
    out << line;
    verdicts += line;
  }
  if (!o.output.empty()) {
    write_text(o.output, verdicts);
    RunRecord rec("verify", args);
    rec.seed = o.seed;
    rec.config = Json{{"global_size", o.global}, {"local_size", o.local}, {"degree", o.degree},
                      {"trials", trials},        {"length", length},     {"scalars", o.scalars},
                      {"buffers", o.buffers}};
    rec.input(o.original);
    rec.input(o.transformed);
    if (!o.buffers.empty()) rec.input(o.buffers);
    rec.output(o.output);
    rec.write(manifest_for(o.output));
  }
  return status;
}

// ---------------------------------------------------------------------------

struct AnalyzeOpts {
  std::string input, output;
  bool labels = false;
};

int cmd_analyze(const AnalyzeOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const Kernel k = load_kernel(o.input);
  std::string text;
  if (o.labels) {
    Json list = Json::array();
    for (const BranchLabel& b : classify_divergence(k)) {
      list.push_back(Json{{"construct", b.construct},
                          {"condition", b.condition},
                          {"divergence", to_string(b.label)},
                          {"id_dependent", b.id_dependent},
                          {"data_dependent", b.data_dependent}});
    }
    text = dump(Json{{"kernel", k.name}, {"branches", list}});
  } else {
    text = to_json(analyze(k));
  }
  if (o.output.empty()) {
    out << text;
    return kOk;
  }
  write_text(o.output, text);
  RunRecord rec("analyze", args);
  rec.config = Json{{"labels", o.labels}, {"model_version", kLsuModelVersion}};
  rec.input(o.input);
  rec.output(o.output);
  rec.write(manifest_for(o.output));
  return kOk;
}

// ---------------------------------------------------------------------------

struct GenbenchOpts {
  std::string spec_file, output;
  std::optional<int> loads, ai, degree;
  std::optional<std::string> access, divergence;
  std::optional<std::int64_t> irregularity;
  std::optional<double> hit_rate;
  std::optional<std::size_t> length;
  std::optional<std::uint64_t> seed;
  bool full = false, grid = false, sweep = false;
};

struct BenchJob {
  std::string group;
  std::string name;
  BenchSpec spec;
  std::optional<double> hit_rate;
};

BenchSpec spec_from(const GenbenchOpts& o, std::optional<double>& hit_rate) {
  BenchSpec s;
  if (!o.spec_file.empty()) {
    Json j;
    try {
      j = Json::parse(read_text(o.spec_file));
      if (j.contains("num_loads")) s.num_loads = j["num_loads"].get<int>();
      if (j.contains("ai")) s.ai = j["ai"].get<int>();
      if (j.contains("access")) s.access = parse_access_mode(j["access"].get<std::string>());
      if (j.contains("irregularity")) s.irregularity = j["irregularity"].get<std::int64_t>();
      if (j.contains("hit_rate")) hit_rate = j["hit_rate"].get<double>();
      if (j.contains("divergence")) s.divergence = parse_divergence_pattern(j["divergence"].get<std::string>());
      if (j.contains("divergence_degree")) s.divergence_degree = j["divergence_degree"].get<int>();
      if (j.contains("length")) s.length = j["length"].get<std::size_t>();
      if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidSpec, o.spec_file + ": " + e.what());
    }
  }
  if (o.loads) s.num_loads = *o.loads;
  if (o.ai) s.ai = *o.ai;
  if (o.access) s.access = parse_access_mode(*o.access);
  if (o.irregularity) s.irregularity = *o.irregularity;
  if (o.hit_rate) hit_rate = *o.hit_rate;
  if (o.divergence) s.divergence = parse_divergence_pattern(*o.divergence);
  if (o.degree) s.divergence_degree = *o.degree;
  if (o.full) s.length = std::size_t{64} << 20;
  if (o.length) s.length = *o.length;
  if (o.seed) s.seed = *o.seed;
  if (hit_rate && s.access != AccessMode::Indirect) {
    throw Error(ErrorKind::InvalidSpec, "a hit-rate target applies to indirect access only");
  }
  if (hit_rate && s.irregularity) throw Error(ErrorKind::InvalidSpec, "give either a hit-rate target or an irregularity degree");
  return s;
}

Json spec_json(const BenchSpec& s, std::int64_t irregularity) {
  Json j{{"num_loads", s.num_loads},
         {"ai", s.ai},
         {"access", to_string(s.access)},
         {"divergence", to_string(s.divergence)},
         {"divergence_degree", s.divergence_degree},
         {"length", s.length},
         {"seed", s.seed}};
  if (s.access == AccessMode::Indirect) j["irregularity"] = irregularity;
  return j;
}

int cmd_genbench(const GenbenchOpts& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (o.grid && o.sweep) throw UsageError("--grid and --sweep are exclusive");
  std::optional<double> hit_rate;
  const BenchSpec base = spec_from(o, hit_rate);

  std::vector<BenchJob> jobs;
  if (o.grid) {
    for (const GridEntry& e : bench_grid(base.length, base.seed)) {
      std::string name = spec_name(e.spec);
      if (e.hit_rate) name += "_h" + std::to_string(static_cast<int>(std::lround(*e.hit_rate * 100)));
      jobs.push_back({e.group, name, e.spec, e.hit_rate});
    }
  } else if (o.sweep) {
    for (const BenchSpec& s : bench_sweep(base.length, base.seed)) jobs.push_back({"sweep", spec_name(s), s, std::nullopt});
  } else {
    validate(base);
    jobs.push_back({"", spec_name(base), base, hit_rate});
  }

  const fs::path dir = o.output;
  RunRecord rec("genbench", args);
  rec.seed = base.seed;
  rec.config = Json{{"mode", o.grid ? "grid" : o.sweep ? "sweep" : "single"}, {"spec", spec_json(base, base.irregularity.value_or(0))}};
  if (hit_rate) rec.config["hit_rate"] = *hit_rate;
  if (!o.spec_file.empty()) rec.input(o.spec_file);

  std::map<double, Calibration> calibrations;
  auto calibration = [&](double target) {
    auto it = calibrations.find(target);
    if (it == calibrations.end()) it = calibrations.emplace(target, calibrate(target, CacheModel{}, base.length, base.seed)).first;
    return it->second;
  };

  Json index = Json::array();
  for (const BenchJob& job : jobs) {
    const fs::path sub = job.group.empty() ? dir : dir / job.group;
    const Kernel k = generate(job.spec);
    std::int64_t irregularity = job.spec.irregularity.value_or(0);
    std::optional<Calibration> cal;
    if (job.spec.access == AccessMode::Indirect && !job.spec.irregularity) {
      cal = calibration(job.hit_rate.value_or(kDefaultHitRate));
      irregularity = cal->degree;
      if (!cal->reachable) {
        err << "thc genbench: hit rate " << cal->target << " is unreachable; nearest is " << cal->achieved
            << " at D=" << cal->degree << "\n";
      }
    }
    const InputPlan plan = bench_plan(job.spec, irregularity);
    BufferSet buffers = materialize(plan);
    std::map<std::string, FillSpec> fills = plan.fills;
    fills.erase("index");  // index arrays are stored as data

    Json entry{{"group", job.group}, {"name", job.name}};
    const fs::path kernel_path = sub / (job.name + ".cl");
    write_text(kernel_path, print(k));
    rec.output(kernel_path);
    entry["kernel"] = fs::relative(kernel_path, dir).generic_string();

    const fs::path buffers_path = sub / (job.name + ".buffers.json");
    const fs::path data_path = sub / (job.name + ".bin");
    save_buffers(buffers, buffers_path, data_path, fills);
    rec.output(buffers_path);
    rec.output(data_path);
    entry["buffers"] = fs::relative(buffers_path, dir).generic_string();

    const fs::path spec_path = sub / (job.name + ".spec.json");
    write_text(spec_path, dump(spec_json(job.spec, irregularity)));
    rec.output(spec_path);
    entry["spec"] = fs::relative(spec_path, dir).generic_string();

    if (cal) {
      const fs::path cal_path = sub / (job.name + ".calibration.json");
      write_text(cal_path, dump(calibration_json(*cal)));
      rec.output(cal_path);
      entry["calibration"] = fs::relative(cal_path, dir).generic_string();
    }
    index.push_back(std::move(entry));
    out << kernel_path.generic_string() << "\n";
  }
  const fs::path index_path = dir / "index.json";
  write_text(index_path, dump(Json{{"benchmarks", index}}));
  rec.output(index_path);
  rec.write(dir / "run.json");
  return kOk;
}

// ---------------------------------------------------------------------------

struct CalibrateOpts {
  double target = 0;
  std::size_t length = std::size_t{1} << 20;
  std::uint64_t seed = 0;
  CacheModel model;
  std::string output;
};

int cmd_calibrate(const CalibrateOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const Calibration c = calibrate(o.target, o.model, o.length, o.seed);
  const std::string text = dump(calibration_json(c));
  out << text;
  if (!o.output.empty()) {
    write_text(o.output, text);
    RunRecord rec("calibrate", args);
    rec.seed = o.seed;
    rec.config = Json{{"target", o.target},
                      {"length", o.length},
                      {"capacity_bits", o.model.capacity_bits},
                      {"line_bytes", o.model.line_bytes},
                      {"associativity", o.model.associativity}};
    rec.output(o.output);
    rec.write(manifest_for(o.output));
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct RunOpts {
  std::string input, buffers, output;
  std::size_t global = 0, local = 0, length = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> scalars;
  bool reverse = false;
};

int cmd_run(const RunOpts& o, const std::vector<std::string>& args, std::ostream& out) {
  const Kernel k = load_kernel(o.input);
  const std::size_t length = o.length ? o.length : o.global;
  BufferSet inputs = o.buffers.empty()
                         ? materialize(random_plan(k, length, static_cast<std::int32_t>(length), o.seed))
                         : load_buffers(o.buffers);
  apply_scalars(k, o.scalars, inputs);
  const ExecResult r = Program(k).run(LaunchConfig{o.global, o.local, o.reverse}, inputs);
  const std::string text = dump(Json{{"kernel", k.name}, {"stats", stats_json(r.stats)}});
  out << text;
  if (!o.output.empty()) {
    const fs::path dir = o.output;
    fs::create_directories(dir);
    save_buffers(r.memory, dir / "result.buffers.json", dir / "result.bin", {});
    write_text(dir / "stats.json", text);
    RunRecord rec("run", args);
    rec.seed = o.seed;
    rec.config = Json{{"global_size", o.global}, {"local_size", o.local},     {"length", length},
                      {"scalars", o.scalars},     {"reverse_groups", o.reverse}, {"buffers", o.buffers}};
    rec.input(o.input);
    if (!o.buffers.empty()) rec.input(o.buffers);
    rec.output(dir / "result.buffers.json");
    rec.output(dir / "result.bin");
    rec.output(dir / "stats.json");
    rec.write(dir / "run.json");
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct CwdGuard {
  fs::path saved = fs::current_path();
  ~CwdGuard() {
    std::error_code ec;
    fs::current_path(saved, ec);
  }
};

int cmd_replay(const std::string& manifest, std::ostream& out, std::ostream& err) {
  Json j;
  try {
    j = Json::parse(read_text(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, manifest + ": " + e.what());
  }
  if (j.value("format", "") != "thc-run" || j.value("version", 0) != 1) {
    throw Error(ErrorKind::Io, manifest + ": not a version 1 run manifest");
  }
  const auto argv = j.at("argv").get<std::vector<std::string>>();
  if (!argv.empty() && argv.front() == "replay") throw UsageError("refusing to replay a replay");
  CwdGuard guard;
  fs::current_path(j.at("cwd").get<std::string>());
  const int code = run(argv, out, err);
  if (code != kOk) return code;
  int changed = 0;
  for (const Json& f : j.at("outputs")) {
    const std::string path = f.at("path");
    if (!fs::exists(path) || sha256_file(path) != f.at("sha256").get<std::string>()) {
      err << "thc replay: output differs: " << path << "\n";
      ++changed;
    }
  }
  if (changed) return kMismatch;
  err << "thc replay: " << j.at("outputs").size() << " outputs identical\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Thread-coarsening toolkit for OpenCL-C kernels", "thc"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CoarsenOpts co;
  auto* c = app.add_subcommand("coarsen", "Apply consecutive or gapped coarsening");
  c->add_option("input", co.input, "Kernel source")->required();
  c->add_option("--kind", co.kind)->check(CLI::IsMember({"consecutive", "gapped"}));
  c->add_option("--degree", co.degree, "Coarsening degree C")->required()->check(CLI::Range(1, 1 << 16));
  c->add_option("--extent", co.extent, "Int parameter holding N (gapped)");
  c->add_option("--tail-policy", co.tail)->check(CLI::IsMember({"require-divisible", "guard-tails"}));
  c->add_option("--simd", co.simd, "Also set num_simd_work_items")->check(CLI::Range(1, 1 << 16));
  c->add_option("--compute-units", co.units, "Also set num_compute_units")->check(CLI::Range(1, 1 << 16));
  c->add_option("-o,--output", co.output);

  VerifyOpts vo;
  auto* v = app.add_subcommand("verify", "Check a transformed kernel against its original");
  v->add_option("original", vo.original)->required();
  v->add_option("transformed", vo.transformed)->required();
  v->add_option("--global-size", vo.global)->required()->check(CLI::PositiveNumber);
  v->add_option("--local-size", vo.local);
  v->add_option("--degree", vo.degree)->required()->check(CLI::Range(1, 1 << 16));
  v->add_option("--seed", vo.seed);
  v->add_option("--trials", vo.trials);
  v->add_option("--length", vo.length, "Buffer length (default: global size)");
  v->add_option("--scalar", vo.scalars, "NAME=VALUE")->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  v->add_option("--buffers", vo.buffers, "Buffer manifest instead of random inputs");
  v->add_option("--dump-dir", vo.dump_dir);
  v->add_option("-o,--output", vo.output, "Verdicts, one JSON object per line");

  AnalyzeOpts ao;
  auto* a = app.add_subcommand("analyze", "Predict load-store units");
  a->add_option("input", ao.input)->required();
  a->add_flag("--labels", ao.labels, "Print branch divergence labels instead");
  a->add_option("-o,--output", ao.output);

  GenbenchOpts go;
  auto* g = app.add_subcommand("genbench", "Generate microbenchmarks");
  g->add_option("--spec", go.spec_file, "JSON spec");
  g->add_option("--loads", go.loads);
  g->add_option("--ai", go.ai);
  g->add_option("--access", go.access)->check(CLI::IsMember({"direct", "indirect"}));
  g->add_option("--irregularity", go.irregularity);
  g->add_option("--hit-rate", go.hit_rate)->check(CLI::Range(0.0, 1.0));
  g->add_option("--divergence", go.divergence)
      ->check(CLI::IsMember({"none", "if-id", "if-in", "for-constant+if-id", "for-in+if-in"}));
  g->add_option("--divergence-degree", go.degree);
  g->add_option("--length", go.length);
  g->add_flag("--full", go.full, "Use 64M-element arrays");
  g->add_option("--seed", go.seed);
  g->add_flag("--grid", go.grid, "Emit the one-factor-at-a-time grid");
  g->add_flag("--sweep", go.sweep, "Emit the full cross product");
  g->add_option("-o,--output", go.output)->required();

  CalibrateOpts ko;
  auto* k = app.add_subcommand("calibrate", "Find the irregularity degree for a hit rate");
  k->add_option("--target", ko.target)->required()->check(CLI::Range(0.0, 1.0));
  k->add_option("--length", ko.length);
  k->add_option("--seed", ko.seed);
  k->add_option("--capacity-bits", ko.model.capacity_bits);
  k->add_option("--line-bytes", ko.model.line_bytes);
  k->add_option("--associativity", ko.model.associativity);
  k->add_option("-o,--output", ko.output);

  RunOpts ro;
  auto* r = app.add_subcommand("run", "Interpret a kernel");
  r->add_option("input", ro.input)->required();
  r->add_option("--global-size", ro.global)->required()->check(CLI::PositiveNumber);
  r->add_option("--local-size", ro.local);
  r->add_option("--length", ro.length);
  r->add_option("--seed", ro.seed);
  r->add_option("--scalar", ro.scalars, "NAME=VALUE")->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  r->add_option("--buffers", ro.buffers);
  r->add_flag("--reverse-groups", ro.reverse);
  r->add_option("-o,--output", ro.output, "Directory for result buffers");

  std::string replay_manifest;
  auto* p = app.add_subcommand("replay", "Re-run a recorded command and compare outputs");
  p->add_option("manifest", replay_manifest)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "thc: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (c->parsed()) return cmd_coarsen(co, args, out);
    if (v->parsed()) return cmd_verify(vo, args, out, err);
    if (a->parsed()) return cmd_analyze(ao, args, out);
    if (g->parsed()) return cmd_genbench(go, args, out, err);
    if (k->parsed()) return cmd_calibrate(ko, args, out);
    if (r->parsed()) return cmd_run(ro, args, out);
    if (p->parsed()) return cmd_replay(replay_manifest, out, err);
  } catch (const UsageError& e) {
    err << "thc: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "thc: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "thc: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace thc::cli
