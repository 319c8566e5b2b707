// Experiment driver for the clipped matrix completion library. Talks to the
// shared library exclusively through the C interface in cmc.h; experiment
// definitions are JSON configs (flags mirror the keys, the config file wins
// conflicts). Every run directory receives the resolved config so reruns are
// reproducible byte for byte.
//
// Exit codes: 0 success, 1 config error, 2 runtime failure, 3 expectation
// threshold failure (CI gating).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmc.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitThreshold = 3;

struct CliError {
  int exit_code;
  std::string message;
};

void check(int rc, const std::string& what) {
  if (rc == CMC_OK) return;
  const int exit_code = rc == CMC_ERR_INVALID_ARGUMENT ? kExitConfig : kExitRuntime;
  throw CliError{exit_code, what + ": " + cmc_last_error()};
}

// RAII wrappers over the opaque handles
struct MatrixPtr {
  cmc_matrix* p = nullptr;
  MatrixPtr() = default;
  explicit MatrixPtr(cmc_matrix* q) : p(q) {}
  MatrixPtr(MatrixPtr&& o) noexcept : p(o.p) { o.p = nullptr; }
  MatrixPtr& operator=(MatrixPtr&& o) noexcept {
    std::swap(p, o.p);
    return *this;
  }
  ~MatrixPtr() { cmc_matrix_free(p); }
};

struct ObservedPtr {
  cmc_observed* p = nullptr;
  ObservedPtr() = default;
  explicit ObservedPtr(cmc_observed* q) : p(q) {}
  ObservedPtr(ObservedPtr&& o) noexcept : p(o.p) { o.p = nullptr; }
  ObservedPtr& operator=(ObservedPtr&& o) noexcept {
    std::swap(p, o.p);
    return *this;
  }
  ~ObservedPtr() { cmc_observed_free(p); }
};

struct ResultPtr {
  cmc_result* p = nullptr;
  ResultPtr() = default;
  explicit ResultPtr(cmc_result* q) : p(q) {}
  ResultPtr(ResultPtr&& o) noexcept : p(o.p) { o.p = nullptr; }
  ResultPtr& operator=(ResultPtr&& o) noexcept {
    std::swap(p, o.p);
    return *this;
  }
  ~ResultPtr() { cmc_result_free(p); }
};

std::string grab_string(char* s) {
  std::string out = s ? s : "";
  cmc_string_free(s);
  return out;
}

std::string fmt(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{kExitRuntime, "cannot write " + path.string()};
  out << contents;
}

struct ObservedData {
  std::vector<std::uint64_t> rows, cols;
  std::vector<double> values;
};

ObservedData copy_observed(const cmc_observed* obs) {
  std::size_t n = 0;
  check(cmc_observed_count(obs, &n), "observed_count");
  ObservedData data;
  data.rows.resize(n);
  data.cols.resize(n);
  data.values.resize(n);
  if (n > 0)
    check(cmc_observed_copy(obs, data.rows.data(), data.cols.data(), data.values.data()),
          "observed_copy");
  return data;
}

std::string observed_csv(const cmc_observed* obs) {
  ObservedData data = copy_observed(obs);
  std::string out = "i,j,value\n";
  for (std::size_t k = 0; k < data.values.size(); ++k)
    out += std::to_string(data.rows[k]) + "," + std::to_string(data.cols[k]) + "," +
           fmt(data.values[k]) + "\n";
  return out;
}

// ---- configuration -------------------------------------------------------

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{kExitConfig, "cannot open config file " + path};
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CliError{kExitConfig, std::string("config parse error: ") + e.what()};
  }
}

// config file beats flags, with a warning per conflicting key
json merge_config(const json& flags, const json& file) {
  json merged = flags;
  for (const auto& [key, value] : file.items()) {
    if (merged.contains(key) && merged[key] != value)
      std::cerr << "warning: config file overrides --" << key << "\n";
    merged[key] = value;
  }
  return merged;
}

struct SynthConfig {
  std::uint64_t n1 = 100, n2 = 160;
  int r = 5;
  int magnitude = 15;
  double p = 0.8;
  double ceiling = 10.0;
};

SynthConfig synth_from(const json& cfg) {
  SynthConfig s;
  if (!cfg.contains("synth")) return s;
  const json& j = cfg["synth"];
  for (const auto& [key, value] : j.items()) {
    if (key == "n1")
      s.n1 = value.get<std::uint64_t>();
    else if (key == "n2")
      s.n2 = value.get<std::uint64_t>();
    else if (key == "r")
      s.r = value.get<int>();
    else if (key == "L")
      s.magnitude = value.get<int>();
    else if (key == "p")
      s.p = value.get<double>();
    else if (key == "C")
      s.ceiling = value.get<double>();
    else
      throw CliError{kExitConfig, "unknown synth field: " + key};
  }
  return s;
}

struct SynthInstance {
  MatrixPtr m;
  ObservedPtr train, val, test;
  double clipping_rate = 0.0;
};

SynthInstance make_instance(const SynthConfig& s, std::uint64_t seed) {
  SynthInstance inst;
  check(cmc_generate_synthetic(s.n1, s.n2, s.r, s.magnitude, s.p, s.ceiling, seed, &inst.m.p,
                               &inst.train.p, &inst.val.p, &inst.test.p, &inst.clipping_rate),
        "generate_synthetic");
  return inst;
}

std::vector<json> grid_for_variant(const json& cfg, const std::string& variant, bool real_data) {
  if (cfg.contains("grids") && cfg["grids"].contains(variant)) {
    std::vector<json> grid;
    for (const json& j : cfg["grids"][variant]) {
      json c = j;
      c["variant"] = variant;
      grid.push_back(c);
    }
    return grid;
  }
  const bool fro = variant.rfind("Fro", 0) == 0;
  const bool tr = variant.rfind("Tr", 0) == 0;
  std::vector<json> grid;
  if (fro) {
    char* text = nullptr;
    check(cmc_preset_grid(real_data ? "fro-real" : "fro-synthetic", &text), "preset_grid");
    for (json j : json::parse(grab_string(text))) {
      j["variant"] = variant;
      grid.push_back(j);
    }
  } else if (tr) {
    if (real_data) {
      char* text = nullptr;
      check(cmc_preset_grid("tr-real", &text), "preset_grid");
      for (json j : json::parse(grab_string(text))) {
        j["variant"] = variant;
        grid.push_back(j);
      }
    } else {
      json j = {{"variant", variant}, {"lambda1", 1e-4}, {"max_iter", 300}, {"tol", 0.0}};
      grid.push_back(j);
    }
  } else {  // DTr and the exact program run a single config unless overridden
    json j = {{"variant", variant}, {"lambda1", 0.2}, {"lambda2", 0.2},
              {"max_iter", 1000},   {"eta0", 1.0}};
    if (variant == "ExactTraceNorm") j = {{"variant", variant}, {"max_iter", 20000}, {"tol", 1e-8}};
    grid.push_back(j);
  }
  return grid;
}

ResultPtr run_grid(const cmc_observed* train, const std::vector<json>& grid, const json& criteria,
                   const cmc_observed* val, std::uint64_t seed, std::string* table_csv) {
  json jgrid = json::array();
  for (const json& g : grid) jgrid.push_back(g);
  cmc_result* best = nullptr;
  char* table = nullptr;
  check(cmc_grid_search(train, jgrid.dump().c_str(), criteria.dump().c_str(), val, seed, &best,
                        &table),
        "grid_search");
  if (table_csv) *table_csv = grab_string(table);
  else
    cmc_string_free(table);
  return ResultPtr(best);
}

fs::path prepare_run_dir(const json& cfg, const std::string& pipeline) {
  fs::path dir = cfg.value("out_dir", std::string("runs/") + pipeline);
  fs::create_directories(dir);
  json resolved = cfg;
  resolved["pipeline"] = pipeline;
  write_file(dir / "resolved_config.json", resolved.dump(2) + "\n");
  return dir;
}

std::vector<std::uint64_t> seeds_from(const json& cfg) {
  std::vector<std::uint64_t> seeds;
  if (cfg.contains("seeds"))
    for (const json& s : cfg["seeds"]) seeds.push_back(s.get<std::uint64_t>());
  else
    seeds = {0, 1, 2, 3, 4};
  return seeds;
}

// ---- pipelines ------------------------------------------------------------

int pipeline_generate(const json& cfg, bool dry_run) {
  const SynthConfig s = synth_from(cfg);
  const std::uint64_t seed = cfg.value("seed", 0ULL);
  if (dry_run) {
    std::cout << "generate: " << s.n1 << "x" << s.n2 << " r=" << s.r << " L=" << s.magnitude
              << " p=" << s.p << " C=" << s.ceiling << " seed=" << seed << "\n";
    return 0;
  }
  const fs::path dir = prepare_run_dir(cfg, "generate");
  SynthInstance inst = make_instance(s, seed);
  check(cmc_matrix_write(inst.m.p, (dir / "m.bin").string().c_str()), "matrix_write");
  write_file(dir / "train.csv", observed_csv(inst.train.p));
  write_file(dir / "val.csv", observed_csv(inst.val.p));
  write_file(dir / "test.csv", observed_csv(inst.test.p));
  json sidecar = {{"n1", s.n1},       {"n2", s.n2},
                  {"r", s.r},         {"L", s.magnitude},
                  {"p", s.p},         {"C", s.ceiling},
                  {"seed", seed},     {"clipping_rate", inst.clipping_rate}};
  write_file(dir / "instance.json", sidecar.dump(2) + "\n");
  std::cout << "clipping_rate=" << fmt(inst.clipping_rate) << "\n";
  return 0;
}

int pipeline_solve(const json& cfg, bool dry_run) {
  const SynthConfig s = synth_from(cfg);
  const std::uint64_t seed = cfg.value("seed", 0ULL);
  json solver = cfg.value("solver", json{{"variant", "Fro-CMC"}, {"lambda1", 0.01},
                                         {"rank_k", 8}, {"max_iter", 200}, {"tol", 1e-9}});
  if (dry_run) {
    std::cout << "solve: instance " << s.n1 << "x" << s.n2 << " seed=" << seed << " solver "
              << solver.dump() << "\n";
    return 0;
  }
  const fs::path dir = prepare_run_dir(cfg, "solve");
  SynthInstance inst = make_instance(s, seed);
  cmc_result* raw = nullptr;
  check(cmc_solve(inst.train.p, solver.dump().c_str(), &raw), "solve");
  ResultPtr result(raw);
  MatrixPtr estimate;
  check(cmc_result_estimate(result.p, &estimate.p), "result_estimate");
  check(cmc_matrix_write(estimate.p, (dir / "estimate.bin").string().c_str()), "matrix_write");
  char* trace = nullptr;
  check(cmc_result_trace_csv(result.p, &trace), "trace_csv");
  write_file(dir / "trace.csv", grab_string(trace));

  double rel_all = 0.0;
  check(cmc_rel_rmse_all(estimate.p, inst.m.p, &rel_all), "rel_rmse_all");
  std::string metrics = "metric,value\nrel_rmse_all," + fmt(rel_all) + "\n";
  metrics += "clipping_rate," + fmt(inst.clipping_rate) + "\n";
  std::size_t n_test = 0;
  cmc_observed_count(inst.test.p, &n_test);
  if (n_test > 0) {
    ObservedPtr below;
    check(cmc_observed_filter_below(inst.test.p, s.ceiling, &below.p), "filter_below");
    std::size_t n_below = 0;
    cmc_observed_count(below.p, &n_below);
    if (n_below > 0) {
      double rel_nc = 0.0;
      check(cmc_rel_rmse(estimate.p, below.p, 0, 0.0, &rel_nc), "rel_rmse");
      metrics += "rel_rmse_nonclipped_test," + fmt(rel_nc) + "\n";
    }
  }
  write_file(dir / "metrics.csv", metrics);
  std::cout << metrics;
  if (cfg.contains("expect")) {
    const json& expect = cfg["expect"];
    if (expect.contains("max_rel_rmse_all") &&
        rel_all > expect["max_rel_rmse_all"].get<double>()) {
      std::cerr << "expectation failed: rel_rmse_all " << fmt(rel_all) << " > "
                << expect["max_rel_rmse_all"].dump() << "\n";
      return kExitThreshold;
    }
  }
  return 0;
}

int pipeline_diagnose(const json& cfg, bool dry_run) {
  json options = cfg.value("diagnose", json::object());
  if (!options.contains("ceiling")) {
    if (cfg.contains("synth")) options["ceiling"] = synth_from(cfg).ceiling;
    else
      throw CliError{kExitConfig, "diagnose needs diagnose.ceiling or a synth section"};
  }
  if (dry_run) {
    std::cout << "diagnose options " << options.dump() << "\n";
    return 0;
  }
  const fs::path dir = prepare_run_dir(cfg, "diagnose");
  MatrixPtr m;
  if (cfg.contains("matrix")) {
    check(cmc_matrix_read(cfg["matrix"].get<std::string>().c_str(), &m.p), "matrix_read");
  } else {
    SynthInstance inst = make_instance(synth_from(cfg), cfg.value("seed", 0ULL));
    m = std::move(inst.m);
  }
  char* text = nullptr;
  check(cmc_diagnose(m.p, options.dump().c_str(), &text), "diagnose");
  const std::string report_text = grab_string(text);
  write_file(dir / "report.json", report_text + "\n");
  const json report = json::parse(report_text);
  for (const auto& [key, value] : report.items())
    if (!value.is_object()) std::cout << key << "=" << value.dump() << "\n";
  std::string pmin_csv = "term,value\n";
  if (report.contains("pmin")) {
    for (const auto& [key, value] : report["pmin"].items())
      pmin_csv += key + "," + value.dump() + "\n";
    for (const auto& [key, value] : report["pmin"].items())
      std::cout << "pmin." << key << "=" << value.dump() << "\n";
  }
  write_file(dir / "pmin.csv", pmin_csv);
  return 0;
}

struct SweepRow {
  double c, clipping_rate;
  std::string variant;
  std::uint64_t seed;
  double rel_all, rel_nonclipped, val_metric;
};

int pipeline_sweep(const json& cfg, bool dry_run, int jobs) {
  const SynthConfig base = synth_from(cfg);
  std::vector<double> c_grid;
  if (cfg.contains("c_grid"))
    for (const json& c : cfg["c_grid"]) c_grid.push_back(c.get<double>());
  else
    c_grid = {5, 6, 7, 8, 9, 11, 13};
  std::vector<std::string> variants =
      cfg.value("variants", std::vector<std::string>{"Fro-CMC", "Fro-MC", "Fro-MCi", "Tr-CMC",
                                                     "Tr-MC", "Tr-MCi"});
  const std::vector<std::uint64_t> seeds = seeds_from(cfg);
  if (dry_run) {
    std::cout << "sweep: " << c_grid.size() << " thresholds x " << variants.size()
              << " variants x " << seeds.size() << " seeds on " << base.n1 << "x" << base.n2
              << " r=" << base.r << "\n";
    return 0;
  }
  const fs::path dir = prepare_run_dir(cfg, "sweep");

  struct Job {
    double c;
    std::uint64_t seed;
  };
  std::vector<Job> job_list;
  for (double c : c_grid)
    for (std::uint64_t seed : seeds) job_list.push_back({c, seed});
  std::vector<std::vector<SweepRow>> results(job_list.size());

  auto work = [&](std::size_t index) {
    const Job& job = job_list[index];
    SynthConfig s = base;
    s.ceiling = job.c;
    SynthInstance inst = make_instance(s, job.seed);
    for (const std::string& variant : variants) {
      const std::vector<json> grid = grid_for_variant(cfg, variant, false);
      const json criteria = {{"selection", "val_rel_rmse_clipped"}, {"ceiling", job.c}};
      ResultPtr best = run_grid(inst.train.p, grid, criteria, inst.val.p, job.seed, nullptr);
      MatrixPtr estimate;
      check(cmc_result_estimate(best.p, &estimate.p), "result_estimate");
      SweepRow row;
      row.c = job.c;
      row.clipping_rate = inst.clipping_rate;
      row.variant = variant;
      row.seed = job.seed;
      check(cmc_rel_rmse_all(estimate.p, inst.m.p, &row.rel_all), "rel_rmse_all");
      ObservedPtr below;
      check(cmc_observed_filter_below(inst.test.p, job.c, &below.p), "filter_below");
      std::size_t n_below = 0;
      cmc_observed_count(below.p, &n_below);
      row.rel_nonclipped = 0.0;
      if (n_below > 0) check(cmc_rel_rmse(estimate.p, below.p, 0, 0.0, &row.rel_nonclipped), "rel_rmse");
      double val_metric = 0.0;
      check(cmc_rel_rmse(estimate.p, inst.val.p, 1, job.c, &val_metric), "rel_rmse");
      row.val_metric = val_metric;
      results[index].push_back(row);
    }
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < job_list.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= job_list.size()) return;
          work(i);
        }
      });
    for (std::thread& t : pool) t.join();
  }

  std::string csv = "C,clipping_rate,variant,seed,rel_rmse_all,rel_rmse_nonclipped_test,val_metric\n";
  for (const auto& rows : results)
    for (const SweepRow& row : rows)
      csv += fmt(row.c) + "," + fmt(row.clipping_rate) + "," + row.variant + "," +
             std::to_string(row.seed) + "," + fmt(row.rel_all) + "," + fmt(row.rel_nonclipped) +
             "," + fmt(row.val_metric) + "\n";
  write_file(dir / "sweep.csv", csv);

  // per (C, variant) means for plot-ready output
  std::map<std::pair<double, std::string>, std::vector<SweepRow>> grouped;
  for (const auto& rows : results)
    for (const SweepRow& row : rows) grouped[{row.c, row.variant}].push_back(row);
  std::string summary = "C,clipping_rate,variant,rel_rmse_all_mean,rel_rmse_nonclipped_mean\n";
  for (const auto& [key, rows] : grouped) {
    double rate = 0, all = 0, nc = 0;
    for (const SweepRow& row : rows) {
      rate += row.clipping_rate;
      all += row.rel_all;
      nc += row.rel_nonclipped;
    }
    const double n = static_cast<double>(rows.size());
    summary += fmt(key.first) + "," + fmt(rate / n) + "," + key.second + "," + fmt(all / n) + "," +
               fmt(nc / n) + "\n";
  }
  write_file(dir / "sweep_summary.csv", summary);
  std::cout << "sweep rows: " << job_list.size() * variants.size() << "\n";
  return 0;
}

ObservedPtr load_dataset(const json& cfg) {
  if (!cfg.contains("dataset")) throw CliError{kExitConfig, "dataset section required"};
  const json& d = cfg["dataset"];
  const std::string kind = d.value("kind", "movielens");
  const std::string path = d.value("path", "");
  if (path.empty()) throw CliError{kExitConfig, "dataset.path required"};
  ObservedPtr obs;
  if (kind == "movielens")
    check(cmc_load_movielens(path.c_str(), &obs.p), "load_movielens");
  else if (kind == "filmtrust")
    check(cmc_load_filmtrust(path.c_str(), d.value("double_ratings", true) ? 1 : 0, &obs.p),
          "load_filmtrust");
  else
    throw CliError{kExitConfig, "unknown dataset kind: " + kind};
  return obs;
}

std::string histogram_csv(const cmc_observed* obs) {
  ObservedData data = copy_observed(obs);
  std::map<double, std::size_t> bins;
  for (double v : data.values) ++bins[v];
  std::string csv = "rating,count\n";
  for (const auto& [value, count] : bins) csv += fmt(value) + "," + std::to_string(count) + "\n";
  return csv;
}

int pipeline_task(const json& cfg, bool dry_run, int jobs, int task) {
  const json task_cfg = cfg.value("task", json::object());
  const double c = task_cfg.value("c", 0.0);
  if (c <= 0.0) throw CliError{kExitConfig, "task.c (decision threshold) required"};
  std::vector<std::string> variants =
      cfg.value("variants", std::vector<std::string>{"Fro-CMC", "Fro-MC", "Tr-CMC", "Tr-MC"});
  const std::vector<std::uint64_t> seeds = seeds_from(cfg);
  if (dry_run) {
    std::cout << "task" << task << ": c=" << c << ", " << variants.size() << " variants x "
              << seeds.size() << " seeds\n";
    return 0;
  }
  const fs::path dir = prepare_run_dir(cfg, "task" + std::to_string(task));
  ObservedPtr full = load_dataset(cfg);
  write_file(dir / "ratings_histogram.csv", histogram_csv(full.p));

  struct TaskRow {
    std::string variant;
    std::uint64_t seed;
    double f1, precision, recall;
  };
  std::vector<std::vector<TaskRow>> results(seeds.size());

  auto work = [&](std::size_t seed_index) {
    const std::uint64_t seed = seeds[seed_index];
    ObservedPtr train_raw, val_raw, test_raw;
    check(cmc_observed_split(full.p, 0.8, 0.1, 0.1, seed, &train_raw.p, &val_raw.p, &test_raw.p),
          "observed_split");
    ObservedPtr train, val, test;
    check(cmc_prune_empty(train_raw.p, val_raw.p, test_raw.p, &train.p, &val.p, &test.p),
          "prune_empty");
    // task 1 clips the training data at c; task 2 attaches the scale maximum
    // as the threshold (the clip is then a no-op on the raw values)
    ObservedPtr train_clipped;
    check(cmc_observed_clip(train.p, c, &train_clipped.p), "observed_clip");

    for (const std::string& variant : variants) {
      const bool hinge_aware = variant.find("CMC") != std::string::npos ||
                               variant.find("MCi") != std::string::npos;
      const cmc_observed* fit_on = hinge_aware ? train_clipped.p : train.p;
      if (task == 1) fit_on = train_clipped.p;  // everyone sees clipped data in task 1
      const std::vector<json> grid = grid_for_variant(cfg, variant, true);
      const json criteria = {{"selection", "val_f1"}, {"task", task}, {"c", c}};
      ResultPtr best = run_grid(fit_on, grid, criteria, val.p, seed, nullptr);
      MatrixPtr estimate;
      check(cmc_result_estimate(best.p, &estimate.p), "result_estimate");
      TaskRow row;
      row.variant = variant;
      row.seed = seed;
      check(cmc_f1_task(estimate.p, test.p, task, c, &row.f1, &row.precision, &row.recall),
            "f1_task");
      results[seed_index].push_back(row);
    }
    TaskRow base;
    base.variant = "baseline";
    base.seed = seed;
    check(cmc_baseline_all_positive(test.p, task, c, &base.f1, &base.precision, &base.recall),
          "baseline");
    results[seed_index].push_back(base);
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= seeds.size()) return;
          work(i);
        }
      });
    for (std::thread& t : pool) t.join();
  }

  std::string csv = "variant,seed,f1,precision,recall\n";
  for (const auto& rows : results)
    for (const TaskRow& row : rows)
      csv += row.variant + "," + std::to_string(row.seed) + "," + fmt(row.f1) + "," +
             fmt(row.precision) + "," + fmt(row.recall) + "\n";
  write_file(dir / ("task" + std::to_string(task) + ".csv"), csv);

  // mean and standard error over the seeds
  std::map<std::string, std::vector<double>> by_variant;
  for (const auto& rows : results)
    for (const TaskRow& row : rows) by_variant[row.variant].push_back(row.f1);
  std::string summary = "variant,f1_mean,f1_se\n";
  std::string stdout_lines;
  for (const auto& [variant, f1s] : by_variant) {
    double mean = 0;
    for (double v : f1s) mean += v;
    mean /= static_cast<double>(f1s.size());
    double var = 0;
    for (double v : f1s) var += (v - mean) * (v - mean);
    const double se = f1s.size() > 1
                          ? std::sqrt(var / (static_cast<double>(f1s.size()) - 1.0)) /
                                std::sqrt(static_cast<double>(f1s.size()))
                          : 0.0;
    summary += variant + "," + fmt(mean) + "," + fmt(se) + "\n";
    stdout_lines += variant + " f1 = " + fmt(mean) + " (" + fmt(se) + ")\n";
  }
  write_file(dir / ("task" + std::to_string(task) + "_summary.csv"), summary);
  std::cout << stdout_lines;
  return 0;
}

// re-derives plot-ready long-format CSVs from run artifacts; byte-for-byte
// idempotent since inputs and formatting are fixed
int pipeline_plotdata(const json& cfg, bool dry_run) {
  const fs::path dir = cfg.value("out_dir", std::string("runs/plotdata"));
  const fs::path run = cfg.contains("run") ? fs::path(cfg["run"].get<std::string>()) : dir;
  if (dry_run) {
    std::cout << "plotdata from " << run << "\n";
    return 0;
  }
  if (!fs::exists(run)) throw CliError{kExitRuntime, "run directory missing: " + run.string()};
  bool made_any = false;
  const fs::path summary = run / "sweep_summary.csv";
  if (fs::exists(summary)) {
    std::ifstream in(summary);
    std::string line;
    std::getline(in, line);  // header
    std::string all = "x,y,series\n", nonclipped = "x,y,series\n";
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string c, rate, variant, mean_all, mean_nc;
      std::getline(fields, c, ',');
      std::getline(fields, rate, ',');
      std::getline(fields, variant, ',');
      std::getline(fields, mean_all, ',');
      std::getline(fields, mean_nc, ',');
      all += rate + "," + mean_all + "," + variant + "\n";
      nonclipped += rate + "," + mean_nc + "," + variant + "\n";
    }
    write_file(run / "fig_sweep_all_entries.csv", all);
    write_file(run / "fig_sweep_nonclipped.csv", nonclipped);
    made_any = true;
  }
  for (int task : {1, 2}) {
    const fs::path table = run / ("task" + std::to_string(task) + "_summary.csv");
    if (!fs::exists(table)) continue;
    std::ifstream in(table);
    std::string line;
    std::getline(in, line);
    std::string fig = "x,y,series\n";
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string variant, mean, se;
      std::getline(fields, variant, ',');
      std::getline(fields, mean, ',');
      std::getline(fields, se, ',');
      fig += variant + "," + mean + ",task" + std::to_string(task) + "\n";
    }
    write_file(run / ("fig_task" + std::to_string(task) + ".csv"), fig);
    made_any = true;
  }
  if (cfg.contains("dataset")) {
    ObservedPtr full = load_dataset(cfg);
    write_file(run / "histogram.csv", histogram_csv(full.p));
    made_any = true;
  } else if (fs::exists(run / "ratings_histogram.csv")) {
    made_any = true;
  }
  if (!made_any) throw CliError{kExitRuntime, "no artifacts found in " + run.string()};
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clipped matrix completion experiment driver"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are valid after the subcommand name

  std::string config_path;
  std::string out_dir;
  bool dry_run = false;
  int jobs = 1;
  app.add_option("--config", config_path, "JSON experiment config (wins over flags)");
  app.add_option("--out", out_dir, "run directory");
  app.add_flag("--dry-run", dry_run, "validate and print the resolved plan");
  app.add_option("--jobs", jobs, "parallel solve workers");

  json flags;
  std::uint64_t seed_flag = 0;
  double c_flag = 0.0;
  std::string matrix_path, dataset_kind, dataset_path, variant_flag, run_dir;
  std::vector<double> c_grid_flag;
  std::vector<std::uint64_t> seeds_flag;
  std::vector<std::string> variants_flag;
  json synth_flags = json::object();

  auto add_synth_options = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--n1", [&](std::uint64_t v) { synth_flags["n1"] = v; });
    sub->add_option_function<std::uint64_t>("--n2", [&](std::uint64_t v) { synth_flags["n2"] = v; });
    sub->add_option_function<int>("--rank", [&](int v) { synth_flags["r"] = v; });
    sub->add_option_function<int>("--magnitude", [&](int v) { synth_flags["L"] = v; });
    sub->add_option_function<double>("--p", [&](double v) { synth_flags["p"] = v; });
    sub->add_option_function<double>("--ceiling", [&](double v) { synth_flags["C"] = v; });
  };

  CLI::App* generate = app.add_subcommand("generate", "synthesize a clipped instance");
  add_synth_options(generate);
  generate->add_option("--seed", seed_flag);

  CLI::App* solve = app.add_subcommand("solve", "single solve on a synthetic instance");
  add_synth_options(solve);
  solve->add_option("--seed", seed_flag);
  solve->add_option("--variant", variant_flag);

  CLI::App* diagnose = app.add_subcommand("diagnose", "recovery diagnostics for a matrix");
  add_synth_options(diagnose);
  diagnose->add_option("--seed", seed_flag);
  diagnose->add_option("--matrix", matrix_path, "binary matrix file");
  diagnose->add_option_function<double>("--diag-ceiling",
                                        [&](double v) { flags["diagnose"] = {{"ceiling", v}}; });

  CLI::App* sweep = app.add_subcommand("sweep", "threshold sweep over synthetic instances");
  add_synth_options(sweep);
  sweep->add_option("--c-grid", c_grid_flag);
  sweep->add_option("--seeds", seeds_flag);
  sweep->add_option("--variants", variants_flag);

  CLI::App* task1 = app.add_subcommand("task1", "artificially clipped benchmark task");
  CLI::App* task2 = app.add_subcommand("task2", "scale-maximum prediction task");
  for (CLI::App* sub : {task1, task2}) {
    sub->add_option("--c", c_flag, "decision threshold");
    sub->add_option("--dataset-kind", dataset_kind);
    sub->add_option("--dataset-path", dataset_path);
    sub->add_option("--seeds", seeds_flag);
    sub->add_option("--variants", variants_flag);
  }

  CLI::App* plotdata = app.add_subcommand("plotdata", "emit plot-ready CSVs from a run directory");
  plotdata->add_option("--run", run_dir, "run directory to read");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!out_dir.empty()) flags["out_dir"] = out_dir;
    if (!synth_flags.empty()) flags["synth"] = synth_flags;
    if (generate->parsed() || solve->parsed() || diagnose->parsed())
      if (seed_flag != 0) flags["seed"] = seed_flag;
    if (!variant_flag.empty()) flags["solver"] = {{"variant", variant_flag}};
    if (!matrix_path.empty()) flags["matrix"] = matrix_path;
    if (!c_grid_flag.empty()) flags["c_grid"] = c_grid_flag;
    if (!seeds_flag.empty()) flags["seeds"] = seeds_flag;
    if (!variants_flag.empty()) flags["variants"] = variants_flag;
    if (c_flag > 0.0) flags["task"] = {{"c", c_flag}};
    if (!dataset_kind.empty() || !dataset_path.empty())
      flags["dataset"] = {{"kind", dataset_kind.empty() ? "movielens" : dataset_kind},
                          {"path", dataset_path}};
    if (!run_dir.empty()) flags["run"] = run_dir;

    json cfg = flags;
    if (!config_path.empty()) cfg = merge_config(flags, load_config_file(config_path));
    if (cfg.contains("jobs")) jobs = cfg["jobs"].get<int>();

    if (generate->parsed()) return pipeline_generate(cfg, dry_run);
    if (solve->parsed()) return pipeline_solve(cfg, dry_run);
    if (diagnose->parsed()) return pipeline_diagnose(cfg, dry_run);
    if (sweep->parsed()) return pipeline_sweep(cfg, dry_run, jobs);
    if (task1->parsed()) return pipeline_task(cfg, dry_run, jobs, 1);
    if (task2->parsed()) return pipeline_task(cfg, dry_run, jobs, 2);
    if (plotdata->parsed()) return pipeline_plotdata(cfg, dry_run);
    std::cerr << "unknown pipeline\n";
    return kExitConfig;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.exit_code;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
