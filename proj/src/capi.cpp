#include "cmc.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include <json.hpp>

#include "cmc/datagen.hpp"
#include "cmc/datasets.hpp"
#include "cmc/diagnostics.hpp"
#include "cmc/error.hpp"
#include "cmc/eval.hpp"
#include "cmc/solvers.hpp"

using nlohmann::json;

struct cmc_matrix {
  cmc::Matrix m;
};
struct cmc_observed {
  cmc::ObservedEntries obs;
};
struct cmc_result {
  cmc::SolveResult result;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& what) {
  g_last_error = what;
  return code;
}

int code_of(const cmc::Error& e) {
  switch (e.code()) {
    case cmc::Errc::invalid_argument: return CMC_ERR_INVALID_ARGUMENT;
    case cmc::Errc::numeric_failure: return CMC_ERR_NUMERIC;
    case cmc::Errc::io_failure: return CMC_ERR_IO;
    case cmc::Errc::unsupported: return CMC_ERR_UNSUPPORTED;
  }
  return CMC_ERR_NUMERIC;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return CMC_OK;
  } catch (const cmc::Error& e) {
    return set_error(code_of(e), e.what());
  } catch (const json::exception& e) {
    return set_error(CMC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CMC_ERR_NUMERIC, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CMC_ERR_NUMERIC, e.what());
  }
}

int require(bool ok, const char* what) {
  if (ok) return CMC_OK;
  return set_error(CMC_ERR_INVALID_ARGUMENT, std::string("null or invalid argument: ") + what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

cmc::SolverConfig config_from_json(const json& j) {
  cmc::SolverConfig cfg;
  if (!j.is_object()) cmc::fail(cmc::Errc::invalid_argument, "solver config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "variant")
      cfg.variant = cmc::variant_from_string(value.get<std::string>());
    else if (key == "lambda1")
      cfg.lambda1 = value.get<double>();
    else if (key == "lambda2")
      cfg.lambda2 = value.get<double>();
    else if (key == "rank_k")
      cfg.rank_k = value.get<int>();
    else if (key == "max_iter")
      cfg.max_iter = value.get<int>();
    else if (key == "eta0")
      cfg.eta0 = value.get<double>();
    else if (key == "step_decay")
      cfg.step_decay = value.get<double>();
    else if (key == "sv_floor")
      cfg.sv_floor = value.get<double>();
    else if (key == "admm_rho")
      cfg.admm_rho = value.get<double>();
    else if (key == "tol")
      cfg.tol = value.get<double>();
    else if (key == "seed")
      cfg.seed = value.get<std::uint64_t>();
    else if (key == "continuation")
      cfg.continuation = value.get<double>();
    else if (key == "tr_monotone")
      cfg.tr_monotone = value.get<bool>();
    else if (key == "tr_linesearch")
      cfg.tr_linesearch = value.get<bool>();
    else if (key == "fro_literal_init")
      cfg.fro_literal_init = value.get<bool>();
    else if (key == "fro_consistent_q")
      cfg.fro_consistent_q = value.get<bool>();
    else
      cmc::fail(cmc::Errc::invalid_argument, "unknown solver config field: " + key);
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const cmc::SolverConfig& cfg) {
  return json{{"variant", cmc::to_string(cfg.variant)},
              {"lambda1", cfg.lambda1},
              {"lambda2", cfg.lambda2},
              {"rank_k", cfg.rank_k},
              {"max_iter", cfg.max_iter},
              {"eta0", cfg.eta0},
              {"step_decay", cfg.step_decay},
              {"sv_floor", cfg.sv_floor},
              {"admm_rho", cfg.admm_rho},
              {"tol", cfg.tol},
              {"seed", cfg.seed},
              {"continuation", cfg.continuation},
              {"tr_monotone", cfg.tr_monotone},
              {"tr_linesearch", cfg.tr_linesearch},
              {"fro_literal_init", cfg.fro_literal_init},
              {"fro_consistent_q", cfg.fro_consistent_q}};
}

}  // namespace

extern "C" {

const char* cmc_version(void) { return "0.1.0"; }

const char* cmc_last_error(void) { return g_last_error.c_str(); }

void cmc_string_free(char* s) { delete[] s; }

int cmc_matrix_create(uint64_t rows, uint64_t cols, const double* row_major, cmc_matrix** out) {
  if (int rc = require(row_major && out && rows > 0 && cols > 0, "cmc_matrix_create")) return rc;
  return guarded([&] {
    cmc::Matrix m(static_cast<cmc::Index>(rows), static_cast<cmc::Index>(cols));
    for (uint64_t i = 0; i < rows; ++i)
      for (uint64_t j = 0; j < cols; ++j) m(i, j) = row_major[i * cols + j];
    cmc::require_finite(m, "cmc_matrix_create");
    *out = new cmc_matrix{std::move(m)};
  });
}

int cmc_matrix_dims(const cmc_matrix* m, uint64_t* rows, uint64_t* cols) {
  if (int rc = require(m && rows && cols, "cmc_matrix_dims")) return rc;
  *rows = static_cast<uint64_t>(m->m.rows());
  *cols = static_cast<uint64_t>(m->m.cols());
  return CMC_OK;
}

int cmc_matrix_copy_data(const cmc_matrix* m, double* row_major_out) {
  if (int rc = require(m && row_major_out, "cmc_matrix_copy_data")) return rc;
  const auto cols = static_cast<uint64_t>(m->m.cols());
  for (cmc::Index i = 0; i < m->m.rows(); ++i)
    for (cmc::Index j = 0; j < m->m.cols(); ++j) row_major_out[i * cols + j] = m->m(i, j);
  return CMC_OK;
}

int cmc_matrix_read(const char* path, cmc_matrix** out) {
  if (int rc = require(path && out, "cmc_matrix_read")) return rc;
  return guarded([&] { *out = new cmc_matrix{cmc::load_matrix(path)}; });
}

int cmc_matrix_write(const cmc_matrix* m, const char* path) {
  if (int rc = require(m && path, "cmc_matrix_write")) return rc;
  return guarded([&] { cmc::save_matrix(path, m->m); });
}

void cmc_matrix_free(cmc_matrix* m) { delete m; }

int cmc_observed_create(uint64_t rows, uint64_t cols, size_t n, const uint64_t* row_idx,
                        const uint64_t* col_idx, const double* values, int has_ceiling,
                        double ceiling, int has_floor, double floor_value, cmc_observed** out) {
  if (int rc = require(out && (n == 0 || (row_idx && col_idx && values)), "cmc_observed_create"))
    return rc;
  return guarded([&] {
    std::vector<cmc::Observation> triples;
    triples.reserve(n);
    for (size_t k = 0; k < n; ++k)
      triples.push_back({static_cast<cmc::Index>(row_idx[k]), static_cast<cmc::Index>(col_idx[k]),
                         values[k]});
    cmc::ClipSpec spec;
    if (has_ceiling) spec.ceiling = ceiling;
    if (has_floor) spec.floor = floor_value;
    *out = new cmc_observed{cmc::ObservedEntries(static_cast<cmc::Index>(rows),
                                                 static_cast<cmc::Index>(cols), std::move(triples),
                                                 std::move(spec))};
  });
}

int cmc_observed_count(const cmc_observed* obs, size_t* n) {
  if (int rc = require(obs && n, "cmc_observed_count")) return rc;
  *n = obs->obs.size();
  return CMC_OK;
}

int cmc_observed_dims(const cmc_observed* obs, uint64_t* rows, uint64_t* cols) {
  if (int rc = require(obs && rows && cols, "cmc_observed_dims")) return rc;
  *rows = static_cast<uint64_t>(obs->obs.rows());
  *cols = static_cast<uint64_t>(obs->obs.cols());
  return CMC_OK;
}

int cmc_observed_copy(const cmc_observed* obs, uint64_t* row_idx, uint64_t* col_idx,
                      double* values) {
  if (int rc = require(obs && row_idx && col_idx && values, "cmc_observed_copy")) return rc;
  size_t k = 0;
  for (const cmc::Observation& t : obs->obs.triples()) {
    row_idx[k] = static_cast<uint64_t>(t.row);
    col_idx[k] = static_cast<uint64_t>(t.col);
    values[k] = t.value;
    ++k;
  }
  return CMC_OK;
}

int cmc_observed_clip(const cmc_observed* obs, double ceiling, cmc_observed** out) {
  if (int rc = require(obs && out, "cmc_observed_clip")) return rc;
  return guarded([&] {
    std::vector<cmc::Observation> triples = obs->obs.triples();
    for (cmc::Observation& t : triples) t.value = std::min(t.value, ceiling);
    cmc::ClipSpec spec = obs->obs.spec();
    spec.ceiling = ceiling;
    spec.ceiling_per_entry.reset();
    *out = new cmc_observed{
        cmc::ObservedEntries(obs->obs.rows(), obs->obs.cols(), std::move(triples), std::move(spec))};
  });
}

int cmc_observed_filter_below(const cmc_observed* obs, double threshold, cmc_observed** out) {
  if (int rc = require(obs && out, "cmc_observed_filter_below")) return rc;
  return guarded([&] { *out = new cmc_observed{cmc::filter_below(obs->obs, threshold)}; });
}

int cmc_observed_drop_clipped(const cmc_observed* obs, cmc_observed** out) {
  if (int rc = require(obs && out, "cmc_observed_drop_clipped")) return rc;
  return guarded([&] { *out = new cmc_observed{cmc::drop_clipped(obs->obs)}; });
}

int cmc_observed_split(const cmc_observed* obs, double r_train, double r_val, double r_test,
                       uint64_t seed, cmc_observed** train, cmc_observed** val,
                       cmc_observed** test) {
  if (int rc = require(obs && train && val && test, "cmc_observed_split")) return rc;
  return guarded([&] {
    cmc::SplitResult split = cmc::split_entries(obs->obs, {r_train, r_val, r_test}, seed);
    *train = new cmc_observed{std::move(split.train)};
    *val = new cmc_observed{std::move(split.val)};
    *test = new cmc_observed{std::move(split.test)};
  });
}

void cmc_observed_free(cmc_observed* obs) { delete obs; }

int cmc_generate_synthetic(uint64_t n1, uint64_t n2, int r, int magnitude, double p,
                           double ceiling, uint64_t seed, cmc_matrix** m, cmc_observed** train,
                           cmc_observed** val, cmc_observed** test, double* clipping_rate) {
  if (int rc = require(m && train && val && test && clipping_rate, "cmc_generate_synthetic"))
    return rc;
  return guarded([&] {
    cmc::SynthSpec spec;
    spec.n1 = static_cast<cmc::Index>(n1);
    spec.n2 = static_cast<cmc::Index>(n2);
    spec.r = r;
    spec.magnitude = magnitude;
    spec.p = p;
    spec.ceiling = ceiling;
    spec.seed = seed;
    cmc::SynthInstance inst = cmc::generate_synthetic(spec);
    *m = new cmc_matrix{std::move(inst.m)};
    *train = new cmc_observed{std::move(inst.train)};
    *val = new cmc_observed{std::move(inst.val)};
    *test = new cmc_observed{std::move(inst.test)};
    *clipping_rate = inst.clipping_rate;
  });
}

int cmc_load_movielens(const char* path, cmc_observed** out) {
  if (int rc = require(path && out, "cmc_load_movielens")) return rc;
  return guarded([&] { *out = new cmc_observed{cmc::load_movielens(path)}; });
}

int cmc_load_filmtrust(const char* path, int double_ratings, cmc_observed** out) {
  if (int rc = require(path && out, "cmc_load_filmtrust")) return rc;
  return guarded([&] { *out = new cmc_observed{cmc::load_filmtrust(path, double_ratings != 0)}; });
}

int cmc_prune_empty(const cmc_observed* train, const cmc_observed* val, const cmc_observed* test,
                    cmc_observed** train_out, cmc_observed** val_out, cmc_observed** test_out) {
  if (int rc = require(train && val && test && train_out && val_out && test_out, "cmc_prune_empty"))
    return rc;
  return guarded([&] {
    cmc::PruneResult pruned = cmc::prune_empty(train->obs, val->obs, test->obs);
    *train_out = new cmc_observed{std::move(pruned.train)};
    *val_out = new cmc_observed{std::move(pruned.val)};
    *test_out = new cmc_observed{std::move(pruned.test)};
  });
}

int cmc_dataset_urls(char** text_out) {
  if (int rc = require(text_out != nullptr, "cmc_dataset_urls")) return rc;
  *text_out = dup_string(cmc::dataset_urls());
  return CMC_OK;
}

int cmc_solve(const cmc_observed* obs, const char* config_json, cmc_result** out) {
  if (int rc = require(obs && config_json && out, "cmc_solve")) return rc;
  return guarded([&] {
    cmc::SolverConfig cfg = config_from_json(json::parse(config_json));
    *out = new cmc_result{cmc::solve(obs->obs, cfg)};
  });
}

int cmc_result_estimate(const cmc_result* result, cmc_matrix** out) {
  if (int rc = require(result && out, "cmc_result_estimate")) return rc;
  return guarded([&] { *out = new cmc_matrix{result->result.estimate}; });
}

int cmc_result_stats(const cmc_result* result, int* iterations, int* converged, int* best_index) {
  if (int rc = require(result != nullptr, "cmc_result_stats")) return rc;
  if (iterations) *iterations = result->result.iterations_used;
  if (converged) *converged = result->result.converged ? 1 : 0;
  if (best_index) *best_index = result->result.best_iterate_index;
  return CMC_OK;
}

int cmc_result_trace_csv(const cmc_result* result, char** csv_out) {
  if (int rc = require(result && csv_out, "cmc_result_trace_csv")) return rc;
  return guarded([&] { *csv_out = dup_string(cmc::objective_trace_csv(result->result)); });
}

void cmc_result_free(cmc_result* result) { delete result; }

int cmc_preset_grid(const char* name, char** json_out) {
  if (int rc = require(name && json_out, "cmc_preset_grid")) return rc;
  return guarded([&] {
    json grid = json::array();
    for (const cmc::SolverConfig& cfg : cmc::preset_grid(name)) grid.push_back(config_to_json(cfg));
    *json_out = dup_string(grid.dump());
  });
}

int cmc_rel_rmse(const cmc_matrix* estimate, const cmc_observed* truth, int clip_both,
                 double ceiling, double* out) {
  if (int rc = require(estimate && truth && out, "cmc_rel_rmse")) return rc;
  return guarded([&] {
    cmc::ClipSpec spec;
    if (clip_both) spec.ceiling = ceiling;
    *out = cmc::rel_rmse(estimate->m, truth->obs, clip_both != 0, spec);
  });
}

int cmc_rel_rmse_all(const cmc_matrix* estimate, const cmc_matrix* truth, double* out) {
  if (int rc = require(estimate && truth && out, "cmc_rel_rmse_all")) return rc;
  return guarded([&] { *out = cmc::rel_rmse_all(estimate->m, truth->m); });
}

int cmc_f1_task(const cmc_matrix* estimate, const cmc_observed* test, int task, double c,
                double* f1, double* precision, double* recall) {
  if (int rc = require(estimate && test, "cmc_f1_task")) return rc;
  return guarded([&] {
    cmc::F1Score s = cmc::f1_task(estimate->m, test->obs, task, c);
    if (f1) *f1 = s.f1;
    if (precision) *precision = s.precision;
    if (recall) *recall = s.recall;
  });
}

int cmc_baseline_all_positive(const cmc_observed* test, int task, double c, double* f1,
                              double* precision, double* recall) {
  if (int rc = require(test != nullptr, "cmc_baseline_all_positive")) return rc;
  return guarded([&] {
    cmc::F1Score s = cmc::baseline_all_positive(test->obs, task, c);
    if (f1) *f1 = s.f1;
    if (precision) *precision = s.precision;
    if (recall) *recall = s.recall;
  });
}

int cmc_grid_search(const cmc_observed* train, const char* grid_json, const char* criteria_json,
                    const cmc_observed* val, uint64_t seed, cmc_result** best, char** table_csv) {
  if (int rc = require(train && grid_json && criteria_json && val && best, "cmc_grid_search"))
    return rc;
  return guarded([&] {
    std::vector<cmc::SolverConfig> grid;
    for (const json& j : json::parse(grid_json)) grid.push_back(config_from_json(j));
    const json jc = json::parse(criteria_json);
    cmc::GridCriteria criteria;
    const std::string selection = jc.value("selection", "val_rel_rmse_clipped");
    if (selection == "val_rel_rmse_clipped")
      criteria.selection = cmc::Selection::val_rel_rmse_clipped;
    else if (selection == "val_f1")
      criteria.selection = cmc::Selection::val_f1;
    else
      cmc::fail(cmc::Errc::invalid_argument, "unknown selection: " + selection);
    if (jc.contains("ceiling")) criteria.clip.ceiling = jc["ceiling"].get<double>();
    criteria.task = jc.value("task", 2);
    criteria.c = jc.value("c", 0.0);
    cmc::GridResult result = cmc::grid_search(train->obs, grid, criteria, val->obs, seed);
    *best = new cmc_result{std::move(result.best)};
    if (table_csv) *table_csv = dup_string(cmc::grid_table_csv(result));
  });
}

int cmc_diagnose(const cmc_matrix* m, const char* options_json, char** report_json) {
  if (int rc = require(m && options_json && report_json, "cmc_diagnose")) return rc;
  return guarded([&] {
    const json opts = json::parse(options_json);
    cmc::ClipSpec spec;
    if (opts.contains("ceiling")) spec.ceiling = opts["ceiling"].get<double>();
    if (opts.contains("floor")) spec.floor = opts["floor"].get<double>();
    if (spec.empty()) cmc::fail(cmc::Errc::invalid_argument, "cmc_diagnose: threshold required");
    const int samples = opts.value("rho_samples", 100);
    const int ascent = opts.value("rho_ascent", 50);
    const double beta = opts.value("beta", 3.0);
    const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
    const bool want_nu_b = opts.value("nu_b", true);

    json report;
    cmc::CoherenceStats stats = cmc::coherence(m->m);
    report["mu0"] = stats.mu0;
    report["mu1"] = stats.mu1;
    report["mu_unnorm"] = stats.mu_unnorm;
    report["rank"] = stats.rank;
    const double rho_fro = cmc::estimate_rho(m->m, spec, cmc::RhoNorm::fro, samples, ascent, seed);
    const double rho_inf =
        cmc::estimate_rho(m->m, spec, cmc::RhoNorm::inf, samples, ascent, seed + 1);
    const double rho_op = cmc::estimate_rho(m->m, spec, cmc::RhoNorm::op, samples, ascent, seed + 2);
    report["rho_fro"] = rho_fro;
    report["rho_inf"] = rho_inf;
    report["rho_op"] = rho_op;
    report["rho_is_lower_bound"] = true;
    double nu_b = -1.0;
    if (want_nu_b && m->m.rows() * m->m.cols() <= 4096) {
      nu_b = cmc::compute_nu_b(m->m, spec);
      report["nu_b"] = nu_b;
    }
    if (nu_b >= 0.0) {
      try {
        cmc::PminTerms terms = cmc::evaluate_pmin(m->m.rows(), m->m.cols(), stats.rank, stats.mu0,
                                                  stats.mu1, rho_fro, rho_inf, rho_op, nu_b, beta);
        report["pmin"] = {{"p_fro", terms.p_fro},   {"p_op1", terms.p_op1},
                          {"p_op2", terms.p_op2},   {"p_inf", terms.p_inf},
                          {"p_main", terms.p_main}, {"k0", terms.k0},
                          {"p_min", terms.p_min},   {"failure_prob", terms.failure_prob},
                          {"beta", beta}};
      } catch (const cmc::Error& e) {
        report["pmin_error"] = e.what();
      }
    }
    *report_json = dup_string(report.dump(2));
  });
}

}  // extern "C"
