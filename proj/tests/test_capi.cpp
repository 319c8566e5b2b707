#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmc.h"

using nlohmann::json;

namespace {

struct MatrixHandle {
  cmc_matrix* ptr = nullptr;
  ~MatrixHandle() { cmc_matrix_free(ptr); }
};

struct ObservedHandle {
  cmc_observed* ptr = nullptr;
  ~ObservedHandle() { cmc_observed_free(ptr); }
};

struct ResultHandle {
  cmc_result* ptr = nullptr;
  ~ResultHandle() { cmc_result_free(ptr); }
};

}  // namespace

TEST_CASE("matrix handles round-trip data and files") {
  const std::vector<double> data = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  MatrixHandle m;
  REQUIRE(cmc_matrix_create(2, 3, data.data(), &m.ptr) == CMC_OK);
  uint64_t rows = 0, cols = 0;
  REQUIRE(cmc_matrix_dims(m.ptr, &rows, &cols) == CMC_OK);
  CHECK(rows == 2);
  CHECK(cols == 3);
  std::vector<double> back(6);
  REQUIRE(cmc_matrix_copy_data(m.ptr, back.data()) == CMC_OK);
  CHECK(back == data);

  REQUIRE(cmc_matrix_write(m.ptr, "capi_roundtrip.bin") == CMC_OK);
  MatrixHandle loaded;
  REQUIRE(cmc_matrix_read("capi_roundtrip.bin", &loaded.ptr) == CMC_OK);
  std::vector<double> again(6);
  REQUIRE(cmc_matrix_copy_data(loaded.ptr, again.data()) == CMC_OK);
  CHECK(again == data);
  std::remove("capi_roundtrip.bin");
}

TEST_CASE("null arguments produce error codes and messages") {
  CHECK(cmc_matrix_create(2, 2, nullptr, nullptr) == CMC_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(cmc_last_error()) > 0);
  MatrixHandle m;
  CHECK(cmc_matrix_read("no_such_file.bin", &m.ptr) == CMC_ERR_IO);
}

TEST_CASE("non-finite matrix data is rejected through the C surface") {
  const double bad[4] = {1.0, 2.0, std::numeric_limits<double>::infinity(), 4.0};
  cmc_matrix* out = nullptr;
  CHECK(cmc_matrix_create(2, 2, bad, &out) == CMC_ERR_INVALID_ARGUMENT);
  CHECK(out == nullptr);
}

TEST_CASE("observed handles validate and transform") {
  const uint64_t ri[3] = {0, 0, 1};
  const uint64_t ci[3] = {0, 1, 1};
  const double values[3] = {5.0, 3.0, 5.0};
  ObservedHandle obs;
  REQUIRE(cmc_observed_create(2, 2, 3, ri, ci, values, 1, 5.0, 0, 0.0, &obs.ptr) == CMC_OK);
  size_t n = 0;
  REQUIRE(cmc_observed_count(obs.ptr, &n) == CMC_OK);
  CHECK(n == 3);

  ObservedHandle dropped;
  REQUIRE(cmc_observed_drop_clipped(obs.ptr, &dropped.ptr) == CMC_OK);
  REQUIRE(cmc_observed_count(dropped.ptr, &n) == CMC_OK);
  CHECK(n == 1);

  ObservedHandle below;
  REQUIRE(cmc_observed_filter_below(obs.ptr, 5.0, &below.ptr) == CMC_OK);
  REQUIRE(cmc_observed_count(below.ptr, &n) == CMC_OK);
  CHECK(n == 1);

  // value above the ceiling: invalid observations
  const double bad_values[1] = {6.0};
  cmc_observed* bad = nullptr;
  CHECK(cmc_observed_create(2, 2, 1, ri, ci, bad_values, 1, 5.0, 0, 0.0, &bad) ==
        CMC_ERR_INVALID_ARGUMENT);
}

TEST_CASE("clipping through the C surface attaches the threshold") {
  const uint64_t ri[2] = {0, 1};
  const uint64_t ci[2] = {0, 1};
  const double values[2] = {9.0, 2.0};
  ObservedHandle raw;
  REQUIRE(cmc_observed_create(2, 2, 2, ri, ci, values, 0, 0.0, 0, 0.0, &raw.ptr) == CMC_OK);
  ObservedHandle clipped;
  REQUIRE(cmc_observed_clip(raw.ptr, 5.0, &clipped.ptr) == CMC_OK);
  std::vector<uint64_t> ro(2), co(2);
  std::vector<double> vo(2);
  REQUIRE(cmc_observed_copy(clipped.ptr, ro.data(), co.data(), vo.data()) == CMC_OK);
  CHECK(vo[0] == 5.0);
  CHECK(vo[1] == 2.0);
  ObservedHandle dropped;
  REQUIRE(cmc_observed_drop_clipped(clipped.ptr, &dropped.ptr) == CMC_OK);
  size_t n = 0;
  cmc_observed_count(dropped.ptr, &n);
  CHECK(n == 1);
}

TEST_CASE("the full generate-solve-evaluate loop works over the C surface") {
  MatrixHandle m;
  ObservedHandle train, val, test;
  double clipping_rate = -1.0;
  REQUIRE(cmc_generate_synthetic(20, 25, 2, 12, 0.8, 8.0, 3, &m.ptr, &train.ptr, &val.ptr,
                                 &test.ptr, &clipping_rate) == CMC_OK);
  CHECK(clipping_rate >= 0.0);

  const json cfg = {{"variant", "Fro-CMC"}, {"lambda1", 0.01}, {"rank_k", 3},
                    {"max_iter", 150},      {"tol", 1e-10}};
  ResultHandle result;
  REQUIRE(cmc_solve(train.ptr, cfg.dump().c_str(), &result.ptr) == CMC_OK);
  int iterations = 0, converged = 0, best = -1;
  REQUIRE(cmc_result_stats(result.ptr, &iterations, &converged, &best) == CMC_OK);
  CHECK(iterations >= 1);

  MatrixHandle estimate;
  REQUIRE(cmc_result_estimate(result.ptr, &estimate.ptr) == CMC_OK);
  double err = -1.0;
  REQUIRE(cmc_rel_rmse_all(estimate.ptr, m.ptr, &err) == CMC_OK);
  CHECK(err < 0.5);

  double rmse = -1.0;
  REQUIRE(cmc_rel_rmse(estimate.ptr, val.ptr, 1, 8.0, &rmse) == CMC_OK);
  CHECK(rmse >= 0.0);

  double f1 = -1.0, precision = -1.0, recall = -1.0;
  REQUIRE(cmc_f1_task(estimate.ptr, test.ptr, 1, 8.0, &f1, &precision, &recall) == CMC_OK);
  CHECK(f1 >= 0.0);
  CHECK(f1 <= 1.0);
  REQUIRE(cmc_baseline_all_positive(test.ptr, 1, 8.0, &f1, &precision, &recall) == CMC_OK);
  CHECK(recall == 1.0);

  char* csv = nullptr;
  REQUIRE(cmc_result_trace_csv(result.ptr, &csv) == CMC_OK);
  CHECK(std::string(csv).find("iteration,objective") == 0);
  cmc_string_free(csv);
}

TEST_CASE("bad solver configs surface as invalid-argument errors") {
  const uint64_t ri[1] = {0};
  const uint64_t ci[1] = {0};
  const double values[1] = {1.0};
  ObservedHandle obs;
  REQUIRE(cmc_observed_create(2, 2, 1, ri, ci, values, 0, 0.0, 0, 0.0, &obs.ptr) == CMC_OK);
  cmc_result* out = nullptr;
  CHECK(cmc_solve(obs.ptr, "{\"variant\":\"Nope\"}", &out) == CMC_ERR_INVALID_ARGUMENT);
  CHECK(cmc_solve(obs.ptr, "{\"variant\":\"Fro-MC\",\"wat\":1}", &out) ==
        CMC_ERR_INVALID_ARGUMENT);
  CHECK(cmc_solve(obs.ptr, "not json", &out) == CMC_ERR_INVALID_ARGUMENT);
  CHECK(out == nullptr);
}

TEST_CASE("preset grids are served as JSON") {
  char* text = nullptr;
  REQUIRE(cmc_preset_grid("fro-synthetic", &text) == CMC_OK);
  const json grid = json::parse(text);
  CHECK(grid.size() == 32);
  CHECK(grid[0]["variant"] == "Fro-CMC");
  cmc_string_free(text);
  CHECK(cmc_preset_grid("nope", &text) == CMC_ERR_INVALID_ARGUMENT);
}

TEST_CASE("grid search over the C surface returns a table") {
  MatrixHandle m;
  ObservedHandle train, val, test;
  double rate = 0.0;
  REQUIRE(cmc_generate_synthetic(15, 18, 2, 10, 0.8, 7.0, 11, &m.ptr, &train.ptr, &val.ptr,
                                 &test.ptr, &rate) == CMC_OK);
  const json grid = json::array({{{"variant", "Fro-CMC"}, {"lambda1", 0.01}, {"rank_k", 3},
                                  {"max_iter", 80}, {"tol", 1e-9}},
                                 {{"variant", "Fro-CMC"}, {"lambda1", 1.0}, {"rank_k", 3},
                                  {"max_iter", 80}, {"tol", 1e-9}}});
  const json criteria = {{"selection", "val_rel_rmse_clipped"}, {"ceiling", 7.0}};
  ResultHandle best;
  char* table = nullptr;
  REQUIRE(cmc_grid_search(train.ptr, grid.dump().c_str(), criteria.dump().c_str(), val.ptr, 0,
                          &best.ptr, &table) == CMC_OK);
  CHECK(std::string(table).find("config_id") == 0);
  cmc_string_free(table);
}

TEST_CASE("diagnostics reports arrive as JSON") {
  MatrixHandle m;
  ObservedHandle train, val, test;
  double rate = 0.0;
  REQUIRE(cmc_generate_synthetic(10, 12, 2, 10, 1.0, 7.0, 5, &m.ptr, &train.ptr, &val.ptr,
                                 &test.ptr, &rate) == CMC_OK);
  char* report_text = nullptr;
  const json opts = {{"ceiling", 7.0}, {"rho_samples", 20}, {"rho_ascent", 10}};
  REQUIRE(cmc_diagnose(m.ptr, opts.dump().c_str(), &report_text) == CMC_OK);
  const json report = json::parse(report_text);
  CHECK(report.contains("mu0"));
  CHECK(report.contains("rho_fro"));
  CHECK(report["rho_is_lower_bound"] == true);
  CHECK(report.contains("nu_b"));
  cmc_string_free(report_text);
}

TEST_CASE("dataset loading and pruning over the C surface") {
  {
    std::FILE* f = std::fopen("capi_ml.tsv", "w");
    std::fputs("1\t1\t5\t1\n2\t2\t3\t2\n", f);
    std::fclose(f);
  }
  ObservedHandle obs;
  REQUIRE(cmc_load_movielens("capi_ml.tsv", &obs.ptr) == CMC_OK);
  size_t n = 0;
  cmc_observed_count(obs.ptr, &n);
  CHECK(n == 2);
  std::remove("capi_ml.tsv");

  ObservedHandle tr, va, te;
  REQUIRE(cmc_observed_split(obs.ptr, 0.5, 0.25, 0.25, 1, &tr.ptr, &va.ptr, &te.ptr) == CMC_OK);
  ObservedHandle ptr_, pva, pte;
  REQUIRE(cmc_prune_empty(tr.ptr, va.ptr, te.ptr, &ptr_.ptr, &pva.ptr, &pte.ptr) == CMC_OK);

  char* urls = nullptr;
  REQUIRE(cmc_dataset_urls(&urls) == CMC_OK);
  CHECK(std::string(urls).find("ml-100k") != std::string::npos);
  cmc_string_free(urls);
}
