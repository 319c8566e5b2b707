/* C interface to the clipped matrix completion library.
 *
 * All functions return CMC_OK (0) on success or a CMC_ERR_* code; on failure
 * cmc_last_error() returns a thread-local description. Handles are opaque and
 * owned by the caller: release them with the matching *_free function.
 * Strings produced by the library are released with cmc_string_free.
 *
 * Structured inputs and outputs (solver configs, grids, diagnostics reports)
 * travel as JSON text; see README for the schema.
 */
#ifndef CMC_H
#define CMC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CMC_API __declspec(dllexport)
#else
#define CMC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define CMC_OK 0
#define CMC_ERR_INVALID_ARGUMENT 1
#define CMC_ERR_NUMERIC 2
#define CMC_ERR_IO 3
#define CMC_ERR_UNSUPPORTED 4

typedef struct cmc_matrix cmc_matrix;
typedef struct cmc_observed cmc_observed;
typedef struct cmc_result cmc_result;

CMC_API const char* cmc_version(void);
CMC_API const char* cmc_last_error(void);
CMC_API void cmc_string_free(char* s);

/* --- dense matrices --- */
CMC_API int cmc_matrix_create(uint64_t rows, uint64_t cols, const double* row_major,
                              cmc_matrix** out);
CMC_API int cmc_matrix_dims(const cmc_matrix* m, uint64_t* rows, uint64_t* cols);
CMC_API int cmc_matrix_copy_data(const cmc_matrix* m, double* row_major_out);
CMC_API int cmc_matrix_read(const char* path, cmc_matrix** out);
CMC_API int cmc_matrix_write(const cmc_matrix* m, const char* path);
CMC_API void cmc_matrix_free(cmc_matrix* m);

/* --- observed entries --- */
CMC_API int cmc_observed_create(uint64_t rows, uint64_t cols, size_t n, const uint64_t* row_idx,
                                const uint64_t* col_idx, const double* values, int has_ceiling,
                                double ceiling, int has_floor, double floor_value,
                                cmc_observed** out);
CMC_API int cmc_observed_count(const cmc_observed* obs, size_t* n);
CMC_API int cmc_observed_dims(const cmc_observed* obs, uint64_t* rows, uint64_t* cols);
CMC_API int cmc_observed_copy(const cmc_observed* obs, uint64_t* row_idx, uint64_t* col_idx,
                              double* values);
/* clip the stored values at `ceiling` and attach it as the threshold */
CMC_API int cmc_observed_clip(const cmc_observed* obs, double ceiling, cmc_observed** out);
CMC_API int cmc_observed_filter_below(const cmc_observed* obs, double threshold,
                                      cmc_observed** out);
CMC_API int cmc_observed_drop_clipped(const cmc_observed* obs, cmc_observed** out);
CMC_API int cmc_observed_split(const cmc_observed* obs, double r_train, double r_val,
                               double r_test, uint64_t seed, cmc_observed** train,
                               cmc_observed** val, cmc_observed** test);
CMC_API void cmc_observed_free(cmc_observed* obs);

/* --- data generation and ingestion --- */
CMC_API int cmc_generate_synthetic(uint64_t n1, uint64_t n2, int r, int magnitude, double p,
                                   double ceiling, uint64_t seed, cmc_matrix** m,
                                   cmc_observed** train, cmc_observed** val, cmc_observed** test,
                                   double* clipping_rate);
CMC_API int cmc_load_movielens(const char* path, cmc_observed** out);
CMC_API int cmc_load_filmtrust(const char* path, int double_ratings, cmc_observed** out);
CMC_API int cmc_prune_empty(const cmc_observed* train, const cmc_observed* val,
                            const cmc_observed* test, cmc_observed** train_out,
                            cmc_observed** val_out, cmc_observed** test_out);
CMC_API int cmc_dataset_urls(char** text_out);

/* --- solving --- */
CMC_API int cmc_solve(const cmc_observed* obs, const char* config_json, cmc_result** out);
CMC_API int cmc_result_estimate(const cmc_result* result, cmc_matrix** out);
CMC_API int cmc_result_stats(const cmc_result* result, int* iterations, int* converged,
                             int* best_index);
CMC_API int cmc_result_trace_csv(const cmc_result* result, char** csv_out);
CMC_API void cmc_result_free(cmc_result* result);
/* "dtr", "fro-synthetic", "fro-real" or "tr-real"; returns a JSON array of configs */
CMC_API int cmc_preset_grid(const char* name, char** json_out);

/* --- evaluation --- */
CMC_API int cmc_rel_rmse(const cmc_matrix* estimate, const cmc_observed* truth, int clip_both,
                         double ceiling, double* out);
CMC_API int cmc_rel_rmse_all(const cmc_matrix* estimate, const cmc_matrix* truth, double* out);
CMC_API int cmc_f1_task(const cmc_matrix* estimate, const cmc_observed* test, int task, double c,
                        double* f1, double* precision, double* recall);
CMC_API int cmc_baseline_all_positive(const cmc_observed* test, int task, double c, double* f1,
                                      double* precision, double* recall);
/* criteria_json: {"selection":"val_rel_rmse_clipped"|"val_f1","ceiling":C,"task":1|2,"c":C} */
CMC_API int cmc_grid_search(const cmc_observed* train, const char* grid_json,
                            const char* criteria_json, const cmc_observed* val, uint64_t seed,
                            cmc_result** best, char** table_csv);

/* --- diagnostics ---
 * options_json: {"ceiling":C, "floor":F?, "rho_samples":N, "rho_ascent":K,
 *                "beta":B, "seed":S, "nu_b":true|false}
 * The report includes coherence stats, the rho lower-bound estimates, nu_b
 * when requested and small enough, and the sampling-bound terms when every
 * recovery condition holds.
 */
CMC_API int cmc_diagnose(const cmc_matrix* m, const char* options_json, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* CMC_H */
