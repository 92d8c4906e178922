/* C interface to the utilimax library. Every call returns a um_status; on
 * failure um_last_error() describes the problem for the calling thread.
 * Strings returned through char** outputs are owned by the caller and must
 * be released with um_string_free(). */
#ifndef UTILIMAX_H
#define UTILIMAX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define UM_API __declspec(dllexport)
#else
#define UM_API __attribute__((visibility("default")))
#endif

typedef enum um_status {
    UM_OK = 0,
    UM_ERR_INVALID_ARGUMENT = 1,
    UM_ERR_IO = 2,
    UM_ERR_PARSE = 3,
    UM_ERR_VALIDATION = 4,
    UM_ERR_INTRACTABLE = 5,
    UM_ERR_JOINT_TOO_LARGE = 6,
    UM_ERR_ESTIMATE = 7,
    UM_ERR_CONFIG = 8,
    UM_ERR_PROVIDER = 9,
    UM_ERR_DATA = 10,
    UM_ERR_INTERNAL = 11
} um_status;

typedef struct um_diagram um_diagram;

/* Message of the last failed call on this thread; "" when none. */
UM_API const char* um_last_error(void);
UM_API const char* um_status_name(um_status status);
UM_API void um_string_free(char* s);

UM_API um_status um_diagram_parse(const char* text, um_diagram** out);
UM_API um_status um_diagram_load(const char* path, um_diagram** out);
UM_API void um_diagram_free(um_diagram* d);

/* *ok is 1 when the diagram passes every structural rule. report holds one
 * "rule: message" line per violation (empty when ok). */
UM_API um_status um_diagram_validate(const um_diagram* d, int* ok, char** report);
/* Fails with UM_ERR_VALIDATION on a structurally invalid diagram. */
UM_API um_status um_diagram_classify(const um_diagram* d, char** tag, char** detail);
UM_API um_status um_diagram_fingerprint(const um_diagram* d, char** out);
UM_API um_status um_diagram_to_dot(const um_diagram* d, char** out);
/* "O(a) = ..." rendering of the objective. */
UM_API um_status um_diagram_objective(const um_diagram* d, char** out);

/* variant: "utilitymax", "basic" or "harsh". d may be NULL for the baselines. */
UM_API um_status um_compile_prompt(const um_diagram* d, const char* task_json, const char* variant,
                                   char** prompt, char** fingerprint);

/* Random estimate sets through the factorized and brute-force paths. */
UM_API um_status um_oracle_check(const um_diagram* d, uint64_t trials, uint64_t seed, double* max_abs_deviation);

/* estimates_json: {"<node id>": probability | scalar | {"<label>": p, ...}}. */
UM_API um_status um_expected_utility(const um_diagram* d, const char* estimates_json, double* out);

/* Parses a UtilityMax response and returns the consistency audit as JSON. */
UM_API um_status um_audit_response(const um_diagram* d, const char* response_text, char** audit_json);

/* Runs the experiment described by a config file, writes report.json,
 * cells.csv and manifest.json to the config's out_dir (or out_dir_override
 * when non-NULL) and returns the rendered tables. */
UM_API um_status um_eval_run(const char* config_path, const char* out_dir_override, char** tables);

/* Renders the tables of a report.json file. */
UM_API um_status um_report_render(const char* report_path, char** tables);

#ifdef __cplusplus
}
#endif

#endif /* UTILIMAX_H */
