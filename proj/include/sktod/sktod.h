// Copyright 2026 The sktod Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the sktod engine.
 *
 * All functions return an sktod_status. On failure, sktod_last_error()
 * returns a message for the calling thread, valid until its next call into
 * the library. Strings returned through char** are heap-allocated, UTF-8,
 * NUL-terminated, and must be released with sktod_string_free().
 * Structured results are JSON documents.
 */
#ifndef SKTOD_SKTOD_H_
#define SKTOD_SKTOD_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(SKTOD_BUILDING_LIBRARY)
#define SKTOD_API __attribute__((visibility("default")))
#else
#define SKTOD_API
#endif

typedef enum sktod_status {
  SKTOD_OK = 0,
  SKTOD_ERR_USAGE = 1,     /* bad arguments, configuration or call order */
  SKTOD_ERR_DATA = 2,      /* unreadable or inconsistent data files */
  SKTOD_ERR_EXTERNAL = 3,  /* external service unreachable or misbehaving */
  SKTOD_ERR_NOT_FOUND = 4, /* unknown or expired session */
  SKTOD_ERR_INTERNAL = 5
} sktod_status;

typedef struct sktod_engine sktod_engine;
typedef struct sktod_service sktod_service;

SKTOD_API const char* sktod_version(void);
SKTOD_API const char* sktod_last_error(void);
SKTOD_API void sktod_string_free(char* s);
/* "trace", "debug", "info", "warn", "error" or "off". */
SKTOD_API sktod_status sktod_set_log_level(const char* level);

/* Loads the knowledge base and every split present under data_dir, checks
 * referential integrity and reports corpus statistics. Integrity problems
 * are reported ("ok": false), not returned as an error. */
SKTOD_API sktod_status sktod_ingest(const char* data_dir, char** report_json);

/* artifacts_dir may be NULL; when it holds a config.json the calibrated
 * detector and thresholds are loaded. */
SKTOD_API sktod_status sktod_engine_open(const char* data_dir, const char* artifacts_dir,
                                         sktod_engine** out);
SKTOD_API void sktod_engine_close(sktod_engine* engine);
SKTOD_API sktod_status sktod_engine_info(const sktod_engine* engine, char** info_json);

/* Trains the detector and calibrates lexical thresholds from the train and
 * val splits; writes detector.json and config.json to out_dir. workers <= 0
 * uses every core. */
SKTOD_API sktod_status sktod_calibrate(sktod_engine* engine, const char* data_dir,
                                       const char* out_dir, uint64_t seed, int workers,
                                       char** summary_json);

/* Calibrates the threshold of the scorer named in config_json on the val
 * split and stores it on the engine. */
SKTOD_API sktod_status sktod_calibrate_threshold(sktod_engine* engine, const char* data_dir,
                                                 const char* config_json,
                                                 char** calibration_json);

/* Pipeline config for one ablation row ("RG", "+KS", "+ET+KS",
 * "+KTD+ET+KS") derived from base_config_json (may be NULL). */
SKTOD_API sktod_status sktod_ablation_config(const char* base_config_json, const char* row,
                                             char** config_json);

/* Runs the pipeline described by config_json (NULL for defaults) over a
 * split. predictions_json and report_json may each be NULL. */
SKTOD_API sktod_status sktod_run(sktod_engine* engine, const char* data_dir, const char* split,
                                 const char* config_json, char** predictions_json,
                                 char** report_json);

/* Scores a predictions document against the gold labels of a split.
 * metrics is "all" or a comma list of detection, tracking, selection,
 * generation. */
SKTOD_API sktod_status sktod_evaluate(const char* data_dir, const char* split,
                                      const char* predictions_json, const char* metrics,
                                      char** report_json);

/* Tab-separated tracking errors of a predictions document: one row per
 * gold-target instance whose predicted entity set differs from gold, with
 * columns instance_id, kind (missing, spurious or both), predicted, gold. */
SKTOD_API sktod_status sktod_tracking_errors(const char* data_dir, const char* split,
                                             const char* predictions_json, char** tsv);

/* Relevance training pairs for an external scorer, as JSON lines. */
SKTOD_API sktod_status sktod_export_pairs(const sktod_engine* engine, const char* data_dir,
                                          const char* split, uint64_t seed, char** jsonl);

/* service_json: {"pipeline": {...}, "session_ttl_s": 1800,
 * "event_log": path, "static_dir": path, "http_threads": 8}; may be NULL.
 * The engine must outlive the service. */
SKTOD_API sktod_status sktod_service_create(const sktod_engine* engine, const char* service_json,
                                            sktod_service** out);
/* Serves HTTP in the background; port 0 picks a free port. */
SKTOD_API sktod_status sktod_service_start(sktod_service* service, const char* host, int port);
SKTOD_API int sktod_service_port(const sktod_service* service);
/* Stops serving (waiting for in-flight requests) and frees the service. */
SKTOD_API void sktod_service_destroy(sktod_service* service);

/* domain may be NULL. */
SKTOD_API sktod_status sktod_session_create(sktod_service* service, const char* domain,
                                            char** session_id);
SKTOD_API sktod_status sktod_session_utterance(sktod_service* service, const char* session_id,
                                               const char* text, char** turn_json);
SKTOD_API sktod_status sktod_session_transcript(sktod_service* service, const char* session_id,
                                                char** transcript_json);

#ifdef __cplusplus
}
#endif

#endif /* SKTOD_SKTOD_H_ */
