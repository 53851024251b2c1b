/*
 * Copyright 2026 The addlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* Exercises the C interface from plain C: the header must compile as C and
   every call reports failures through status codes and the error string. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

#include "addlab/addlab.h"

static int failures = 0;

#define EXPECT(cond)                                                        \
  do {                                                                      \
    if (!(cond)) {                                                          \
      fprintf(stderr, "%s:%d: expectation failed: %s (last error: %s)\n",  \
              __FILE__, __LINE__, #cond, addlab_last_error());              \
      ++failures;                                                           \
    }                                                                       \
  } while (0)

static void write_text(const char* path, const char* text) {
  FILE* f = fopen(path, "w");
  if (!f) {
    perror(path);
    exit(2);
  }
  fputs(text, f);
  fclose(f);
}

static void path_join(char* out, size_t cap, const char* dir, const char* name) {
  const int n = snprintf(out, cap, "%s/%s", dir, name);
  if (n < 0 || (size_t)n >= cap) {
    fprintf(stderr, "path too long: %s/%s\n", dir, name);
    exit(2);
  }
}

static void test_eer(void) {
  const double scores[] = {0.9, 0.8, 0.3, 0.7, 0.2, 0.1};
  const int labels[] = {0, 0, 0, 1, 1, 1};
  double eer = -1, thr = 0;
  EXPECT(addlab_compute_eer(scores, labels, 6, &eer, &thr) == ADDLAB_OK);
  EXPECT(fabs(eer - 1.0 / 3.0) < 1e-12);

  EXPECT(addlab_compute_eer(scores, labels, 3, &eer, NULL) == ADDLAB_ERR_USAGE);
  EXPECT(strcmp(addlab_last_error_reason(), "label") == 0);
  EXPECT(strlen(addlab_last_error()) > 0);

  const int bad[] = {0, 1, 7};
  EXPECT(addlab_compute_eer(scores, bad, 3, &eer, NULL) == ADDLAB_ERR_USAGE);
  EXPECT(addlab_compute_eer(NULL, labels, 6, &eer, NULL) == ADDLAB_ERR_USAGE);

  /* A success clears the previous error. */
  EXPECT(addlab_compute_eer(scores, labels, 6, NULL, NULL) == ADDLAB_OK);
  EXPECT(strcmp(addlab_last_error(), "") == 0);
}

static void test_features(const char* dir) {
  char path[4096];
  path_join(path, sizeof path, dir, "f.addf");
  const size_t dims[] = {2, 3};
  const float data[] = {1, 2, 3, 4, 5, 6};
  EXPECT(addlab_feature_write(path, "mel", dims, 2, data, 100.0f) == ADDLAB_OK);

  addlab_feature* f = NULL;
  EXPECT(addlab_feature_read(path, &f) == ADDLAB_OK);
  if (f) {
    EXPECT(strcmp(addlab_feature_name(f), "mel") == 0);
    EXPECT(addlab_feature_ndims(f) == 2);
    EXPECT(addlab_feature_dim(f, 1) == 3);
    EXPECT(addlab_feature_frame_rate(f) == 100.0f);
    EXPECT(memcmp(addlab_feature_data(f), data, sizeof data) == 0);
    addlab_feature_free(f);
  }

  /* Corrupt one payload byte: the checksum catches it. */
  FILE* fp = fopen(path, "r+b");
  fseek(fp, -8, SEEK_END);
  int c = fgetc(fp);
  fseek(fp, -8, SEEK_END);
  fputc(c ^ 0x40, fp);
  fclose(fp);
  f = NULL;
  EXPECT(addlab_feature_read(path, &f) == ADDLAB_ERR_DATA);
  EXPECT(f == NULL);
  EXPECT(strcmp(addlab_last_error_reason(), "checksum") == 0);

  path_join(path, sizeof path, dir, "missing.addf");
  EXPECT(addlab_feature_read(path, &f) == ADDLAB_ERR_RUNTIME);
  EXPECT(strstr(addlab_last_error(), "missing.addf") != NULL);
  EXPECT(addlab_feature_write(path, "x", dims, 2, NULL, 1.0f) == ADDLAB_ERR_USAGE);
  addlab_feature_free(NULL);
}

static void test_pipeline(const char* dir) {
  char spec[4096], corpus[4096], manifest[4096], config[4096], ckpt[4096], scores[4096],
      report[4096];
  path_join(spec, sizeof spec, dir, "synth.ini");
  path_join(corpus, sizeof corpus, dir, "corpus");
  path_join(manifest, sizeof manifest, corpus, "manifest.jsonl");
  path_join(config, sizeof config, dir, "model.ini");
  path_join(ckpt, sizeof ckpt, dir, "model.ckpt");
  path_join(scores, sizeof scores, dir, "scores.tsv");
  path_join(report, sizeof report, dir, "report.txt");

  write_text(spec,
             "[synth]\nnames = a, b\ninformativeness = 0.6, 0\ndims = 16\nframes = 16\n"
             "n_train = 48\nn_dev = 16\nn_eval = 16\nseed = 4\n");
  write_text(config,
             "[model]\nmode = select\nstage_blocks = 1, 1\nbase_channels = 4\nattn_dim = 8\n"
             "[train]\nepochs = 2\nbatch_size = 16\n");
  EXPECT(addlab_synth(spec, corpus) == ADDLAB_OK);
  EXPECT(access(manifest, R_OK) == 0);

  const uint64_t seed = 5;
  EXPECT(addlab_train(manifest, "a,b", NULL, ckpt, config, &seed, 2) == ADDLAB_OK);

  addlab_checkpoint* c = NULL;
  EXPECT(addlab_checkpoint_load(ckpt, &c) == ADDLAB_OK);
  if (c) {
    EXPECT(addlab_checkpoint_epoch(c) >= 1 && addlab_checkpoint_epoch(c) <= 2);
    EXPECT(isfinite(addlab_checkpoint_val_loss(c)));
    size_t needed = 0;
    EXPECT(addlab_checkpoint_describe(c, NULL, 0, &needed) == ADDLAB_OK);
    EXPECT(needed > 1);
    char* text = malloc(needed);
    EXPECT(addlab_checkpoint_describe(c, text, needed, NULL) == ADDLAB_OK);
    EXPECT(strlen(text) + 1 == needed);
    EXPECT(strstr(text, "select") != NULL);
    free(text);
    addlab_checkpoint_free(c);
  }

  double eer = -1;
  EXPECT(addlab_eval(ckpt, manifest, "a,b", scores, report, 2, &eer) == ADDLAB_OK);
  EXPECT(eer >= 0 && eer <= 1);
  EXPECT(access(scores, R_OK) == 0);
  EXPECT(access(report, R_OK) == 0);

  /* Views that disagree with the checkpoint abort the evaluation. */
  EXPECT(addlab_eval(ckpt, manifest, "b", scores, report, 1, &eer) == ADDLAB_ERR_DATA);
  EXPECT(addlab_train(manifest, "a", "stack", ckpt, config, NULL, 1) == ADDLAB_ERR_USAGE);
  EXPECT(addlab_train(NULL, "a", NULL, ckpt, NULL, NULL, 1) == ADDLAB_ERR_USAGE);

  c = NULL;
  EXPECT(addlab_checkpoint_load(report, &c) == ADDLAB_ERR_DATA);
  EXPECT(strcmp(addlab_last_error_reason(), "magic") == 0);
  EXPECT(c == NULL);
}

int main(void) {
  char dir[] = "/tmp/addlab_capi_XXXXXX";
  if (!mkdtemp(dir)) {
    perror("mkdtemp");
    return 2;
  }
  EXPECT(addlab_version() != NULL && strlen(addlab_version()) > 0);
  EXPECT(addlab_set_log_level("error") == ADDLAB_OK);
  EXPECT(addlab_set_log_level("chatty") == ADDLAB_ERR_USAGE);

  test_eer();
  test_features(dir);
  test_pipeline(dir);

  char cmd[4200];
  snprintf(cmd, sizeof cmd, "rm -rf '%s'", dir);
  if (system(cmd) != 0) fprintf(stderr, "could not remove %s\n", dir);
  if (failures) {
    fprintf(stderr, "%d expectation(s) failed\n", failures);
    return 1;
  }
  puts("C API: all expectations met");
  return 0;
}
