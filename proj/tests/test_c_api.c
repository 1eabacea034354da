/*
 * Copyright 2026 The avloc Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* Exercises the public C interface from C, linked against the shared library
 * only. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "avloc/avloc.h"

static int failures = 0;

#define EXPECT(cond)                                                    \
  do {                                                                  \
    if (!(cond)) {                                                      \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                       \
    }                                                                   \
  } while (0)

#define EXPECT_OK(call) EXPECT((call) == AVLOC_OK)

static char dir[512];

static const char* in_dir(const char* name) {
  static char buf[4][600];
  static int slot = 0;
  slot = (slot + 1) % 4;
  snprintf(buf[slot], sizeof buf[slot], "%s/%s", dir, name);
  return buf[slot];
}

static int same_file(const char* a, const char* b) {
  FILE* fa = fopen(a, "rb");
  FILE* fb = fopen(b, "rb");
  int same = fa && fb;
  while (same) {
    int ca = fgetc(fa), cb = fgetc(fb);
    if (ca != cb) same = 0;
    if (ca == EOF || cb == EOF) break;
  }
  if (fa) fclose(fa);
  if (fb) fclose(fb);
  return same;
}

static avloc_dataset* small_dataset(uint64_t seed) {
  avloc_synth_config c;
  avloc_dataset* ds = NULL;
  avloc_synth_config_default(&c);
  c.n_samples = 24;
  c.n_classes = 3;
  c.image_height = 16;
  c.image_width = 16;
  c.audio_height = 4;
  c.audio_width = 4;
  c.object_size = 4;
  c.noise_std = 0.1;
  c.distractors = 0;
  c.position_stride = 1;
  c.seed = seed;
  EXPECT_OK(avloc_dataset_generate(&c, &ds));
  return ds;
}

static void small_train_config(avloc_train_config* t) {
  avloc_train_config_default(t);
  t->epochs_stage1 = 2;
  t->epochs_stage2 = 2;
  t->batch_size = 8;
  t->channels = 4;
  t->k = 3;
  t->seed = 5;
}

static void test_status_and_defaults(void) {
  avloc_synth_config s;
  avloc_train_config t;
  avloc_eval_protocol e;
  avloc_mode m;
  avloc_synth_config_default(&s);
  avloc_train_config_default(&t);
  avloc_eval_protocol_default(&e);
  EXPECT(s.n_samples == 200 && s.n_classes == 10);
  EXPECT(t.epsilon == 0.65 && t.tau == 0.03 && t.mode == AVLOC_MODE_HP);
  EXPECT(e.binarize_threshold == 0.5 && e.success_threshold == 0.5);
  EXPECT(strcmp(avloc_mode_name(AVLOC_MODE_RANDOM_HP), "random_hp") == 0);
  EXPECT_OK(avloc_mode_parse("vanilla", &m));
  EXPECT(m == AVLOC_MODE_VANILLA);
  EXPECT(avloc_mode_parse("nope", &m) == AVLOC_ERR_INVALID_ARGUMENT);
  EXPECT(strlen(avloc_status_string(AVLOC_ERR_IO)) > 0);
  EXPECT(avloc_dataset_generate(NULL, NULL) == AVLOC_ERR_INVALID_ARGUMENT);
  EXPECT(strlen(avloc_last_error()) > 0);
  s.n_classes = 1;
  {
    avloc_dataset* ds = NULL;
    EXPECT(avloc_dataset_generate(&s, &ds) == AVLOC_ERR_INVALID_ARGUMENT);
    EXPECT(ds == NULL);
  }
}

static void test_data_round_trip(void) {
  avloc_dataset* ds = small_dataset(1);
  avloc_dataset* back = NULL;
  avloc_params* p = NULL;
  avloc_params* q = NULL;
  avloc_features* f = NULL;
  avloc_features* g = NULL;
  EXPECT(avloc_dataset_size(ds) == 24);
  EXPECT_OK(avloc_dataset_save(ds, in_dir("data")));
  EXPECT_OK(avloc_dataset_load(in_dir("data"), &back));
  EXPECT(avloc_dataset_size(back) == 24);
  EXPECT(avloc_dataset_load(in_dir("missing"), &back) == AVLOC_ERR_IO);

  EXPECT_OK(avloc_params_init(ds, 4, 4, 7, &p));
  EXPECT_OK(avloc_params_save(p, in_dir("p.txt")));
  EXPECT_OK(avloc_params_load(in_dir("p.txt"), &q));
  EXPECT(avloc_params_count(p) == avloc_params_count(q));
  EXPECT(memcmp(avloc_params_data(p), avloc_params_data(q),
                avloc_params_count(p) * sizeof(double)) == 0);

  EXPECT_OK(avloc_features_encode(p, back, &f));
  EXPECT(avloc_features_size(f) == 24);
  EXPECT_OK(avloc_features_save(f, in_dir("f.txt")));
  EXPECT_OK(avloc_features_load(in_dir("f.txt"), &g));
  EXPECT_OK(avloc_features_save(g, in_dir("g.txt")));
  EXPECT(same_file(in_dir("f.txt"), in_dir("g.txt")));

  {
    FILE* bad = fopen(in_dir("bad.txt"), "w");
    fputs("AVF9 1 1 1 1\n", bad);
    fclose(bad);
    EXPECT(avloc_features_load(in_dir("bad.txt"), &g) == AVLOC_ERR_MALFORMED_HEADER);
  }

  avloc_features_free(g);
  avloc_features_free(f);
  avloc_params_free(q);
  avloc_params_free(p);
  avloc_dataset_free(back);
  avloc_dataset_free(ds);
}

static void test_mining(void) {
  avloc_dataset* ds = small_dataset(2);
  avloc_params* p = NULL;
  avloc_features* f = NULL;
  avloc_index* ix = NULL;
  avloc_index* back = NULL;
  avloc_index* r = NULL;
  double prec = -1.0;
  EXPECT_OK(avloc_params_init(ds, 4, 4, 7, &p));
  EXPECT_OK(avloc_features_encode(p, ds, &f));
  EXPECT_OK(avloc_index_build(f, 3, &ix));
  EXPECT_OK(avloc_index_precision(ix, ds, &prec));
  EXPECT(prec >= 0.0 && prec <= 1.0);
  EXPECT_OK(avloc_index_save(ix, in_dir("ix.csv")));
  EXPECT_OK(avloc_index_load(in_dir("ix.csv"), &back));
  EXPECT_OK(avloc_index_save(back, in_dir("ix2.csv")));
  EXPECT(same_file(in_dir("ix.csv"), in_dir("ix2.csv")));
  EXPECT_OK(avloc_index_random(24, 3, 9, &r));
  EXPECT(avloc_index_random(2, 1, 9, &r) == AVLOC_ERR_INVALID_ARGUMENT);
  EXPECT(avloc_index_build(f, 0, &r) == AVLOC_ERR_INVALID_ARGUMENT);
  avloc_index_free(r);
  avloc_index_free(back);
  avloc_index_free(ix);
  avloc_features_free(f);
  avloc_params_free(p);
  avloc_dataset_free(ds);
}

static void test_training_and_eval(void) {
  avloc_dataset* ds = small_dataset(3);
  avloc_train_config t;
  avloc_params* a = NULL;
  avloc_params* b = NULL;
  avloc_params* s1 = NULL;
  avloc_params* s2 = NULL;
  avloc_train_log* la = NULL;
  avloc_train_log* lb = NULL;
  avloc_train_log* l1 = NULL;
  avloc_train_log* l2 = NULL;
  avloc_report* rep = NULL;
  avloc_log_record rec;
  avloc_eval_protocol e;
  small_train_config(&t);

  EXPECT_OK(avloc_train_full(ds, &t, NULL, NULL, &a, &la));
  EXPECT_OK(avloc_train_full(ds, &t, NULL, NULL, &b, &lb));
  EXPECT(memcmp(avloc_params_data(a), avloc_params_data(b),
                avloc_params_count(a) * sizeof(double)) == 0);
  EXPECT(avloc_train_log_size(la) == 12);
  EXPECT_OK(avloc_train_log_get(la, 11, &rec));
  EXPECT(rec.stage == 2 && rec.step == 6 && isfinite(rec.loss));
  EXPECT(avloc_train_log_get(la, 12, &rec) == AVLOC_ERR_INVALID_ARGUMENT);
  EXPECT_OK(avloc_train_log_save(la, in_dir("log.csv")));
  EXPECT_OK(avloc_train_config_save(&t, in_dir("cfg")));

  /* Running the stages separately gives the same result. */
  EXPECT_OK(avloc_train_stage1(ds, &t, NULL, &s1, &l1));
  {
    avloc_features* f = NULL;
    avloc_index* ix = NULL;
    EXPECT_OK(avloc_features_encode(s1, ds, &f));
    EXPECT_OK(avloc_index_build(f, t.k, &ix));
    EXPECT_OK(avloc_train_stage2(ds, s1, ix, &t, &s2, &l2));
    EXPECT(memcmp(avloc_params_data(a), avloc_params_data(s2),
                  avloc_params_count(a) * sizeof(double)) == 0);
    avloc_index_free(ix);
    avloc_features_free(f);
  }

  avloc_eval_protocol_default(&e);
  EXPECT_OK(avloc_evaluate(a, ds, &e, &rep));
  EXPECT(avloc_report_size(rep) == 24);
  EXPECT(avloc_report_ciou(rep) >= 0.0 && avloc_report_ciou(rep) <= 1.0);
  {
    int id = 0;
    double iou = -1.0;
    EXPECT_OK(avloc_report_get(rep, 0, &id, &iou));
    EXPECT(id == 1 && iou >= 0.0 && iou <= 1.0);
  }
  EXPECT_OK(avloc_report_save(rep, in_dir("report.csv")));

  {
    avloc_features* f = NULL;
    avloc_report* rf = NULL;
    EXPECT_OK(avloc_dataset_save(ds, in_dir("data3")));
    EXPECT_OK(avloc_features_encode(a, ds, &f));
    EXPECT_OK(avloc_evaluate_features(f, in_dir("data3/boxes.csv"), 16, 16, &e, &rf));
    EXPECT(avloc_report_ciou(rf) == avloc_report_ciou(rep));
    EXPECT(avloc_report_auc(rf) == avloc_report_auc(rep));
    avloc_report_free(rf);
    avloc_features_free(f);
  }

  t.learning_rate = -1.0;
  EXPECT(avloc_train_full(ds, &t, NULL, NULL, &b, &lb) == AVLOC_ERR_INVALID_ARGUMENT);
  t.learning_rate = 1e308;
  {
    avloc_params* d = NULL;
    avloc_train_log* dl = NULL;
    EXPECT(avloc_train_stage1(ds, &t, NULL, &d, &dl) == AVLOC_ERR_NUMERIC);
    EXPECT(d != NULL && dl != NULL);
    avloc_params_free(d);
    avloc_train_log_free(dl);
  }

  avloc_report_free(rep);
  avloc_train_log_free(l2);
  avloc_train_log_free(l1);
  avloc_params_free(s2);
  avloc_params_free(s1);
  avloc_train_log_free(lb);
  avloc_train_log_free(la);
  avloc_params_free(b);
  avloc_params_free(a);
  avloc_dataset_free(ds);
}

static void test_tables(void) {
  avloc_dataset* tr = small_dataset(4);
  avloc_dataset* ev = small_dataset(5);
  avloc_train_config t;
  avloc_table* tab = NULL;
  const int ks[] = {2, 5};
  const avloc_mode modes[] = {AVLOC_MODE_HP, AVLOC_MODE_VANILLA};
  const char* label = NULL;
  double ciou = -1.0, auc = -1.0;
  small_train_config(&t);

  EXPECT_OK(avloc_ablate_k(tr, ev, &t, ks, 2, NULL, &tab));
  EXPECT(avloc_table_size(tab) == 2);
  EXPECT_OK(avloc_table_get(tab, 1, &label, &ciou, &auc));
  EXPECT(strcmp(label, "5") == 0 && ciou >= 0.0 && auc >= 0.0);
  EXPECT_OK(avloc_table_save(tab, in_dir("k.csv")));
  avloc_table_free(tab);
  tab = NULL;

  EXPECT_OK(avloc_compare(tr, ev, &t, modes, 2, NULL, &tab));
  EXPECT_OK(avloc_table_get(tab, 1, &label, &ciou, &auc));
  EXPECT(strcmp(label, "vanilla") == 0);
  avloc_table_free(tab);
  tab = NULL;
  EXPECT(avloc_ablate_k(tr, ev, &t, ks, 0, NULL, &tab) == AVLOC_ERR_INVALID_ARGUMENT);

  avloc_dataset_free(ev);
  avloc_dataset_free(tr);
}

static void test_maps_and_grad_check(void) {
  avloc_dataset* ds = small_dataset(6);
  avloc_params* p = NULL;
  avloc_grad_check_result r;
  const int ids[] = {1, 3};
  FILE* f;
  EXPECT_OK(avloc_params_init(ds, 4, 4, 1, &p));
  EXPECT_OK(avloc_export_maps(p, ds, ids, 2, 1, dir));
  f = fopen(in_dir("resp_3_1.pgm"), "r");
  EXPECT(f != NULL);
  if (f) fclose(f);
  EXPECT_OK(avloc_grad_check(1, 0, &r));
  EXPECT(r.max_rel_error < 1e-4);
  EXPECT_OK(avloc_grad_check(1, 1, &r));
  EXPECT(r.max_rel_error < 1e-4);
  avloc_params_free(p);
  avloc_dataset_free(ds);
}

int main(int argc, char** argv) {
  if (argc != 2) {
    fprintf(stderr, "usage: %s <scratch dir>\n", argv[0]);
    return 2;
  }
  snprintf(dir, sizeof dir, "%s", argv[1]);
  test_status_and_defaults();
  test_data_round_trip();
  test_mining();
  test_training_and_eval();
  test_tables();
  test_maps_and_grad_check();
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("all C API checks passed\n");
  return 0;
}
