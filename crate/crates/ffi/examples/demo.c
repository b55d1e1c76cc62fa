/* Extracts SALSA-Lite features from two seconds of noise and decodes a
 * hand-made multi-ACCDOA output. Build against libseld_rt_ffi. */
#include <stdio.h>
#include <stdlib.h>

#include "seld_rt.h"

static int fail(const char *what, SeldStatus status) {
  const char *msg = seld_last_error_message();
  fprintf(stderr, "%s failed (%d): %s\n", what, (int)status, msg ? msg : "");
  return 1;
}

int main(void) {
  const size_t frames = 48000, channels = 4;
  float *audio = malloc(frames * channels * sizeof(float));
  unsigned state = 1;
  for (size_t i = 0; i < frames * channels; i++) {
    state = state * 1103515245u + 12345u;
    audio[i] = ((float)(state >> 16) / 32768.0f - 1.0f) * 0.25f;
  }

  SeldExtractor *ex = NULL;
  SeldStatus s = seld_extractor_new(&ex);
  if (s != SELD_STATUS_OK) return fail("seld_extractor_new", s);

  SeldTensor *t = NULL;
  s = seld_extract(ex, SELD_FEATURE_KIND_SALSA_LITE, audio, frames, channels, 24000, &t);
  if (s != SELD_STATUS_OK) return fail("seld_extract", s);
  size_t c, f, b;
  seld_tensor_shape(t, &c, &f, &b);
  printf("shape %zux%zux%zu\n", c, f, b);

  double out[2 * 3 * 13 * 3] = {0};
  out[(0 * 3 * 13 + 0 * 13 + 5) * 3 + 1] = 0.9; /* frame 0, track 0, class 5, +y */
  SeldEventList *events = NULL;
  s = seld_decode(out, 2, 3, 13, 0.1, 0.5, 15.0, &events);
  if (s != SELD_STATUS_OK) return fail("seld_decode", s);
  for (size_t i = 0; i < seld_event_list_len(events); i++) {
    SeldEvent e;
    seld_event_list_get(events, i, &e);
    printf("event frame %zu class %zu az %.0f el %.0f\n", e.frame, e.class_id, e.azimuth_deg, e.elevation_deg);
  }

  double e_seld = 0.0;
  seld_aggregate_e_seld(0.606, 0.299, 26.8, 0.466, &e_seld);
  printf("e_seld %.3f\n", e_seld);

  s = seld_extract(ex, SELD_FEATURE_KIND_SALSA_LITE, audio, frames, channels, 16000, &t);
  printf("status %d: %s\n", (int)s, seld_last_error_message());

  seld_event_list_free(events);
  seld_tensor_free(t);
  seld_extractor_free(ex);
  free(audio);
  return 0;
}
