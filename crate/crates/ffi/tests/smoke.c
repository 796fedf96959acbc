#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "cmvc.h"

#define CHECK(call)                                                        \
  do {                                                                     \
    CmvcStatus s_ = (call);                                                \
    if (s_ != CMVC_STATUS_OK) {                                            \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, cmvc_last_error()); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  enum { W = 16, H = 8, N = 6 };
  static uint8_t raw[W * H * N];
  for (size_t i = 0; i < sizeof raw; i++) raw[i] = (uint8_t)((i * 7 + i / (W * H) * 13) & 0xff);

  CmvcVideo *video = NULL;
  CHECK(cmvc_video_from_bytes(raw, sizeof raw, W, H, 1, 30, 1, &video));
  if (cmvc_video_frame_count(video) != N) return 2;

  size_t keys[3];
  CHECK(cmvc_select_keyframes(video, 3, 0, 0, keys, 3));
  if (keys[0] != 0 || keys[2] != N - 1) return 3;

  CmvcEncodeOptions opts = cmvc_encode_options_default();
  opts.n_keyframes = 3;
  CmvcBuffer *stream = NULL;
  CHECK(cmvc_encode(video, &opts, "linear", NULL, &stream));
  if (memcmp(cmvc_buffer_data(stream), "CMVC", 4) != 0) return 4;

  CmvcVideo *decoded = NULL;
  CHECK(cmvc_decode(cmvc_buffer_data(stream), cmvc_buffer_len(stream), NULL, 1, &decoded));
  double db = 0;
  CHECK(cmvc_psnr(video, decoded, &db));
  if (!(db > 10.0)) return 5;

  if (cmvc_decode(raw, 10, NULL, 0, &decoded) != CMVC_STATUS_MALFORMED_STREAM) return 6;
  if (cmvc_last_error() == NULL) return 7;

  double ar[] = {0.01, 0.02, 0.04, 0.08}, ad[] = {30, 33, 36, 39}, tr[] = {0.005, 0.01, 0.02, 0.04};
  double bd = 0;
  CHECK(cmvc_bd_rate(ar, ad, 4, tr, ad, 4, 1, &bd));
  if (fabs(bd + 50.0) > 0.01) return 8;

  printf("ok %s %.3f\n", cmvc_version(), db);
  cmvc_buffer_free(stream);
  cmvc_video_free(decoded);
  cmvc_video_free(video);
  return 0;
}
