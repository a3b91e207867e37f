/* Native reference for corpus/heartbleed.msws: the same logic in plain
 * C silently over-reads past the 4-byte payload when the attacker asks
 * for 64 bytes.  Run it to watch adjacent heap bytes leak into the
 * response; the checked translation of the .msws twin traps instead.
 * This file is documentation: nothing asserts on its (undefined)
 * output. */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static void bcopy8(uint8_t *dst, const uint8_t *src, uint32_t n) {
  for (uint32_t i = 0; i < n; i++)
    dst[i] = src[i]; /* no bounds to stop at */
}

int main(int argc, char **argv) {
  uint32_t asked = argc > 1 ? (uint32_t)strtoul(argv[1], 0, 0) : 64;
  uint8_t *payload = malloc(4);
  uint8_t *secret = malloc(16);
  memcpy(secret, "hunter2-sessions", 16);
  uint32_t v = 1337;
  memcpy(payload, &v, 4);
  uint8_t *response = malloc(64);
  bcopy8(response, payload, asked); /* CVE-2014-0160 shape */
  printf("response bytes: ");
  for (uint32_t i = 0; i < asked && i < 64; i++)
    printf("%02x", response[i]);
  printf("\n");
  free(payload);
  free(secret);
  free(response);
  return 0;
}
