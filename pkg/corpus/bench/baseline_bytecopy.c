/* Unchecked native twin of bench/bytecopy.msw (explicit byte loop). */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>

int main(int argc, char **argv) {
  uint32_t n = argc > 1 ? (uint32_t)strtoul(argv[1], 0, 0) : 1000000;
  uint32_t reps = argc > 2 ? (uint32_t)strtoul(argv[2], 0, 0) : 1;
  volatile uint8_t *src = malloc(n), *dst = malloc(n);
  for (uint32_t i = 0; i < n; i++)
    src[i] = (uint8_t)i;
  for (uint32_t r = 0; r < reps; r++)
    for (uint32_t i = 0; i < n; i++)
      dst[i] = src[i];
  printf("i32 %u\n", dst[n - 1]);
  free((void *)src);
  free((void *)dst);
  return 0;
}
