/* Unchecked native twin of bench/matmul.msw (same arithmetic, u32 wrap). */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>

int main(int argc, char **argv) {
  uint32_t n = argc > 1 ? (uint32_t)strtoul(argv[1], 0, 0) : 120;
  uint32_t reps = argc > 2 ? (uint32_t)strtoul(argv[2], 0, 0) : 1;
  uint32_t nn = n * n;
  uint32_t *a = malloc(nn * 4), *b = malloc(nn * 4), *c = malloc(nn * 4);
  for (uint32_t i = 0; i < nn; i++) {
    a[i] = i;
    b[i] = i + 1;
  }
  for (uint32_t r = 0; r < reps; r++)
    for (uint32_t i = 0; i < n; i++)
      for (uint32_t j = 0; j < n; j++) {
        uint32_t acc = 0;
        for (uint32_t k = 0; k < n; k++)
          acc += a[i * n + k] * b[k * n + j];
        c[i * n + j] = acc;
      }
  printf("i32 %u\n", c[nn - 1]);
  free(a);
  free(b);
  free(c);
  return 0;
}
