/* Unchecked native twin of bench/sum.msw. */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>

int main(int argc, char **argv) {
  uint32_t n = argc > 1 ? (uint32_t)strtoul(argv[1], 0, 0) : 1000000;
  uint32_t reps = argc > 2 ? (uint32_t)strtoul(argv[2], 0, 0) : 1;
  uint32_t *a = malloc((size_t)n * 4);
  for (uint32_t i = 0; i < n; i++)
    a[i] = i;
  uint32_t acc = 0;
  for (uint32_t r = 0; r < reps; r++) {
    acc = 0;
    for (uint32_t i = 0; i < n; i++)
      acc += a[i];
  }
  printf("i32 %u\n", acc);
  free(a);
  return 0;
}
