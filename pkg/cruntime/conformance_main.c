/* Conformance table driver for the C support runtime.
 *
 * Reads a table (see conformance/ and the Python twin driver), prints
 * one canonical line per executed op, verifies inline "=>" expectations
 * and exits nonzero on any mismatch.  Comparing this program's stdout
 * with the Python driver's output is the pairwise equivalence check.
 */
#include "mswasm_rt.h"

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define MAX_VARS 64
#define MAX_TOKS 8

static Handle vars[MAX_VARS];
static char var_names[MAX_VARS][16];
static int n_vars = 0;
static int failures = 0;

static Handle *var(const char *name) {
  for (int i = 0; i < n_vars; i++)
    if (strcmp(var_names[i], name) == 0)
      return &vars[i];
  if (n_vars == MAX_VARS) {
    fprintf(stderr, "too many handle variables\n");
    exit(70);
  }
  snprintf(var_names[n_vars], sizeof var_names[0], "%s", name);
  vars[n_vars] = mswasm_null_handle();
  return &vars[n_vars++];
}

static void emit(int lineno, const char *result, const char *expected) {
  printf("%d: %s\n", lineno, result);
  if (expected != NULL && strcmp(result, expected) != 0) {
    fprintf(stderr, "line %d: got \"%s\", want \"%s\"\n", lineno, result,
            expected);
    failures++;
  }
}

int main(int argc, char **argv) {
  if (argc != 2) {
    fprintf(stderr, "usage: %s <table-file>\n", argv[0]);
    return 64;
  }
  FILE *f = fopen(argv[1], "r");
  if (f == NULL) {
    perror(argv[1]);
    return 66;
  }
  mswasm_rt_init();

  char buf[512];
  int lineno = 0;
  jmp_buf recover;
  while (fgets(buf, sizeof buf, f)) {
    lineno++;
    char *hash = strchr(buf, '#');
    if (hash != NULL)
      *hash = '\0';
    char *expected = strstr(buf, "=>");
    if (expected != NULL) {
      *expected = '\0';
      expected += 2;
      while (*expected == ' ')
        expected++;
      char *e = expected + strlen(expected);
      while (e > expected && (e[-1] == '\n' || e[-1] == ' ' || e[-1] == '\r'))
        *--e = '\0';
    }
    char *toks[MAX_TOKS];
    int n = 0;
    for (char *t = strtok(buf, " \t\r\n"); t != NULL && n < MAX_TOKS;
         t = strtok(NULL, " \t\r\n"))
      toks[n++] = t;
    if (n == 0)
      continue;

    char result[128];
    mswasm_rt_trap_jmp = &recover;
    int code = setjmp(recover);
    if (code != 0) {
      snprintf(result, sizeof result, "trap %s",
               mswasm_trap_names[code - 1]);
      mswasm_rt_trap_jmp = NULL;
      emit(lineno, result, expected);
      continue;
    }

    const char *op = toks[0];
    snprintf(result, sizeof result, "ok");
    if (strcmp(op, "linear") == 0) {
      mswasm_rt_linear_ensure((u32)strtoul(toks[1], 0, 0) * 65536u);
    } else if (strcmp(op, "alloc") == 0) {
      *var(toks[1]) = mswasm_rt_segalloc((u32)strtoul(toks[2], 0, 0));
    } else if (strcmp(op, "null") == 0) {
      *var(toks[1]) = mswasm_null_handle();
    } else if (strcmp(op, "free") == 0) {
      mswasm_rt_segfree(*var(toks[1]));
    } else if (strcmp(op, "add") == 0) {
      *var(toks[1]) =
          mswasm_rt_handle_add(*var(toks[2]), (u32)strtol(toks[3], 0, 0));
    } else if (strcmp(op, "setbounds") == 0 || strcmp(op, "slice") == 0) {
      *var(toks[1]) =
          mswasm_rt_setbounds(*var(toks[2]), (u32)strtoul(toks[3], 0, 0));
    } else if (strcmp(op, "store8") == 0) {
      mswasm_rt_store_u8(*var(toks[1]), (u32)strtoul(toks[2], 0, 0),
                         (u32)strtoul(toks[3], 0, 0));
    } else if (strcmp(op, "store32") == 0) {
      mswasm_rt_store_u32(*var(toks[1]), (u32)strtoul(toks[2], 0, 0),
                          (u32)strtoul(toks[3], 0, 0));
    } else if (strcmp(op, "store64") == 0) {
      mswasm_rt_store_u64(*var(toks[1]), (u32)strtoul(toks[2], 0, 0),
                          (u64)strtoull(toks[3], 0, 0));
    } else if (strcmp(op, "storef32") == 0) {
      mswasm_rt_store_f32(*var(toks[1]), (u32)strtoul(toks[2], 0, 0),
                          strtof(toks[3], 0));
    } else if (strcmp(op, "storef64") == 0) {
      mswasm_rt_store_f64(*var(toks[1]), (u32)strtoul(toks[2], 0, 0),
                          strtod(toks[3], 0));
    } else if (strcmp(op, "storeh") == 0) {
      mswasm_rt_store_handle(*var(toks[1]), (u32)strtoul(toks[2], 0, 0),
                             *var(toks[3]));
    } else if (strcmp(op, "load8") == 0) {
      snprintf(result, sizeof result, "val %u",
               mswasm_rt_load_u8(*var(toks[1]), (u32)strtoul(toks[2], 0, 0)));
    } else if (strcmp(op, "load32") == 0) {
      snprintf(result, sizeof result, "val %u",
               mswasm_rt_load_u32(*var(toks[1]), (u32)strtoul(toks[2], 0, 0)));
    } else if (strcmp(op, "load64") == 0) {
      snprintf(result, sizeof result, "val %llu",
               (unsigned long long)mswasm_rt_load_u64(
                   *var(toks[1]), (u32)strtoul(toks[2], 0, 0)));
    } else if (strcmp(op, "loadf32") == 0) {
      snprintf(result, sizeof result, "val 0x%08x",
               mswasm_rt_load_u32(*var(toks[1]), (u32)strtoul(toks[2], 0, 0)));
    } else if (strcmp(op, "loadf64") == 0) {
      snprintf(result, sizeof result, "val 0x%016llx",
               (unsigned long long)mswasm_rt_load_u64(
                   *var(toks[1]), (u32)strtoul(toks[2], 0, 0)));
    } else if (strcmp(op, "loadh") == 0) {
      Handle got =
          mswasm_rt_load_handle(*var(toks[2]), (u32)strtoul(toks[3], 0, 0));
      *var(toks[1]) = got;
      snprintf(result, sizeof result, "handle valid=%d offset=%d bound=%u",
               got.valid ? 1 : 0, (s32)got.offset, got.bound);
    } else if (strcmp(op, "linstore32") == 0) {
      mswasm_rt_linear_store_u32((u32)strtoul(toks[1], 0, 0),
                                 (u32)strtoul(toks[2], 0, 0));
    } else if (strcmp(op, "linstore64") == 0) {
      mswasm_rt_linear_store_u64((u32)strtoul(toks[1], 0, 0),
                                 (u64)strtoull(toks[2], 0, 0));
    } else if (strcmp(op, "linload32") == 0) {
      snprintf(result, sizeof result, "val %u",
               mswasm_rt_linear_load_u32((u32)strtoul(toks[1], 0, 0)));
    } else if (strcmp(op, "linload64") == 0) {
      snprintf(result, sizeof result, "val %llu",
               (unsigned long long)mswasm_rt_linear_load_u64(
                   (u32)strtoul(toks[1], 0, 0)));
    } else {
      fprintf(stderr, "line %d: unknown op %s\n", lineno, op);
      return 65;
    }
    mswasm_rt_trap_jmp = NULL;
    emit(lineno, result, expected);
  }
  fclose(f);
  if (failures) {
    fprintf(stderr, "%d expectation failure(s)\n", failures);
    return 1;
  }
  return 0;
}
