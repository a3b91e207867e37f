#include "mswasm_rt.h"

#include <stdio.h>
#include <stdlib.h>

const char *const mswasm_trap_names[8] = {
    "spatial",      "temporal",    "invalid-handle",
    "tag-forgery",  "linear-oob",  "indirect-call-type-mismatch",
    "unreachable",  "misaligned"};

jmp_buf *mswasm_rt_trap_jmp = NULL;
int mswasm_rt_trap_code = 0;

static int rt_trace = 0;
static int rt_quiet = 0;

void mswasm_rt_trap(int kind, const char *detail) {
  if (rt_quiet)
    fprintf(stderr, "mswasm trap: %s\n", mswasm_trap_names[kind]);
  else
    fprintf(stderr, "mswasm trap: %s: %s\n", mswasm_trap_names[kind],
            detail ? detail : "");
  if (mswasm_rt_trap_jmp) {
    mswasm_rt_trap_code = kind + 1;
    longjmp(*mswasm_rt_trap_jmp, kind + 1);
  }
  exit(3);
}

/* ---- segment table ---------------------------------------------------- */

mswasm_seg *mswasm_rt_segtab = NULL; /* indexed by id */
u32 mswasm_rt_segcap = 0;
#define segs mswasm_rt_segtab
#define seg_cap mswasm_rt_segcap
static u32 next_id = 1;

static struct {
  u8 *storage;
  u32 size;
} linear = {NULL, 0};

static Handle physmem_handle;
static int physmem_ready = 0;

void mswasm_rt_init(void) {
  const char *t = getenv("MSWASM_RT_TRACE");
  rt_trace = (t != NULL && t[0] != '0');
  const char *q = getenv("MSWASM_RT_QUIET");
  rt_quiet = (q != NULL && q[0] != '0');
  if (segs == NULL) {
    seg_cap = 64;
    segs = (mswasm_seg *)calloc(seg_cap, sizeof(mswasm_seg));
  }
}

void mswasm_rt_reset(void) {
  for (u32 i = 0; i < seg_cap; i++) {
    if (!segs[i].external)
      free(segs[i].storage);
    free(segs[i].tags);
    free(segs[i].slots);
    free(segs[i].slot_present);
  }
  physmem_ready = 0;
  free(segs);
  segs = NULL;
  seg_cap = 0;
  next_id = 1;
  free(linear.storage);
  linear.storage = NULL;
  linear.size = 0;
  mswasm_rt_init();
}

mswasm_seg *mswasm_rt_seg(u32 id) {
  if (id == 0 || id >= next_id || id >= seg_cap || !segs[id].live)
    return NULL;
  return &segs[id];
}

Handle mswasm_rt_segalloc(u32 size) {
  mswasm_rt_init();
  if (next_id >= seg_cap) {
    u32 ncap = seg_cap * 2;
    mswasm_seg *n = (mswasm_seg *)calloc(ncap, sizeof(mswasm_seg));
    memcpy(n, segs, seg_cap * sizeof(mswasm_seg));
    free(segs);
    segs = n;
    seg_cap = ncap;
  }
  u32 id = next_id++;
  mswasm_seg *s = &segs[id];
  s->storage = (u8 *)calloc(size ? size : 1, 1);
  if (s->storage == NULL) {
    fprintf(stderr, "mswasm rt: out of memory allocating %u bytes\n", size);
    exit(70);
  }
  s->size = size;
  s->tags = NULL;
  s->slots = NULL;
  s->slot_present = NULL;
  s->live = 1;
  if (rt_trace)
    fprintf(stderr, "rt: alloc %u %u\n", id, size);
  Handle h = {s->storage, 0, size, 1, id};
  return h;
}

void mswasm_rt_segfree(Handle h) {
  if (!h.valid || h.id == 0 || h.id == MSWASM_SENTINEL_ID)
    mswasm_rt_trap(MSWASM_TRAP_INVALID_HANDLE, "free through invalid handle");
  mswasm_seg *s = mswasm_rt_seg(h.id);
  if (s == NULL)
    mswasm_rt_trap(MSWASM_TRAP_TEMPORAL, "free of dead segment");
  if (s->external)
    mswasm_rt_trap(MSWASM_TRAP_INVALID_HANDLE, "segment is not freeable");
  if ((s32)h.offset != 0)
    mswasm_rt_trap(MSWASM_TRAP_SPATIAL, "free not at allocation base");
  free(s->storage);
  free(s->tags);
  free(s->slots);
  free(s->slot_present);
  s->storage = NULL;
  s->tags = NULL;
  s->slots = NULL;
  s->slot_present = NULL;
  s->live = 0;
  if (rt_trace)
    fprintf(stderr, "rt: free %u\n", h.id);
}

Handle mswasm_rt_setbounds(Handle h, u32 len) {
  if (!h.valid)
    mswasm_rt_trap(MSWASM_TRAP_INVALID_HANDLE, "setbounds on invalid handle");
  s64 off = (s64)(s32)h.offset;
  if (off < 0 || off + len > h.bound)
    mswasm_rt_trap(MSWASM_TRAP_SPATIAL, "setbounds escapes the window");
  Handle out = {h.data + off, 0, len, 1, h.id};
  return out;
}

u8 *mswasm_rt_check_slow(Handle h, u32 off, u32 w, int align) {
  if (!h.valid || h.id == 0)
    mswasm_rt_trap(MSWASM_TRAP_INVALID_HANDLE,
                   "access through invalid handle");
  s64 a = (s64)(s32)h.offset + (s64)off;
  if (h.id == MSWASM_SENTINEL_ID)
    return h.data + a; /* infinite bounds: wrapper-produced handle */
  mswasm_seg *seg = mswasm_rt_seg(h.id);
  if (seg == NULL)
    mswasm_rt_trap(MSWASM_TRAP_TEMPORAL, "segment is not live");
  if (a < 0 || (u64)a + w > h.bound)
    mswasm_rt_trap(MSWASM_TRAP_SPATIAL, "access outside handle bound");
  if (align && ((u64)(h.data + a - seg->storage) % MSWASM_HANDLE_WIDTH) != 0)
    mswasm_rt_trap(MSWASM_TRAP_MISALIGNED, "handle access misaligned");
  return h.data + a;
}

static void seg_ensure_shadow(mswasm_seg *s) {
  if (s->tags == NULL) {
    u32 blocks = s->size / MSWASM_HANDLE_WIDTH + 1;
    s->tags = (u8 *)calloc(s->size ? s->size : 1, 1);
    s->slots = (Handle *)calloc(blocks, sizeof(Handle));
    s->slot_present = (u8 *)calloc(blocks, 1);
  }
}

void mswasm_rt_shatter_seg(mswasm_seg *s, u8 *p, u32 w) {
  u32 addr = (u32)(p - s->storage);
  u32 first = addr / MSWASM_HANDLE_WIDTH;
  u32 last = (addr + w - 1) / MSWASM_HANDLE_WIDTH;
  for (u32 b = first; b <= last; b++) {
    if (s->slot_present[b]) {
      s->slot_present[b] = 0;
      memset(s->tags + b * MSWASM_HANDLE_WIDTH, 0, MSWASM_HANDLE_WIDTH);
    }
  }
}

void mswasm_rt_shatter(Handle h, u8 *p, u32 w) {
  if (h.id == MSWASM_SENTINEL_ID)
    return;
  mswasm_seg *s = mswasm_rt_seg(h.id);
  if (s == NULL || s->tags == NULL)
    return; /* no handle was ever stored here */
  mswasm_rt_shatter_seg(s, p, w);
}

static void serialize_handle(u8 *p, Handle v) {
  /* The fixed layout has no base field: recover it from the live
   * segment's storage.  Invalid or stale handles serialize base 0 (the
   * reference runtime keeps the original base; the difference is
   * unobservable through the language, which never reads base). */
  u32 base = 0;
  mswasm_seg *vs = (v.valid && v.id != 0 && v.id != MSWASM_SENTINEL_ID &&
                    v.data != NULL)
                       ? mswasm_rt_seg(v.id)
                       : NULL;
  if (vs != NULL)
    base = (u32)(v.data - vs->storage);
  memcpy(p + 0, &base, 4);
  memcpy(p + 4, &v.offset, 4);
  memcpy(p + 8, &v.bound, 4);
  memcpy(p + 12, &v.id, 4);
}

void mswasm_rt_store_handle(Handle h, u32 off, Handle v) {
  u8 *p = mswasm_rt_check_slow(h, off, MSWASM_HANDLE_WIDTH, 1);
  mswasm_seg *s = mswasm_rt_seg(h.id);
  if (s == NULL)
    mswasm_rt_trap(MSWASM_TRAP_INVALID_HANDLE,
                   "handle store into non-segment memory");
  seg_ensure_shadow(s);
  u32 addr = (u32)(p - s->storage);
  u32 block = addr / MSWASM_HANDLE_WIDTH;
  serialize_handle(p, v);
  memset(s->tags + addr, 1, MSWASM_HANDLE_WIDTH);
  s->slots[block] = v;
  s->slot_present[block] = 1;
}

Handle mswasm_rt_load_handle(Handle h, u32 off) {
  u8 *p = mswasm_rt_check_slow(h, off, MSWASM_HANDLE_WIDTH, 1);
  mswasm_seg *s = mswasm_rt_seg(h.id);
  if (s != NULL && s->tags != NULL) {
    u32 addr = (u32)(p - s->storage);
    u32 block = addr / MSWASM_HANDLE_WIDTH;
    if (s->slot_present[block])
      return s->slots[block];
  }
  /* Shattered or never-written window: a corrupt, unusable handle
   * carrying the raw fields (forgery yields valid=0, never access). */
  Handle out;
  u32 base;
  memcpy(&base, p + 0, 4);
  memcpy(&out.offset, p + 4, 4);
  memcpy(&out.bound, p + 8, 4);
  memcpy(&out.id, p + 12, 4);
  out.data = NULL;
  out.valid = 0;
  (void)base;
  return out;
}

/* ---- linear memory ----------------------------------------------------- */

void mswasm_rt_linear_ensure(u32 size) {
  mswasm_rt_init();
  if (linear.size >= size)
    return;
  u8 *n = (u8 *)calloc(size ? size : 1, 1);
  if (linear.storage != NULL)
    memcpy(n, linear.storage, linear.size);
  free(linear.storage);
  linear.storage = n;
  linear.size = size;
}

static u8 *linear_check(u32 addr, u32 w) {
  if ((u64)addr + w > linear.size)
    mswasm_rt_trap(MSWASM_TRAP_LINEAR_OOB, "linear access out of bounds");
  return linear.storage + addr;
}

void mswasm_rt_linear_write(u32 addr, const u8 *raw, u32 n) {
  memcpy(linear_check(addr, n), raw, n);
}

u32 mswasm_rt_linear_load_u32(u32 addr) {
  u32 v;
  memcpy(&v, linear_check(addr, 4), 4);
  return v;
}

u64 mswasm_rt_linear_load_u64(u32 addr) {
  u64 v;
  memcpy(&v, linear_check(addr, 8), 8);
  return v;
}

void mswasm_rt_linear_store_u32(u32 addr, u32 v) {
  memcpy(linear_check(addr, 4), &v, 4);
}

void mswasm_rt_linear_store_u64(u32 addr, u64 v) {
  memcpy(linear_check(addr, 8), &v, 8);
}

/* ---- tables ------------------------------------------------------------- */

mswasm_anyfunc mswasm_rt_table_lookup(const mswasm_table *t, u32 idx,
                                      u32 type_id) {
  if (t == NULL || idx >= t->size)
    mswasm_rt_trap(MSWASM_TRAP_INDIRECT_CALL_TYPE_MISMATCH,
                   "table index out of range");
  if (t->entries[idx].fn == NULL)
    mswasm_rt_trap(MSWASM_TRAP_INDIRECT_CALL_TYPE_MISMATCH,
                   "null table entry");
  if (t->entries[idx].type_id != type_id)
    mswasm_rt_trap(MSWASM_TRAP_INDIRECT_CALL_TYPE_MISMATCH,
                   "indirect call type mismatch");
  return t->entries[idx].fn;
}

/* ---- native interop ------------------------------------------------------ */

void *mswasm_rt_handle_to_ptr(Handle h) {
  if (!h.valid)
    mswasm_rt_trap(MSWASM_TRAP_INVALID_HANDLE,
                   "native conversion of invalid handle");
  return (void *)(h.data + (s32)h.offset);
}

Handle mswasm_rt_wrap_native(void *p) {
  Handle h = {(u8 *)p, 0, 0xFFFFFFFFu, 1, MSWASM_SENTINEL_ID};
  if (p == NULL)
    return mswasm_null_handle();
  return h;
}

Handle mswasm_rt_physmem(u32 size) {
  if (!physmem_ready) {
    physmem_handle = mswasm_rt_segalloc(size);
    physmem_ready = 1;
  }
  return physmem_handle;
}

Handle mswasm_rt_bind_static(void *storage, u32 size) {
  mswasm_rt_init();
  /* Register external storage as a segment: checked like any other but
   * owned by the C object, so it is never freed by us. */
  Handle h = mswasm_rt_segalloc(0);
  mswasm_seg *s = &segs[h.id];
  free(s->storage);
  s->storage = (u8 *)storage;
  s->size = size;
  s->external = 1;
  h.data = s->storage;
  h.bound = size;
  return h;
}
