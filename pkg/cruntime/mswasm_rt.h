/* Support runtime for generated bounds-checked C sources.
 *
 * Semantics mirror the reference store bit-for-bit: segments carry a
 * per-byte tag shadow plus a slot shadow for serialized handles, the
 * allocator never reuses ids, and every access runs the same
 * valid/live/range/alignment checks with the same trap taxonomy.
 *
 * Not thread-safe: one segment table per process.  MSWASM_RT_TRACE=1
 * logs allocations/frees to stderr; MSWASM_RT_QUIET=1 reduces trap
 * messages to the kind alone.
 */
#ifndef MSWASM_RT_H
#define MSWASM_RT_H

#include <setjmp.h>
#include <stddef.h>
#include <stdint.h>
#include <string.h>

typedef uint8_t u8;
typedef uint32_t u32;
typedef uint64_t u64;
typedef int32_t s32;
typedef int64_t s64;
typedef float f32;
typedef double f64;

#define MSWASM_HANDLE_WIDTH 16u
#define MSWASM_SENTINEL_ID 0xFFFFFFFFu /* infinite-bounds wrapper handles */

/* Field layout is fixed: wrappers and embedders rely on it. */
typedef struct Handle {
  u8 *data;   /* segment storage base with the window base folded in */
  u32 offset; /* two's-complement window offset */
  u32 bound;  /* window length in bytes */
  u8 valid;
  u32 id;
} Handle;

enum {
  MSWASM_TRAP_SPATIAL = 0,
  MSWASM_TRAP_TEMPORAL = 1,
  MSWASM_TRAP_INVALID_HANDLE = 2,
  MSWASM_TRAP_TAG_FORGERY = 3,
  MSWASM_TRAP_LINEAR_OOB = 4,
  MSWASM_TRAP_INDIRECT_CALL_TYPE_MISMATCH = 5,
  MSWASM_TRAP_UNREACHABLE = 6,
  MSWASM_TRAP_MISALIGNED = 7
};

extern const char *const mswasm_trap_names[8];

/* Trap exits the process with code 3 after printing
 * "mswasm trap: <kind>: <detail>" to stderr, unless a recovery point
 * is installed (ReturnError-style drivers). */
extern jmp_buf *mswasm_rt_trap_jmp;
extern int mswasm_rt_trap_code; /* last trap kind + 1 when recovered */
void mswasm_rt_trap(int kind, const char *detail);

void mswasm_rt_init(void);
void mswasm_rt_reset(void); /* test drivers only: drop all segments */

typedef struct {
  u8 *storage;
  u32 size;
  u8 *tags;             /* lazily allocated: NULL until a handle is stored */
  Handle *slots;        /* one per 16-byte block, lazily allocated */
  u8 *slot_present;     /* parallel to slots */
  u8 live;
  u8 external;          /* storage owned by a C object; never freeable */
} mswasm_seg;

mswasm_seg *mswasm_rt_seg(u32 id); /* NULL when id is not live */

/* Segment table internals, exported so the access fast path fully
 * inlines (one branch chain, no calls, per checked access). */
extern mswasm_seg *mswasm_rt_segtab;
extern u32 mswasm_rt_segcap;

static inline mswasm_seg *mswasm_rt_seg_fast(u32 id) {
  if (id == 0 || id >= mswasm_rt_segcap || !mswasm_rt_segtab[id].live)
    return (mswasm_seg *)0;
  return &mswasm_rt_segtab[id];
}

Handle mswasm_rt_segalloc(u32 size);
void mswasm_rt_segfree(Handle h);
Handle mswasm_rt_setbounds(Handle h, u32 len);

static inline Handle mswasm_null_handle(void) {
  Handle h = {0, 0, 0, 0, 0};
  return h;
}

static inline Handle mswasm_rt_handle_add(Handle h, u32 delta) {
  h.offset += delta; /* wrapping i32; checks happen at access */
  return h;
}

/* Access check: returns the validated physical pointer or traps.
 * Check order matches the reference store: invalid-handle, temporal,
 * spatial (window), misaligned (handle accesses only). */
u8 *mswasm_rt_check_slow(Handle h, u32 off, u32 w, int align);

static inline u8 *mswasm_rt_check(Handle h, u32 off, u32 w) {
  /* Fast path for the common case: valid handle, in-window access. */
  s64 a = (s64)(s32)h.offset + (s64)off;
  if (h.valid && h.id != MSWASM_SENTINEL_ID && a >= 0 &&
      (u64)a + w <= h.bound) {
    mswasm_seg *seg = mswasm_rt_seg_fast(h.id);
    if (seg)
      return h.data + a;
  }
  return mswasm_rt_check_slow(h, off, w, 0);
}

void mswasm_rt_shatter(Handle h, u8 *p, u32 w); /* drop overlapped slots */
void mswasm_rt_shatter_seg(mswasm_seg *seg, u8 *p, u32 w);

/* Checked store path: validate, then drop any serialized handle the
 * write lands on.  Segments that never held a handle skip the shatter
 * entirely (tags stay unallocated). */
static inline u8 *mswasm_rt_check_store(Handle h, u32 off, u32 w) {
  s64 a = (s64)(s32)h.offset + (s64)off;
  if (h.valid && h.id != MSWASM_SENTINEL_ID && a >= 0 &&
      (u64)a + w <= h.bound) {
    mswasm_seg *seg = mswasm_rt_seg_fast(h.id);
    if (seg) {
      u8 *p = h.data + a;
      if (seg->tags != (u8 *)0)
        mswasm_rt_shatter_seg(seg, p, w);
      return p;
    }
  }
  u8 *p = mswasm_rt_check_slow(h, off, w, 0);
  mswasm_rt_shatter(h, p, w);
  return p;
}

static inline u32 mswasm_rt_load_u8(Handle h, u32 off) {
  return *mswasm_rt_check(h, off, 1);
}

static inline u32 mswasm_rt_load_u32(Handle h, u32 off) {
  u32 v;
  memcpy(&v, mswasm_rt_check(h, off, 4), 4);
  return v;
}

static inline u64 mswasm_rt_load_u64(Handle h, u32 off) {
  u64 v;
  memcpy(&v, mswasm_rt_check(h, off, 8), 8);
  return v;
}

static inline f32 mswasm_rt_load_f32(Handle h, u32 off) {
  f32 v;
  memcpy(&v, mswasm_rt_check(h, off, 4), 4);
  return v;
}

static inline f64 mswasm_rt_load_f64(Handle h, u32 off) {
  f64 v;
  memcpy(&v, mswasm_rt_check(h, off, 8), 8);
  return v;
}

static inline void mswasm_rt_store_u8(Handle h, u32 off, u32 v) {
  *mswasm_rt_check_store(h, off, 1) = (u8)v;
}

static inline void mswasm_rt_store_u32(Handle h, u32 off, u32 v) {
  memcpy(mswasm_rt_check_store(h, off, 4), &v, 4);
}

static inline void mswasm_rt_store_u64(Handle h, u32 off, u64 v) {
  memcpy(mswasm_rt_check_store(h, off, 8), &v, 8);
}

static inline void mswasm_rt_store_f32(Handle h, u32 off, f32 v) {
  memcpy(mswasm_rt_check_store(h, off, 4), &v, 4);
}

static inline void mswasm_rt_store_f64(Handle h, u32 off, f64 v) {
  memcpy(mswasm_rt_check_store(h, off, 8), &v, 8);
}

/* Serialized-handle accesses: 16-byte aligned, tag-checked. */
Handle mswasm_rt_load_handle(Handle h, u32 off);
void mswasm_rt_store_handle(Handle h, u32 off, Handle v);

/* Linear memory (reserved segment, untagged, coarse bounds). */
void mswasm_rt_linear_ensure(u32 size);
void mswasm_rt_linear_write(u32 addr, const u8 *raw, u32 n);
u32 mswasm_rt_linear_load_u32(u32 addr);
u64 mswasm_rt_linear_load_u64(u32 addr);
void mswasm_rt_linear_store_u32(u32 addr, u32 v);
void mswasm_rt_linear_store_u64(u32 addr, u64 v);

/* Function tables for call_indirect. */
typedef void (*mswasm_anyfunc)(void);
typedef struct {
  mswasm_anyfunc fn;
  u32 type_id;
} mswasm_funcref;
typedef struct {
  mswasm_funcref *entries;
  u32 size;
} mswasm_table;

mswasm_anyfunc mswasm_rt_table_lookup(const mswasm_table *t, u32 idx,
                                      u32 type_id);

/* Native interop: raw pointers in, infinite-bounds handles out. */
void *mswasm_rt_handle_to_ptr(Handle h);
Handle mswasm_rt_wrap_native(void *p);

/* Test arena backing the imported _physical_memory handle. */
Handle mswasm_rt_physmem(u32 size);

/* Bind a static C object's storage as a checked segment (global
 * variable machinery); the segment is never freeable. */
Handle mswasm_rt_bind_static(void *storage, u32 size);

#endif /* MSWASM_RT_H */
