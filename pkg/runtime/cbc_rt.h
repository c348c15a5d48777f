/* cbc_rt.h -- process runtime for compiled code-segment units.
 *
 * A unit produced by `cbc compile` is a set of routines of type
 * cbc_step_fn over one shared argument frame.  This runtime owns that
 * frame, the staging area used when argument shuffles need scratch space,
 * the continuation stack that converted units thread through their gotos,
 * and the environment records behind __environment / __return.
 *
 * Continuation values are cbc_segid integers under both backends: table
 * indices under the trampoline, routine addresses under direct emission.
 * Ids 0 and 1 are reserved for the runtime's own steps.
 */
#ifndef CBC_RT_H
#define CBC_RT_H

#include <setjmp.h>
#include <stdint.h>

typedef intptr_t cbc_segid;
typedef cbc_segid (*cbc_step_fn)(void);

#define CBC_SEG_ENVRET ((cbc_segid)0)
#define CBC_SEG_HALT   ((cbc_segid)1)

#if defined(__GNUC__)
#define CBC_NORETURN __attribute__((noreturn))
#else
#define CBC_NORETURN
#endif

/* Install `table` (trampoline) or pass table = 0 (direct emission), size
 * the shared frame for the widest transfer in the unit, and prepare the
 * continuation stack, environment arena and fault handler.  Repeated boots
 * are allowed; the frame only ever grows. */
void cbc_rt_boot(const cbc_step_fn *table, int n, int max_frame);

/* Run a segment chain to completion.  Returns only if the chain halts
 * without resuming an environment. */
void cbc_rt_enter(cbc_segid id);

cbc_segid cbc_rt_env_step(void);   /* id 0: resume the pending environment */
cbc_segid cbc_rt_halt_step(void);  /* id 1: stop the dispatch loop */

/* The frame holds the arguments of the segment being entered; the stage is
 * scratch for shuffles whose source slots are also destinations.  Exposed
 * as globals so frame access compiles to a plain load. */
extern char *cbc_rt_frame_ptr;
extern char *cbc_rt_stage_ptr;
static inline char *cbc_rt_frame(void) { return cbc_rt_frame_ptr; }
static inline char *cbc_rt_stage(void) { return cbc_rt_stage_ptr; }

/* Environment records are one-shot: resuming a record whose owner already
 * returned traps.  Records are never reused, so a late resume through a
 * stale pointer is caught rather than corrupting a live activation. */
void *cbc_rt_env_new(void);
jmp_buf *cbc_rt_env_jb(void *env);
long cbc_rt_env_status(void *env);
void cbc_rt_env_kill(void *env);
void cbc_rt_set_env(void *env);

/* Capture point: expands inside the function that owns the environment.
 * Zero on capture, nonzero when a segment chain resumes the record. */
#define CBC_ENV_CAPTURE(e) setjmp(*cbc_rt_env_jb(e))

/* Continuation stack: grows down from cbc_rt_stack_top(); a guard page
 * below cbc_rt_stack_limit() turns overrun into a "cbc: stack overflow"
 * trap.  Size defaults to 64 KiB, overridable with $CBC_STACK_SIZE (bytes,
 * rounded up to a page).  The high-water mark counts bytes ever written
 * below the top, found by scanning for the boot-time 0xCB fill. */
char *cbc_rt_stack_top(void);
char *cbc_rt_stack_limit(void);
int cbc_rt_stack_highwater(void);

/* Report `msg` on stderr and exit 70. */
CBC_NORETURN void cbc_rt_trap(const char *msg);

/* Tail transfer point for the direct backend.  clang can make the tail
 * call mandatory; elsewhere the empty expansion leaves a plain call that
 * optimizing builds turn into a jump.  Define CBC_TAILCALL yourself to
 * override. */
#ifndef CBC_TAILCALL
#if defined(__clang__) && defined(__has_attribute)
#if __has_attribute(musttail)
#define CBC_TAILCALL __attribute__((musttail))
#endif
#endif
#endif
#ifndef CBC_TAILCALL
#define CBC_TAILCALL
#endif

#endif /* CBC_RT_H */
