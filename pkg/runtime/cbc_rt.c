#define _GNU_SOURCE
#include "cbc_rt.h"

#include <signal.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/mman.h>
#include <unistd.h>

#define CBC_FILL 0xCB
#define CBC_DEFAULT_STACK (64 * 1024)

char *cbc_rt_frame_ptr;
char *cbc_rt_stage_ptr;

struct cbc_env {
    jmp_buf jb;
    long status;
    int dead;
};

static const cbc_step_fn *g_table;
static int g_table_n;
static int g_frame_bytes;
static struct cbc_env *g_pending;

static char *g_guard;   /* PROT_NONE page below the stack */
static char *g_limit;   /* lowest usable byte */
static char *g_top;     /* one past the highest byte */

void cbc_rt_trap(const char *msg)
{
    fprintf(stderr, "%s\n", msg);
    exit(70);
}

/* ------------------------------------------------------------------ stack */

static void on_segv(int sig, siginfo_t *si, void *uctx)
{
    char *addr = (char *)si->si_addr;
    (void)sig;
    (void)uctx;
    if (g_guard && addr >= g_guard && addr < g_limit) {
        /* only async-signal-safe calls from here */
        static const char msg[] = "cbc: stack overflow\n";
        if (write(2, msg, sizeof msg - 1) < 0) { /* ignore */ }
        _exit(70);
    }
    signal(SIGSEGV, SIG_DFL);   /* not ours: rerun under the default action */
    raise(SIGSEGV);
}

static void install_handler(void)
{
    struct sigaction sa;
    stack_t ss;

    /* the handler must run even when the machine stack itself is gone */
    ss.ss_size = 64 * 1024;
    ss.ss_sp = malloc(ss.ss_size);
    ss.ss_flags = 0;
    if (ss.ss_sp)
        sigaltstack(&ss, NULL);

    memset(&sa, 0, sizeof sa);
    sa.sa_sigaction = on_segv;
    sa.sa_flags = SA_SIGINFO | SA_ONSTACK;
    sigemptyset(&sa.sa_mask);
    sigaction(SIGSEGV, &sa, NULL);
}

static void stack_init(void)
{
    size_t page = (size_t)sysconf(_SC_PAGESIZE);
    size_t size = CBC_DEFAULT_STACK;
    const char *env = getenv("CBC_STACK_SIZE");
    char *base;

    if (env && *env) {
        char *end;
        long long v = strtoll(env, &end, 10);
        if (*end == '\0' && v > 0)
            size = (size_t)v;
    }
    size = (size + page - 1) / page * page;

    base = mmap(NULL, size + page, PROT_READ | PROT_WRITE,
                MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
    if (base == MAP_FAILED)
        cbc_rt_trap("cbc: cannot map continuation stack");
    if (mprotect(base, page, PROT_NONE) != 0)
        cbc_rt_trap("cbc: cannot protect guard page");
    g_guard = base;
    g_limit = base + page;
    g_top = base + page + size;
    memset(g_limit, CBC_FILL, size);
}

char *cbc_rt_stack_top(void)
{
    return g_top;
}

char *cbc_rt_stack_limit(void)
{
    return g_limit;
}

int cbc_rt_stack_highwater(void)
{
    char *p = g_limit;
    while (p < g_top && (unsigned char)*p == CBC_FILL)
        p++;
    return (int)(g_top - p);
}

/* --------------------------------------------------------------- dispatch */

void cbc_rt_boot(const cbc_step_fn *table, int n, int max_frame)
{
    g_table = table;
    g_table_n = n;
    if (max_frame < 16)
        max_frame = 16;
    if (max_frame > g_frame_bytes) {
        free(cbc_rt_frame_ptr);
        free(cbc_rt_stage_ptr);
        cbc_rt_frame_ptr = calloc(1, (size_t)max_frame);
        cbc_rt_stage_ptr = calloc(1, (size_t)max_frame);
        if (!cbc_rt_frame_ptr || !cbc_rt_stage_ptr)
            cbc_rt_trap("cbc: cannot allocate argument frame");
        g_frame_bytes = max_frame;
    }
    if (!g_top) {
        stack_init();
        install_handler();
    }
}

void cbc_rt_enter(cbc_segid id)
{
    if (g_table) {
        while (id >= 0) {
            if (id >= g_table_n)
                cbc_rt_trap("cbc: bad segment id");
            id = g_table[id]();
        }
        return;
    }
    /* direct emission: the chain is a call cascade; it unwinds back here
     * when some step returns (the halt step, or any segment chain end) */
    (void)((cbc_step_fn)id)();
}

cbc_segid cbc_rt_halt_step(void)
{
    return (cbc_segid)-1;
}

/* ------------------------------------------------------------ environments */

void *cbc_rt_env_new(void)
{
    struct cbc_env *e = calloc(1, sizeof *e);
    if (!e)
        cbc_rt_trap("cbc: cannot allocate environment");
    return e;
}

jmp_buf *cbc_rt_env_jb(void *env)
{
    return &((struct cbc_env *)env)->jb;
}

long cbc_rt_env_status(void *env)
{
    return ((struct cbc_env *)env)->status;
}

void cbc_rt_env_kill(void *env)
{
    /* records are never freed, so a stale resume finds the flag, not junk */
    ((struct cbc_env *)env)->dead = 1;
}

void cbc_rt_set_env(void *env)
{
    g_pending = env;
}

cbc_segid cbc_rt_env_step(void)
{
    struct cbc_env *e = g_pending;
    if (!e || e->dead)
        cbc_rt_trap("cbc: dead environment");
    /* the resuming goto left the return status in the first frame slot */
    e->status = *(int *)cbc_rt_frame_ptr;
    longjmp(e->jb, 1);
}
