// Interposed libc entry points for the write monitor. Plain C: glibc
// declares several of these with C++ exception specifications.
#undef _FORTIFY_SOURCE
#ifndef _GNU_SOURCE
#define _GNU_SOURCE
#endif

#include <dlfcn.h>
#include <fcntl.h>
#include <stdarg.h>
#include <stdio.h>
#include <string.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <unistd.h>

#include <stdatomic.h>
#include <stddef.h>

#define KEPT 16

static atomic_bool armed;
static atomic_size_t count;
static char kept[KEPT][256];

static void note(const char *path) {
  if (!atomic_load(&armed)) return;
  if (path && strncmp(path, "/dev/", 5) == 0) return;  // device nodes are not storage
  size_t i = atomic_fetch_add(&count, 1);
  if (i < KEPT) strncpy(kept[i], path ? path : "(null)", sizeof kept[i] - 1);
}

static int writes_flags(int flags) {
  return (flags & O_ACCMODE) != O_RDONLY || (flags & (O_CREAT | O_TRUNC | O_APPEND)) != 0;
}

static int writes_mode(const char *mode) { return mode && (strchr(mode, 'w') || strchr(mode, 'a') || strchr(mode, '+')); }

#define NEXT(type, name)                     \
  static void *real_sym = NULL;              \
  if (!real_sym) real_sym = dlsym(RTLD_NEXT, name); \
  __typeof__(type) real = (__typeof__(type))real_sym

static mode_t mode_arg(int flags, va_list ap) {
  return (flags & O_CREAT) || (flags & O_TMPFILE) == O_TMPFILE ? (mode_t)va_arg(ap, int) : 0;
}

void chunkchain_monitor_arm(void) {
  atomic_store(&count, 0);
  memset(kept, 0, sizeof kept);
  atomic_store(&armed, 1);
}
void chunkchain_monitor_disarm(void) { atomic_store(&armed, 0); }
size_t chunkchain_monitor_writes(void) { return atomic_load(&count); }
const char *chunkchain_monitor_path(size_t i) { return i < KEPT && i < atomic_load(&count) ? kept[i] : NULL; }

int __open_2(const char *path, int flags) {
  if (writes_flags(flags)) note(path);
  NEXT(int (*)(const char *, int), "__open_2");
  return real(path, flags);
}

int __open64_2(const char *path, int flags) {
  if (writes_flags(flags)) note(path);
  NEXT(int (*)(const char *, int), "__open64_2");
  return real(path, flags);
}

int __openat_2(int dirfd, const char *path, int flags) {
  if (writes_flags(flags)) note(path);
  NEXT(int (*)(int, const char *, int), "__openat_2");
  return real(dirfd, path, flags);
}

int __openat64_2(int dirfd, const char *path, int flags) {
  if (writes_flags(flags)) note(path);
  NEXT(int (*)(int, const char *, int), "__openat64_2");
  return real(dirfd, path, flags);
}

int open(const char *path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  mode_t mode = mode_arg(flags, ap);
  va_end(ap);
  if (writes_flags(flags)) note(path);
  NEXT(int (*)(const char *, int, ...), "open");
  return real(path, flags, mode);
}

int open64(const char *path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  mode_t mode = mode_arg(flags, ap);
  va_end(ap);
  if (writes_flags(flags)) note(path);
  NEXT(int (*)(const char *, int, ...), "open64");
  return real(path, flags, mode);
}

int openat(int dirfd, const char *path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  mode_t mode = mode_arg(flags, ap);
  va_end(ap);
  if (writes_flags(flags)) note(path);
  NEXT(int (*)(int, const char *, int, ...), "openat");
  return real(dirfd, path, flags, mode);
}

int openat64(int dirfd, const char *path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  mode_t mode = mode_arg(flags, ap);
  va_end(ap);
  if (writes_flags(flags)) note(path);
  NEXT(int (*)(int, const char *, int, ...), "openat64");
  return real(dirfd, path, flags, mode);
}

int creat(const char *path, mode_t mode) {
  note(path);
  NEXT(int (*)(const char *, mode_t), "creat");
  return real(path, mode);
}

int creat64(const char *path, mode_t mode) {
  note(path);
  NEXT(int (*)(const char *, mode_t), "creat64");
  return real(path, mode);
}

FILE *fopen(const char *path, const char *mode) {
  if (writes_mode(mode)) note(path);
  NEXT(FILE *(*)(const char *, const char *), "fopen");
  return real(path, mode);
}

FILE *fopen64(const char *path, const char *mode) {
  if (writes_mode(mode)) note(path);
  NEXT(FILE *(*)(const char *, const char *), "fopen64");
  return real(path, mode);
}

FILE *freopen(const char *path, const char *mode, FILE *stream) {
  if (writes_mode(mode)) note(path);
  NEXT(FILE *(*)(const char *, const char *, FILE *), "freopen");
  return real(path, mode, stream);
}

int mkdir(const char *path, mode_t mode) {
  note(path);
  NEXT(int (*)(const char *, mode_t), "mkdir");
  return real(path, mode);
}

int mkdirat(int dirfd, const char *path, mode_t mode) {
  note(path);
  NEXT(int (*)(int, const char *, mode_t), "mkdirat");
  return real(dirfd, path, mode);
}

int rename(const char *from, const char *to) {
  note(to);
  NEXT(int (*)(const char *, const char *), "rename");
  return real(from, to);
}

int renameat(int fd1, const char *from, int fd2, const char *to) {
  note(to);
  NEXT(int (*)(int, const char *, int, const char *), "renameat");
  return real(fd1, from, fd2, to);
}

int link(const char *from, const char *to) {
  note(to);
  NEXT(int (*)(const char *, const char *), "link");
  return real(from, to);
}

int symlink(const char *from, const char *to) {
  note(to);
  NEXT(int (*)(const char *, const char *), "symlink");
  return real(from, to);
}

int unlink(const char *path) {
  note(path);
  NEXT(int (*)(const char *), "unlink");
  return real(path);
}

int unlinkat(int dirfd, const char *path, int flags) {
  note(path);
  NEXT(int (*)(int, const char *, int), "unlinkat");
  return real(dirfd, path, flags);
}

int rmdir(const char *path) {
  note(path);
  NEXT(int (*)(const char *), "rmdir");
  return real(path);
}

int truncate(const char *path, off_t length) {
  note(path);
  NEXT(int (*)(const char *, off_t), "truncate");
  return real(path, length);
}

int remove(const char *path) {
  note(path);
  NEXT(int (*)(const char *), "remove");
  return real(path);
}
