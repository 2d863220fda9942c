#ifndef CHOICELOG_H
#define CHOICELOG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChlStatus {
  CHL_STATUS_OK = 0,
  CHL_STATUS_NULL_ARGUMENT = 1,
  CHL_STATUS_INVALID_UTF8 = 2,
  CHL_STATUS_COMPILE_ERROR = 3,
  CHL_STATUS_UNKNOWN_RELATION = 4,
  CHL_STATUS_INVALID_TUPLE = 5,
  CHL_STATUS_EVAL_ERROR = 6,
  CHL_STATUS_PANIC = 7,
} ChlStatus;

typedef enum ChlPolicy {
  CHL_POLICY_FIRST = 0,
  CHL_POLICY_SHUFFLED = 1,
} ChlPolicy;

/*
 The tuples of every relation of one program.
 */
typedef struct ChlInstance ChlInstance;

/*
 A compiled program.
 */
typedef struct ChlProgram ChlProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Description of the last failure on this thread, or an empty string. The
 pointer stays valid until the next call into the library on this thread.
 */
const char *chl_last_error(void);

/*
 Compiles `source` into `*out`.

 # Safety
 `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ChlStatus chl_program_compile(const char *source, struct ChlProgram **out);

/*
 # Safety
 `program` must come from [`chl_program_compile`] or be null.
 */
void chl_program_free(struct ChlProgram *program);

/*
 The guarded RAM program as text, in `*out`.

 # Safety
 `program` must be a live handle and `out` a valid pointer.
 */
enum ChlStatus chl_program_emit_ram(const struct ChlProgram *program, char **out);

/*
 An empty instance for `program`, ready for input tuples.

 # Safety
 `program` must be a live handle and `out` a valid pointer.
 */
enum ChlStatus chl_instance_new(const struct ChlProgram *program, struct ChlInstance **out);

/*
 # Safety
 `instance` must come from [`chl_instance_new`] or be null.
 */
void chl_instance_free(struct ChlInstance *instance);

/*
 Adds one tuple to `relation`. Fields are given as text; numbers are
 parsed according to the declared attribute types.

 # Safety
 `instance` must be a live handle, `relation` a NUL-terminated string and
 `fields` an array of `len` NUL-terminated strings.
 */
enum ChlStatus chl_instance_insert(struct ChlInstance *instance,
                                   const char *relation,
                                   const char *const *fields,
                                   size_t len);

/*
 Evaluates `program` to a fixpoint, starting from and replacing the
 contents of `instance`. `seed` is used by [`ChlPolicy::Shuffled`] only.

 # Safety
 Both handles must be live and `instance` must have been created from
 `program`.
 */
enum ChlStatus chl_program_run(const struct ChlProgram *program,
                               struct ChlInstance *instance,
                               enum ChlPolicy policy,
                               uint64_t seed);

/*
 Number of tuples in `relation`.

 # Safety
 `instance` must be a live handle, `relation` a NUL-terminated string and
 `out` a valid pointer.
 */
enum ChlStatus chl_instance_size(const struct ChlInstance *instance,
                                 const char *relation,
                                 size_t *out);

/*
 The tuples of `relation` as tab-separated lines, in `*out`.

 # Safety
 `instance` must be a live handle, `relation` a NUL-terminated string and
 `out` a valid pointer.
 */
enum ChlStatus chl_instance_dump(const struct ChlInstance *instance,
                                 const char *relation,
                                 char **out);

/*
 Fixpoint iterations executed by the last [`chl_program_run`] on `instance`.

 # Safety
 `instance` must be a live handle and `out` a valid pointer.
 */
enum ChlStatus chl_instance_iterations(const struct ChlInstance *instance, uint64_t *out);

/*
 # Safety
 `s` must come from this library or be null.
 */
void chl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHOICELOG_H */
