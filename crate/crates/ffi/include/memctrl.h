/* C interface for the memctrl controller toolkit. */

#ifndef MEMCTRL_H
#define MEMCTRL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define MEMCTRL_OK 0

/**
 * A required pointer argument was null.
 */
#define MEMCTRL_ERR_NULL_ARGUMENT -1

/**
 * A string argument was not valid UTF-8.
 */
#define MEMCTRL_ERR_UTF8 -2

/**
 * Reading or writing a file failed.
 */
#define MEMCTRL_ERR_IO -3

/**
 * A file's contents were malformed.
 */
#define MEMCTRL_ERR_FORMAT -4

/**
 * A configuration value was invalid.
 */
#define MEMCTRL_ERR_CONFIG -5

/**
 * A runtime input was invalid.
 */
#define MEMCTRL_ERR_INPUT -6

/**
 * A numeric operation produced a non-finite value.
 */
#define MEMCTRL_ERR_TRAINING -7

/**
 * Opaque controller handle with its episode step counter.
 */
typedef struct MemctrlController MemctrlController;

/**
 * Opaque simulated plant handle.
 */
typedef struct MemctrlPlant MemctrlPlant;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static NUL-terminated string.
 */
const char *memctrl_version(void);

/**
 * Returns the static name of an error code, or "unknown" for codes
 * this library never returns.
 */
const char *memctrl_error_name(int32_t code);

/**
 * Returns the detail message of the most recent failure on the calling
 * thread, or an empty string. The pointer stays valid until the next
 * failing call on the same thread.
 */
const char *memctrl_last_error_message(void);

/**
 * Creates a plant from explicit parameters.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle
 * pointer.
 */
int32_t memctrl_plant_new(double alpha,
                          double theta_max,
                          double u_scale,
                          double u_min,
                          double u_max,
                          double noise_std,
                          uint64_t seed,
                          struct MemctrlPlant **out);

/**
 * Creates a plant with the default parameters.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle
 * pointer.
 */
int32_t memctrl_plant_default(struct MemctrlPlant **out);

/**
 * Returns the plant to its rest state and reseeds its noise source.
 *
 * # Safety
 * `plant` must be a live handle from a `memctrl_plant_*` constructor.
 */
int32_t memctrl_plant_reset(struct MemctrlPlant *plant);

/**
 * Advances the plant one step under actuation `u` (kPa, clamped
 * internally) and writes the observed angle to `theta_out`.
 *
 * # Safety
 * `plant` must be a live handle and `theta_out` a valid pointer to
 * writable storage for one double.
 */
int32_t memctrl_plant_step(struct MemctrlPlant *plant, double u, double *theta_out);

/**
 * Shifts the plant's internal angle by `delta` degrees, modelling an
 * external poke.
 *
 * # Safety
 * `plant` must be a live handle from a `memctrl_plant_*` constructor.
 */
int32_t memctrl_plant_nudge(struct MemctrlPlant *plant, double delta);

/**
 * Releases a plant handle. A null handle is ignored.
 *
 * # Safety
 * `plant` must be null or a live handle; it must not be used after
 * this call.
 */
void memctrl_plant_free(struct MemctrlPlant *plant);

/**
 * Loads a controller from a checkpoint file. `open_loop` selects the
 * reference-only inverse-model controller and is rejected for other
 * checkpoint kinds. `u_min`/`u_max` set the actuation clamp the
 * controller works against, normally the plant's limits.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid
 * pointer to writable storage for one handle pointer.
 */
int32_t memctrl_controller_load(const char *path,
                                bool open_loop,
                                double u_min,
                                double u_max,
                                struct MemctrlController **out);

/**
 * Clears the controller's internal state for a fresh episode.
 *
 * # Safety
 * `controller` must be a live handle from `memctrl_controller_load`.
 */
int32_t memctrl_controller_reset(struct MemctrlController *controller);

/**
 * Computes the actuation for one step and writes it to `u_out`.
 * `theta` is the measured angle; open-loop controllers ignore it.
 * `ref_now` and `ref_next` are the reference angles for this step and
 * the next.
 *
 * # Safety
 * `controller` must be a live handle and `u_out` a valid pointer to
 * writable storage for one double.
 */
int32_t memctrl_controller_act(struct MemctrlController *controller,
                               double theta,
                               double ref_now,
                               double ref_next,
                               double *u_out);

/**
 * Releases a controller handle. A null handle is ignored.
 *
 * # Safety
 * `controller` must be null or a live handle; it must not be used
 * after this call.
 */
void memctrl_controller_free(struct MemctrlController *controller);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEMCTRL_H */
