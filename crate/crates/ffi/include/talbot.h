#ifndef TALBOT_H
#define TALBOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum TalbotChannel {
  TALBOT_CHANNEL_DENSITY = 0,
  TALBOT_CHANNEL_CURRENT = 1,
  TALBOT_CHANNEL_DRIFT_VELOCITY = 2,
  TALBOT_CHANNEL_KX_OVER_K0 = 3,
} TalbotChannel;

typedef enum TalbotStatus {
  TALBOT_STATUS_OK = 0,
  TALBOT_STATUS_NULL_POINTER = 1,
  // Argument outside its physical domain.
  TALBOT_STATUS_DOMAIN = 2,
  // Output buffer too small; the required size is reported where possible.
  TALBOT_STATUS_BUFFER_TOO_SMALL = 3,
  TALBOT_STATUS_NUMERICAL = 4,
  TALBOT_STATUS_IO = 5,
  TALBOT_STATUS_CONFIG = 6,
  // A Rust panic was caught at the boundary.
  TALBOT_STATUS_INTERNAL = 7,
} TalbotStatus;

typedef enum TalbotTermination {
  TALBOT_TERMINATION_COMPLETED = 0,
  TALBOT_TERMINATION_ENTERED_INVALID_REGION = 1,
  TALBOT_TERMINATION_STEP_UNDERFLOW = 2,
} TalbotTermination;

// Opaque grating and beam parameters.
typedef struct TalbotModel TalbotModel;

// Opaque integrated streamline.
typedef struct TalbotStreamline TalbotStreamline;

// Field values at one point. `valid` is 0 where the density is below the
// velocity floor; `v_eff` and `kx_over_k0` are NaN there.
typedef struct TalbotFieldSample {
  double rho;
  double current;
  double v_eff;
  double kx_over_k0;
  uint8_t valid;
} TalbotFieldSample;

// Uniform closed-interval lattice; samples are written row-major with
// rows indexed by z.
typedef struct TalbotGrid {
  double x_min;
  double x_max;
  double z_min;
  double z_max;
  size_t nx;
  size_t nz;
} TalbotGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// Valid until the next call into this library from the same thread.
const char *talbot_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *talbot_version(void);

// Builds a model from de Broglie wavelength, grating period, slit width,
// slit count and Gaussian slit width σ0.
enum TalbotStatus talbot_model_new(double lambda_db,
                                   double period,
                                   double slit_width,
                                   size_t n_slits,
                                   double sigma0,
                                   struct TalbotModel **out);

// Sodium at 16 pm through 50 slits, d = 0.4 µm, w = 0.2 µm, σ0 = w/4.
enum TalbotStatus talbot_model_reference(struct TalbotModel **out);

// Releases a model. Null is ignored.
void talbot_model_free(struct TalbotModel *model);

enum TalbotStatus talbot_model_talbot_distance(const struct TalbotModel *model, double *out);

// Beam width σ_z of a single slit at distance `z`.
enum TalbotStatus talbot_model_beam_width(const struct TalbotModel *model, double z, double *out);

// Density, current and drift velocity at `(x, z)` for decoherence
// strength `lambda`.
enum TalbotStatus talbot_sample(const struct TalbotModel *model,
                                double x,
                                double z,
                                double lambda,
                                struct TalbotFieldSample *out);

// Fills `out[j * nx + i]` with `channel` at `(x_i, z_j)`; invalid velocity
// samples are NaN. `capacity` is the length of `out` in elements.
enum TalbotStatus talbot_evaluate_grid(const struct TalbotModel *model,
                                       const struct TalbotGrid *grid,
                                       double lambda,
                                       enum TalbotChannel channel,
                                       double *out,
                                       size_t capacity);

// Distance where the coherence range falls to the beam width. `found` is
// set to 0 when no crossing lies in the search bracket.
enum TalbotStatus talbot_coherence_crossing(const struct TalbotModel *model,
                                            double lambda,
                                            double *out_z,
                                            uint8_t *found);

// Integrates the streamline through `seed` from `z_start` to `z_end` with
// the default step control, keeping every `sample_stride`-th base step.
enum TalbotStatus talbot_streamline_new(const struct TalbotModel *model,
                                        double seed,
                                        double z_start,
                                        double z_end,
                                        double lambda,
                                        size_t sample_stride,
                                        struct TalbotStreamline **out);

void talbot_streamline_free(struct TalbotStreamline *line);

// Number of recorded samples; 0 for a null handle.
size_t talbot_streamline_len(const struct TalbotStreamline *line);

enum TalbotStatus talbot_streamline_termination(const struct TalbotStreamline *line,
                                                enum TalbotTermination *out);

// Copies the samples into `z_out` and `x_out`, each holding `capacity`
// values.
enum TalbotStatus talbot_streamline_copy(const struct TalbotStreamline *line,
                                         double *z_out,
                                         double *x_out,
                                         size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TALBOT_H */
