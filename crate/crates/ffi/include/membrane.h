#ifndef MEMBRANE_H
#define MEMBRANE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum MembraneStatus {
  MEMBRANE_STATUS_OK = 0,
  MEMBRANE_STATUS_INVALID_ARGUMENT = 1,
  MEMBRANE_STATUS_DEGENERATE = 2,
  MEMBRANE_STATUS_RESOURCE_LIMIT = 3,
  MEMBRANE_STATUS_PRECONDITION = 4,
  MEMBRANE_STATUS_CONFIG = 5,
  MEMBRANE_STATUS_IO = 6,
  MEMBRANE_STATUS_NULL_POINTER = 7,
  // A run finished but at least one of its assertions failed.
  MEMBRANE_STATUS_ASSERTION_FAILED = 8,
  MEMBRANE_STATUS_PANIC = 9,
} MembraneStatus;

// Opaque planar density `f: M³ˣ² → [0, +∞]`.
typedef struct MembraneDensity MembraneDensity;

// Opaque stored energy `W(F) = h(det F) + |F|^p` with its fiber solver
// settings.
typedef struct MembraneEnergy MembraneEnergy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (nul-terminated,
// truncated to `len`) and returns the full message length, or 0 if there is
// none.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
uintptr_t membrane_last_error(char *buf, uintptr_t len);

// `h(d) = κ (1/d − 1)²` for `d > 0`.
//
// # Safety
// `out` must be valid for writes.
enum MembraneStatus membrane_energy_new_inverse_square(double kappa,
                                                       double p,
                                                       struct MembraneEnergy **out);

// `h(d) = κ d^(−exponent)` for `d > 0`.
//
// # Safety
// `out` must be valid for writes.
enum MembraneStatus membrane_energy_new_power(double kappa,
                                              double exponent,
                                              double p,
                                              struct MembraneEnergy **out);

// # Safety
// `energy` must be null or a handle from a `membrane_energy_new_*` call that
// has not been freed.
void membrane_energy_free(struct MembraneEnergy *energy);

// `W(F)` for a row-major 3×3 matrix.
//
// # Safety
// `energy` must be a live handle, `f` valid for 9 reads, `out` for a write.
enum MembraneStatus membrane_energy_eval(const struct MembraneEnergy *energy,
                                         const double *f,
                                         double *out);

// `W₀(ξ) = inf_ζ W(ξ|ζ)`.
//
// # Safety
// `energy` must be a live handle, `xi` valid for 6 reads, `out` for a write.
enum MembraneStatus membrane_fiber_relax(const struct MembraneEnergy *energy,
                                         const double *xi,
                                         double *out);

// `inf { W(ξ|ζ) : det(ξ|ζ) ≥ 1/j }`.
//
// # Safety
// `energy` must be a live handle, `xi` valid for 6 reads, `out` for a write.
enum MembraneStatus membrane_fiber_relax_constrained(const struct MembraneEnergy *energy,
                                                     const double *xi,
                                                     uint64_t j,
                                                     double *out);

// `Φ(ξ) = (ξ₁∧ξ₂)/|ξ₁∧ξ₂|²` written to `out[0..3]`.
//
// # Safety
// `xi` must be valid for 6 reads and `out` for 3 writes.
enum MembraneStatus membrane_normal_field(const double *xi, double *out);

// The fiber relaxation `W₀` of `energy` as a planar density.
//
// # Safety
// `energy` must be a live handle and `out` valid for a write.
enum MembraneStatus membrane_density_new_fiber(const struct MembraneEnergy *energy,
                                               struct MembraneDensity **out);

// `min(|ξ − A|², |ξ − B|²)`.
//
// # Safety
// `well_a` and `well_b` must be valid for 6 reads and `out` for a write.
enum MembraneStatus membrane_density_new_double_well(const double *well_a,
                                                     const double *well_b,
                                                     struct MembraneDensity **out);

// `|ξ|²`.
//
// # Safety
// `out` must be valid for a write.
enum MembraneStatus membrane_density_new_squared_norm(struct MembraneDensity **out);

// # Safety
// `density` must be null or a live handle from a `membrane_density_new_*`
// call.
void membrane_density_free(struct MembraneDensity *density);

// # Safety
// `density` must be a live handle, `xi` valid for 6 reads, `out` for a write.
enum MembraneStatus membrane_density_eval(const struct MembraneDensity *density,
                                          const double *xi,
                                          double *out);

// One lamination step with the default search grids. The minimizing split
// is written to `params` as `[a₁, a₂, b₁, b₂, b₃, t]`; `params` may be null.
//
// # Safety
// `density` must be a live handle, `xi` valid for 6 reads, `value` for a
// write and `params` null or valid for 6 writes.
enum MembraneStatus membrane_laminate_step(const struct MembraneDensity *density,
                                           const double *xi,
                                           double *value,
                                           double *params);

// `R₁ f(ξ), …, R_depth f(ξ)` with the default search grids, written to
// `out[0..depth]`.
//
// # Safety
// `density` must be a live handle, `xi` valid for 6 reads and `out` for
// `depth` writes.
enum MembraneStatus membrane_laminate_envelope(const struct MembraneDensity *density,
                                               const double *xi,
                                               uintptr_t depth,
                                               double *out);

// `∫_Y f(ξ + ∇(σₙ b))` for the zig-zag laminate with `n` strips, volume
// fraction `t` and lamination direction at `angle`.
//
// # Safety
// `density` must be a live handle, `xi` valid for 6 reads, `b` for 3 reads
// and `out` for a write.
enum MembraneStatus membrane_laminate_energy(const struct MembraneDensity *density,
                                             const double *xi,
                                             uintptr_t n,
                                             double t,
                                             double angle,
                                             const double *b,
                                             double *out);

// `σₙ(x)` and its gradient (written to `gradient[0..2]`, may be null) in
// the unrotated frame.
//
// # Safety
// `value` must be valid for a write and `gradient` null or valid for 2
// writes.
enum MembraneStatus membrane_sigma(uintptr_t n,
                                   double t,
                                   double x1,
                                   double x2,
                                   double *value,
                                   double *gradient);

// Runs a JSON configuration like `membrane run`. `out_dir` may be null;
// `seed` overrides the configured seed when `has_seed` is nonzero.
// `threads = 0` keeps the configured value. Returns
// [`MembraneStatus::AssertionFailed`] when the run completed with failing
// checks.
//
// # Safety
// `config_path` must be a nul-terminated string; `out_dir` null or
// nul-terminated.
enum MembraneStatus membrane_run_config(const char *config_path,
                                        const char *out_dir,
                                        int32_t has_seed,
                                        uint64_t seed,
                                        uintptr_t threads);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MEMBRANE_H */
