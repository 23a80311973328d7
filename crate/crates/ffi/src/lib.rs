//! C ABI for `membrane-core`.
//!
//! Matrices cross the boundary as six doubles in row-major order
//! `[ξ11, ξ12, ξ21, ξ22, ξ31, ξ32]`. Infinite energies are returned as
//! `+INFINITY`. Every function returns a [`MembraneStatus`]; on failure the
//! message is available from [`membrane_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use membrane_core::envelopes::{laminate_envelope, laminate_step, LaminationSearchConfig};
use membrane_core::microstructure::{classify_and_sigma, laminate_energy_quadrature, LaminateGeometry};
use membrane_core::runner::{run_file, RunOptions};
use membrane_core::{
    fiber_relax, fiber_relax_constrained, make_barrier_energy, normal_field, BarrierProfile, Error,
    FiberSolverConfig, Mat32, PlanarDensity, StoredEnergy, Vec2, Vec3,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembraneStatus {
    Ok = 0,
    InvalidArgument = 1,
    Degenerate = 2,
    ResourceLimit = 3,
    Precondition = 4,
    Config = 5,
    Io = 6,
    NullPointer = 7,
    /// A run finished but at least one of its assertions failed.
    AssertionFailed = 8,
    Panic = 9,
}

impl From<&Error> for MembraneStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => MembraneStatus::InvalidArgument,
            Error::Degenerate { .. } => MembraneStatus::Degenerate,
            Error::ResourceLimit(_) => MembraneStatus::ResourceLimit,
            Error::Precondition(_) => MembraneStatus::Precondition,
            Error::Config { .. } | Error::Json(_) => MembraneStatus::Config,
            Error::Io(_) => MembraneStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(MembraneStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(MembraneStatus::from(&e), e.to_string())
    }
}

fn null() -> Failure {
    Failure(MembraneStatus::NullPointer, "null pointer argument".into())
}

/// Runs `body`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(body: F) -> MembraneStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MembraneStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            MembraneStatus::Panic
        }
    }
}

unsafe fn read<const N: usize>(p: *const f64) -> Result<[f64; N], Failure> {
    if p.is_null() {
        return Err(null());
    }
    let mut a = [0.0; N];
    ptr::copy_nonoverlapping(p, a.as_mut_ptr(), N);
    Ok(a)
}

unsafe fn read_mat(p: *const f64) -> Result<Mat32, Failure> {
    let e: [f64; 6] = read(p)?;
    let xi = Mat32::from_rows([[e[0], e[1]], [e[2], e[3]], [e[4], e[5]]]);
    if !xi.is_finite() {
        return Err(Failure(MembraneStatus::InvalidArgument, "matrix entries must be finite".into()));
    }
    Ok(xi)
}

unsafe fn write<T>(p: *mut T, v: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null());
    }
    p.write(v);
    Ok(())
}

/// Opaque stored energy `W(F) = h(det F) + |F|^p` with its fiber solver
/// settings.
pub struct MembraneEnergy {
    w: StoredEnergy,
    solver: FiberSolverConfig,
}

/// Opaque planar density `f: M³ˣ² → [0, +∞]`.
pub struct MembraneDensity {
    f: PlanarDensity,
}

/// Copies the last error message of this thread into `buf` (nul-terminated,
/// truncated to `len`) and returns the full message length, or 0 if there is
/// none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn membrane_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

unsafe fn new_energy(profile: BarrierProfile, p: f64, out: *mut *mut MembraneEnergy) -> MembraneStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let w = make_barrier_energy(profile, p)?;
        let handle = Box::new(MembraneEnergy {
            w,
            solver: FiberSolverConfig::default(),
        });
        write(out, Box::into_raw(handle))
    })
}

/// `h(d) = κ (1/d − 1)²` for `d > 0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn membrane_energy_new_inverse_square(
    kappa: f64,
    p: f64,
    out: *mut *mut MembraneEnergy,
) -> MembraneStatus {
    new_energy(BarrierProfile::InverseSquare { kappa }, p, out)
}

/// `h(d) = κ d^(−exponent)` for `d > 0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn membrane_energy_new_power(
    kappa: f64,
    exponent: f64,
    p: f64,
    out: *mut *mut MembraneEnergy,
) -> MembraneStatus {
    new_energy(BarrierProfile::Power { kappa, exponent }, p, out)
}

/// # Safety
/// `energy` must be null or a handle from a `membrane_energy_new_*` call that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn membrane_energy_free(energy: *mut MembraneEnergy) {
    if !energy.is_null() {
        drop(Box::from_raw(energy));
    }
}

/// `W(F)` for a row-major 3×3 matrix.
///
/// # Safety
/// `energy` must be a live handle, `f` valid for 9 reads, `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn membrane_energy_eval(
    energy: *const MembraneEnergy,
    f: *const f64,
    out: *mut f64,
) -> MembraneStatus {
    guard(|| {
        let h = energy.as_ref().ok_or_else(null)?;
        let e: [f64; 9] = read(f)?;
        let m = membrane_core::Mat33::from_cols(
            Vec3::new(e[0], e[3], e[6]),
            Vec3::new(e[1], e[4], e[7]),
            Vec3::new(e[2], e[5], e[8]),
        );
        write(out, h.w.eval(&m).value())
    })
}

/// `W₀(ξ) = inf_ζ W(ξ|ζ)`.
///
/// # Safety
/// `energy` must be a live handle, `xi` valid for 6 reads, `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn membrane_fiber_relax(
    energy: *const MembraneEnergy,
    xi: *const f64,
    out: *mut f64,
) -> MembraneStatus {
    guard(|| {
        let h = energy.as_ref().ok_or_else(null)?;
        let xi = read_mat(xi)?;
        write(out, fiber_relax(&h.w, &xi, &h.solver).value())
    })
}

/// `inf { W(ξ|ζ) : det(ξ|ζ) ≥ 1/j }`.
///
/// # Safety
/// `energy` must be a live handle, `xi` valid for 6 reads, `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn membrane_fiber_relax_constrained(
    energy: *const MembraneEnergy,
    xi: *const f64,
    j: u64,
    out: *mut f64,
) -> MembraneStatus {
    guard(|| {
        let h = energy.as_ref().ok_or_else(null)?;
        let xi = read_mat(xi)?;
        write(out, fiber_relax_constrained(&h.w, &xi, j, &h.solver)?.value())
    })
}

/// `Φ(ξ) = (ξ₁∧ξ₂)/|ξ₁∧ξ₂|²` written to `out[0..3]`.
///
/// # Safety
/// `xi` must be valid for 6 reads and `out` for 3 writes.
#[no_mangle]
pub unsafe extern "C" fn membrane_normal_field(xi: *const f64, out: *mut f64) -> MembraneStatus {
    guard(|| {
        let xi = read_mat(xi)?;
        if out.is_null() {
            return Err(null());
        }
        let phi = normal_field(&xi)?;
        ptr::copy_nonoverlapping(phi.to_array().as_ptr(), out, 3);
        Ok(())
    })
}

unsafe fn new_density(f: PlanarDensity, out: *mut *mut MembraneDensity) -> Result<(), Failure> {
    write(out, Box::into_raw(Box::new(MembraneDensity { f })))
}

/// The fiber relaxation `W₀` of `energy` as a planar density.
///
/// # Safety
/// `energy` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn membrane_density_new_fiber(
    energy: *const MembraneEnergy,
    out: *mut *mut MembraneDensity,
) -> MembraneStatus {
    guard(|| {
        let h = energy.as_ref().ok_or_else(null)?;
        new_density(PlanarDensity::fiber(h.w, h.solver), out)
    })
}

/// `min(|ξ − A|², |ξ − B|²)`.
///
/// # Safety
/// `well_a` and `well_b` must be valid for 6 reads and `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn membrane_density_new_double_well(
    well_a: *const f64,
    well_b: *const f64,
    out: *mut *mut MembraneDensity,
) -> MembraneStatus {
    guard(|| {
        let a = read_mat(well_a)?;
        let b = read_mat(well_b)?;
        new_density(PlanarDensity::double_well(a, b), out)
    })
}

/// `|ξ|²`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn membrane_density_new_squared_norm(out: *mut *mut MembraneDensity) -> MembraneStatus {
    guard(|| new_density(PlanarDensity::squared_norm(), out))
}

/// # Safety
/// `density` must be null or a live handle from a `membrane_density_new_*`
/// call.
#[no_mangle]
pub unsafe extern "C" fn membrane_density_free(density: *mut MembraneDensity) {
    if !density.is_null() {
        drop(Box::from_raw(density));
    }
}

/// # Safety
/// `density` must be a live handle, `xi` valid for 6 reads, `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn membrane_density_eval(
    density: *const MembraneDensity,
    xi: *const f64,
    out: *mut f64,
) -> MembraneStatus {
    guard(|| {
        let d = density.as_ref().ok_or_else(null)?;
        let xi = read_mat(xi)?;
        write(out, d.f.eval(&xi).value())
    })
}

/// One lamination step with the default search grids. The minimizing split
/// is written to `params` as `[a₁, a₂, b₁, b₂, b₃, t]`; `params` may be null.
///
/// # Safety
/// `density` must be a live handle, `xi` valid for 6 reads, `value` for a
/// write and `params` null or valid for 6 writes.
#[no_mangle]
pub unsafe extern "C" fn membrane_laminate_step(
    density: *const MembraneDensity,
    xi: *const f64,
    value: *mut f64,
    params: *mut f64,
) -> MembraneStatus {
    guard(|| {
        let d = density.as_ref().ok_or_else(null)?;
        let xi = read_mat(xi)?;
        if value.is_null() {
            return Err(null());
        }
        let (v, p) = laminate_step(&d.f, &xi, &LaminationSearchConfig::default())?;
        write(value, v.value())?;
        if !params.is_null() {
            let a = [p.a.x, p.a.y, p.b.x, p.b.y, p.b.z, p.t];
            ptr::copy_nonoverlapping(a.as_ptr(), params, 6);
        }
        Ok(())
    })
}

/// `R₁ f(ξ), …, R_depth f(ξ)` with the default search grids, written to
/// `out[0..depth]`.
///
/// # Safety
/// `density` must be a live handle, `xi` valid for 6 reads and `out` for
/// `depth` writes.
#[no_mangle]
pub unsafe extern "C" fn membrane_laminate_envelope(
    density: *const MembraneDensity,
    xi: *const f64,
    depth: usize,
    out: *mut f64,
) -> MembraneStatus {
    guard(|| {
        let d = density.as_ref().ok_or_else(null)?;
        let xi = read_mat(xi)?;
        if out.is_null() {
            return Err(null());
        }
        let values = laminate_envelope(&d.f, &xi, depth, &LaminationSearchConfig::default())?;
        for (k, v) in values.iter().enumerate() {
            out.add(k).write(v.value());
        }
        Ok(())
    })
}

/// `∫_Y f(ξ + ∇(σₙ b))` for the zig-zag laminate with `n` strips, volume
/// fraction `t` and lamination direction at `angle`.
///
/// # Safety
/// `density` must be a live handle, `xi` valid for 6 reads, `b` for 3 reads
/// and `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn membrane_laminate_energy(
    density: *const MembraneDensity,
    xi: *const f64,
    n: usize,
    t: f64,
    angle: f64,
    b: *const f64,
    out: *mut f64,
) -> MembraneStatus {
    guard(|| {
        let d = density.as_ref().ok_or_else(null)?;
        let xi = read_mat(xi)?;
        let b = Vec3::from_array(read(b)?);
        let geom = LaminateGeometry::with_angle(n, t, angle)?;
        write(out, laminate_energy_quadrature(&d.f, &xi, &geom, b).value())
    })
}

/// `σₙ(x)` and its gradient (written to `gradient[0..2]`, may be null) in
/// the unrotated frame.
///
/// # Safety
/// `value` must be valid for a write and `gradient` null or valid for 2
/// writes.
#[no_mangle]
pub unsafe extern "C" fn membrane_sigma(
    n: usize,
    t: f64,
    x1: f64,
    x2: f64,
    value: *mut f64,
    gradient: *mut f64,
) -> MembraneStatus {
    guard(|| {
        let geom = LaminateGeometry::new(n, t)?;
        let s = classify_and_sigma(&geom, Vec2::new(x1, x2))?;
        write(value, s.value)?;
        if !gradient.is_null() {
            gradient.write(s.gradient.x);
            gradient.add(1).write(s.gradient.y);
        }
        Ok(())
    })
}

/// Runs a JSON configuration like `membrane run`. `out_dir` may be null;
/// `seed` overrides the configured seed when `has_seed` is nonzero.
/// `threads = 0` keeps the configured value. Returns
/// [`MembraneStatus::AssertionFailed`] when the run completed with failing
/// checks.
///
/// # Safety
/// `config_path` must be a nul-terminated string; `out_dir` null or
/// nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn membrane_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    has_seed: i32,
    seed: u64,
    threads: usize,
) -> MembraneStatus {
    let mut failed = false;
    let status = guard(|| {
        if config_path.is_null() {
            return Err(null());
        }
        let path = CStr::from_ptr(config_path)
            .to_str()
            .map_err(|_| Failure(MembraneStatus::InvalidArgument, "config path is not UTF-8".into()))?;
        let out = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(CStr::from_ptr(out_dir).to_str().map_err(|_| {
                Failure(MembraneStatus::InvalidArgument, "output directory is not UTF-8".into())
            })?))
        };
        let opts = RunOptions {
            out,
            seed: (has_seed != 0).then_some(seed),
            threads: (threads > 0).then_some(threads),
        };
        let summary = run_file(path.as_ref(), &opts)?;
        if !summary.passed {
            let names: Vec<&str> = summary.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            set_error(format!("failed checks: {}", names.join(", ")));
            failed = true;
        }
        Ok(())
    });
    if status == MembraneStatus::Ok && failed {
        MembraneStatus::AssertionFailed
    } else {
        status
    }
}
