//! C ABI for the controller toolkit: drive the surrogate plant and run
//! trained controllers loaded from checkpoint files.
//!
//! Every function returns `MEMCTRL_OK` (0) or a negative error code;
//! `memctrl_error_name` maps codes to static names and
//! `memctrl_last_error_message` returns the detail text of the most
//! recent failure on the calling thread. Handles are opaque and must be
//! released with their matching `_free` function exactly once.

use memctrl::checkpoint::Checkpoint;
use memctrl::harness::{Controller, Obs, ObsMode};
use memctrl::plant::{Plant, PlantConfig, SurrogateFinger};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

pub const MEMCTRL_OK: i32 = 0;
/// A required pointer argument was null.
pub const MEMCTRL_ERR_NULL_ARGUMENT: i32 = -1;
/// A string argument was not valid UTF-8.
pub const MEMCTRL_ERR_UTF8: i32 = -2;
/// Reading or writing a file failed.
pub const MEMCTRL_ERR_IO: i32 = -3;
/// A file's contents were malformed.
pub const MEMCTRL_ERR_FORMAT: i32 = -4;
/// A configuration value was invalid.
pub const MEMCTRL_ERR_CONFIG: i32 = -5;
/// A runtime input was invalid.
pub const MEMCTRL_ERR_INPUT: i32 = -6;
/// A numeric operation produced a non-finite value.
pub const MEMCTRL_ERR_TRAINING: i32 = -7;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn code_for(err: &memctrl::Error) -> i32 {
    match err {
        memctrl::Error::Config(_) => MEMCTRL_ERR_CONFIG,
        memctrl::Error::Input(_) => MEMCTRL_ERR_INPUT,
        memctrl::Error::Format(_) => MEMCTRL_ERR_FORMAT,
        memctrl::Error::Training(_) => MEMCTRL_ERR_TRAINING,
        memctrl::Error::Io(_) => MEMCTRL_ERR_IO,
    }
}

fn fail(err: &memctrl::Error) -> i32 {
    set_last_error(&err.to_string());
    code_for(err)
}

fn fail_null(what: &str) -> i32 {
    set_last_error(&format!("{what} must not be null"));
    MEMCTRL_ERR_NULL_ARGUMENT
}

/// Opaque simulated plant handle.
pub struct MemctrlPlant {
    inner: SurrogateFinger,
}

/// Opaque controller handle with its episode step counter.
pub struct MemctrlController {
    inner: Box<dyn Controller>,
    t: usize,
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn memctrl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns the static name of an error code, or "unknown" for codes
/// this library never returns.
#[no_mangle]
pub extern "C" fn memctrl_error_name(code: i32) -> *const c_char {
    let name: &'static str = match code {
        MEMCTRL_OK => "ok\0",
        MEMCTRL_ERR_NULL_ARGUMENT => "null argument\0",
        MEMCTRL_ERR_UTF8 => "invalid utf-8\0",
        MEMCTRL_ERR_IO => "io error\0",
        MEMCTRL_ERR_FORMAT => "format error\0",
        MEMCTRL_ERR_CONFIG => "config error\0",
        MEMCTRL_ERR_INPUT => "input error\0",
        MEMCTRL_ERR_TRAINING => "training error\0",
        _ => "unknown\0",
    };
    name.as_ptr() as *const c_char
}

/// Returns the detail message of the most recent failure on the calling
/// thread, or an empty string. The pointer stays valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn memctrl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates a plant from explicit parameters.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn memctrl_plant_new(
    alpha: f64,
    theta_max: f64,
    u_scale: f64,
    u_min: f64,
    u_max: f64,
    noise_std: f64,
    seed: u64,
    out: *mut *mut MemctrlPlant,
) -> i32 {
    if out.is_null() {
        return fail_null("out");
    }
    let config = PlantConfig { alpha, theta_max, u_scale, u_min, u_max, noise_std, seed };
    match SurrogateFinger::new(config) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(MemctrlPlant { inner }));
            MEMCTRL_OK
        }
        Err(e) => fail(&e),
    }
}

/// Creates a plant with the default parameters.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn memctrl_plant_default(out: *mut *mut MemctrlPlant) -> i32 {
    let d = PlantConfig::default();
    memctrl_plant_new(
        d.alpha, d.theta_max, d.u_scale, d.u_min, d.u_max, d.noise_std, d.seed, out,
    )
}

/// Returns the plant to its rest state and reseeds its noise source.
///
/// # Safety
/// `plant` must be a live handle from a `memctrl_plant_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn memctrl_plant_reset(plant: *mut MemctrlPlant) -> i32 {
    let Some(plant) = plant.as_mut() else {
        return fail_null("plant");
    };
    plant.inner.reset();
    MEMCTRL_OK
}

/// Advances the plant one step under actuation `u` (kPa, clamped
/// internally) and writes the observed angle to `theta_out`.
///
/// # Safety
/// `plant` must be a live handle and `theta_out` a valid pointer to
/// writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn memctrl_plant_step(
    plant: *mut MemctrlPlant,
    u: f64,
    theta_out: *mut f64,
) -> i32 {
    let Some(plant) = plant.as_mut() else {
        return fail_null("plant");
    };
    if theta_out.is_null() {
        return fail_null("theta_out");
    }
    match plant.inner.step(u) {
        Ok(state) => {
            *theta_out = state.theta;
            MEMCTRL_OK
        }
        Err(e) => fail(&e),
    }
}

/// Shifts the plant's internal angle by `delta` degrees, modelling an
/// external poke.
///
/// # Safety
/// `plant` must be a live handle from a `memctrl_plant_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn memctrl_plant_nudge(plant: *mut MemctrlPlant, delta: f64) -> i32 {
    let Some(plant) = plant.as_mut() else {
        return fail_null("plant");
    };
    plant.inner.nudge(delta);
    MEMCTRL_OK
}

/// Releases a plant handle. A null handle is ignored.
///
/// # Safety
/// `plant` must be null or a live handle; it must not be used after
/// this call.
#[no_mangle]
pub unsafe extern "C" fn memctrl_plant_free(plant: *mut MemctrlPlant) {
    if !plant.is_null() {
        drop(Box::from_raw(plant));
    }
}

/// Loads a controller from a checkpoint file. `open_loop` selects the
/// reference-only inverse-model controller and is rejected for other
/// checkpoint kinds. `u_min`/`u_max` set the actuation clamp the
/// controller works against, normally the plant's limits.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn memctrl_controller_load(
    path: *const c_char,
    open_loop: bool,
    u_min: f64,
    u_max: f64,
    out: *mut *mut MemctrlController,
) -> i32 {
    if path.is_null() {
        return fail_null("path");
    }
    if out.is_null() {
        return fail_null("out");
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        set_last_error("path is not valid utf-8");
        return MEMCTRL_ERR_UTF8;
    };
    let checkpoint = match Checkpoint::load(Path::new(path)) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match checkpoint.payload.controller(open_loop, (u_min, u_max)) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(MemctrlController { inner, t: 0 }));
            MEMCTRL_OK
        }
        Err(e) => fail(&e),
    }
}

/// Clears the controller's internal state for a fresh episode.
///
/// # Safety
/// `controller` must be a live handle from `memctrl_controller_load`.
#[no_mangle]
pub unsafe extern "C" fn memctrl_controller_reset(controller: *mut MemctrlController) -> i32 {
    let Some(controller) = controller.as_mut() else {
        return fail_null("controller");
    };
    controller.inner.reset();
    controller.t = 0;
    MEMCTRL_OK
}

/// Computes the actuation for one step and writes it to `u_out`.
/// `theta` is the measured angle; open-loop controllers ignore it.
/// `ref_now` and `ref_next` are the reference angles for this step and
/// the next.
///
/// # Safety
/// `controller` must be a live handle and `u_out` a valid pointer to
/// writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn memctrl_controller_act(
    controller: *mut MemctrlController,
    theta: f64,
    ref_now: f64,
    ref_next: f64,
    u_out: *mut f64,
) -> i32 {
    let Some(controller) = controller.as_mut() else {
        return fail_null("controller");
    };
    if u_out.is_null() {
        return fail_null("u_out");
    }
    let obs = Obs {
        t: controller.t,
        theta: match controller.inner.obs_mode() {
            ObsMode::Measured => Some(theta),
            ObsMode::ReferenceOnly => None,
        },
        ref_now,
        ref_next,
    };
    match controller.inner.act(&obs) {
        Ok(u) => {
            controller.t += 1;
            *u_out = u;
            MEMCTRL_OK
        }
        Err(e) => fail(&e),
    }
}

/// Releases a controller handle. A null handle is ignored.
///
/// # Safety
/// `controller` must be null or a live handle; it must not be used
/// after this call.
#[no_mangle]
pub unsafe extern "C" fn memctrl_controller_free(controller: *mut MemctrlController) {
    if !controller.is_null() {
        drop(Box::from_raw(controller));
    }
}
