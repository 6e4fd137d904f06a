//! C ABI over the `rfiqkd` library.
//!
//! Every fallible function returns an [`RfiStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`rfi_last_error_message`]. Channels and counts are opaque
//! handles created and freed by this library.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rfiqkd::channel::{self, ChannelParams, PerBasis, SourceParams};
use rfiqkd::finite_key::{CountsSet, KeyMode, SecurityParams};
use rfiqkd::optimizer::{optimize_rate, OptimizerSettings, RateProblem};
use rfiqkd::pipeline::{self, BoundStatus, PipelineError};
use rfiqkd::rfi::{self, ErrorRates, MeasurementStatistics, ProtocolVariant};
use rfiqkd::sdp::{SolverOptions, DEFAULT_RELAXATION};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    SolverFailed = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfiVariant {
    Six = 0,
    Four = 1,
    Three = 2,
    Bb84 = 3,
}

impl From<RfiVariant> for ProtocolVariant {
    fn from(v: RfiVariant) -> Self {
        match v {
            RfiVariant::Six => ProtocolVariant::SixState,
            RfiVariant::Four => ProtocolVariant::FourState,
            RfiVariant::Three => ProtocolVariant::ThreeState,
            RfiVariant::Bb84 => ProtocolVariant::Bb84ThreeState,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfiKeyMode {
    Finite = 0,
    Asymptotic = 1,
}

impl From<RfiKeyMode> for KeyMode {
    fn from(m: RfiKeyMode) -> Self {
        match m {
            RfiKeyMode::Finite => KeyMode::Finite,
            RfiKeyMode::Asymptotic => KeyMode::Asymptotic,
        }
    }
}

/// Source settings with ω = 0; the basis split follows the variant.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfiSource {
    pub pr_z: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub mu: f64,
    pub nu: f64,
    pub n_pulses: f64,
}

impl RfiSource {
    fn to_params(self, variant: ProtocolVariant) -> SourceParams {
        SourceParams::for_variant(variant, self.pr_z, self.p_mu, self.p_nu, self.mu, self.nu, self.n_pulses)
    }
}

/// Observed error rates. Set entries a variant does not measure to NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfiErrorRates {
    pub e_zz: f64,
    pub e_xx: f64,
    pub e_xy: f64,
    pub e_yx: f64,
    pub e_yy: f64,
}

/// Counts analysis result. `c_l` is NaN when no bound was computed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfiReport {
    pub s_zz_0: f64,
    pub s_zz_1: f64,
    pub e_zz_1: f64,
    pub c_l: f64,
    pub i_e: f64,
    pub e_obs_zz: f64,
    pub key_length: f64,
    pub rate: f64,
    /// 0 ok, 1 no single-photon events, 2 QBER too high, 3 solver failed.
    pub bound_status: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfiOptimum {
    pub pr_z: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub mu: f64,
    pub nu: f64,
    pub rate: f64,
}

/// Opaque channel model handle.
pub struct RfiChannel(ChannelParams);

/// Opaque counts handle.
pub struct RfiCounts(CountsSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: RfiStatus, msg: impl Into<String>) -> RfiStatus {
    set_error(msg);
    status
}

fn pipeline_status(e: &PipelineError) -> RfiStatus {
    match e {
        PipelineError::Counts(_) | PipelineError::FiniteKey(_) => RfiStatus::DataError,
        PipelineError::Rfi(_) => RfiStatus::SolverFailed,
        PipelineError::Channel(_) | PipelineError::AsymptoticOnly(_) => RfiStatus::InvalidArgument,
    }
}

/// Runs `body` with panics turned into [`RfiStatus::Panic`].
fn guarded(body: impl FnOnce() -> RfiStatus) -> RfiStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(RfiStatus::Panic, "internal panic"),
    }
}

macro_rules! deref {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_ref() } {
            Some(v) => v,
            None => return fail(RfiStatus::NullPointer, concat!($name, " is NULL")),
        }
    };
}

macro_rules! out {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_mut() } {
            Some(v) => v,
            None => return fail(RfiStatus::NullPointer, concat!($name, " is NULL")),
        }
    };
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rfi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rfi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New channel with the default device parameters at distance 0.
#[no_mangle]
pub extern "C" fn rfi_channel_new() -> *mut RfiChannel {
    Box::into_raw(Box::new(RfiChannel(ChannelParams::default())))
}

/// # Safety
/// `channel` must come from [`rfi_channel_new`] and not be freed already. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn rfi_channel_free(channel: *mut RfiChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// Sets the fibre length and clears any fixed attenuation.
///
/// # Safety
/// `channel` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rfi_channel_set_distance(channel: *mut RfiChannel, km: f64) -> RfiStatus {
    let ch = out!(channel, "channel");
    let next = ch.0.at_distance(km);
    if let Err(e) = next.validate() {
        return fail(RfiStatus::InvalidArgument, e.to_string());
    }
    ch.0 = next;
    RfiStatus::Ok
}

/// Fixes the total link attenuation in dB, overriding the distance.
///
/// # Safety
/// `channel` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rfi_channel_set_attenuation(channel: *mut RfiChannel, db: f64) -> RfiStatus {
    let ch = out!(channel, "channel");
    let next = ChannelParams { attenuation_db: Some(db), ..ch.0 };
    if let Err(e) = next.validate() {
        return fail(RfiStatus::InvalidArgument, e.to_string());
    }
    ch.0 = next;
    RfiStatus::Ok
}

/// Sets frame rotation, optical error, extra loss on Bob's Z arm in dB.
///
/// # Safety
/// `channel` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rfi_channel_configure(
    channel: *mut RfiChannel,
    beta: f64,
    e_o: f64,
    z_excess_loss_db: f64,
) -> RfiStatus {
    let ch = out!(channel, "channel");
    let next = ChannelParams { beta, e_o, excess_loss_db: PerBasis { z: z_excess_loss_db, ..ch.0.excess_loss_db }, ..ch.0 };
    if let Err(e) = next.validate() {
        return fail(RfiStatus::InvalidArgument, e.to_string());
    }
    ch.0 = next;
    RfiStatus::Ok
}

/// C_L from observed error rates (error-rate mode of the SDP).
///
/// # Safety
/// `rates` and `out` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn rfi_c_lower_bound(
    variant: RfiVariant,
    rates: *const RfiErrorRates,
    out: *mut f64,
) -> RfiStatus {
    guarded(|| {
        let r = deref!(rates, "rates");
        let out = out!(out, "out");
        let opt = |x: f64| if x.is_nan() { None } else { Some(x) };
        let stats = MeasurementStatistics::ErrorRates(ErrorRates {
            e_zz: r.e_zz,
            e_xx: r.e_xx,
            e_xy: opt(r.e_xy),
            e_yx: opt(r.e_yx),
            e_yy: opt(r.e_yy),
        });
        match rfi::c_lower_bound(variant.into(), &stats, DEFAULT_RELAXATION, &SolverOptions::default()) {
            Ok(c) => {
                *out = c;
                RfiStatus::Ok
            }
            Err(e) => fail(RfiStatus::SolverFailed, e.to_string()),
        }
    })
}

/// Reads a counts file. The new handle is written to `out`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn rfi_counts_read(path: *const c_char, out: *mut *mut RfiCounts) -> RfiStatus {
    guarded(|| {
        let out = out!(out, "out");
        if path.is_null() {
            return fail(RfiStatus::NullPointer, "path is NULL");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(RfiStatus::InvalidArgument, "path is not UTF-8");
        };
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) => return fail(RfiStatus::Io, format!("{path}: {e}")),
        };
        match CountsSet::read_csv(file) {
            Ok(set) => {
                *out = Box::into_raw(Box::new(RfiCounts(set)));
                RfiStatus::Ok
            }
            Err(e) => fail(RfiStatus::DataError, format!("{path}: {e}")),
        }
    })
}

/// Expected counts of the channel model for `source`.
///
/// # Safety
/// `channel`, `source` and `out` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn rfi_counts_expected(
    variant: RfiVariant,
    channel: *const RfiChannel,
    source: *const RfiSource,
    out: *mut *mut RfiCounts,
) -> RfiStatus {
    guarded(|| {
        let ch = deref!(channel, "channel");
        let src = deref!(source, "source");
        let out = out!(out, "out");
        let v: ProtocolVariant = variant.into();
        match channel::expected_counts(v, &ch.0, &src.to_params(v)) {
            Ok(set) => {
                *out = Box::into_raw(Box::new(RfiCounts(set)));
                RfiStatus::Ok
            }
            Err(e) => fail(RfiStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `counts` must come from this library and not be freed already. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn rfi_counts_free(counts: *mut RfiCounts) {
    if !counts.is_null() {
        drop(Box::from_raw(counts));
    }
}

/// Decoy estimation, C_L and key rate for `counts`, with ε = 1e-10 and f = 1.16.
///
/// # Safety
/// `counts`, `source` and `out` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn rfi_analyze_counts(
    variant: RfiVariant,
    counts: *const RfiCounts,
    source: *const RfiSource,
    mode: RfiKeyMode,
    out: *mut RfiReport,
) -> RfiStatus {
    guarded(|| {
        let counts = deref!(counts, "counts");
        let src = deref!(source, "source");
        let out = out!(out, "out");
        let v: ProtocolVariant = variant.into();
        let report = match pipeline::analyze_counts(
            v,
            &counts.0,
            &src.to_params(v),
            &SecurityParams::default(),
            mode.into(),
            DEFAULT_RELAXATION,
        ) {
            Ok(r) => r,
            Err(e) => return fail(pipeline_status(&e), e.to_string()),
        };
        *out = RfiReport {
            s_zz_0: report.estimate.s_zz_0,
            s_zz_1: report.estimate.s_zz_1,
            e_zz_1: report.estimate.e_zz_1,
            c_l: report.c_l.unwrap_or(f64::NAN),
            i_e: report.i_e,
            e_obs_zz: report.e_obs_zz,
            key_length: report.key_length,
            rate: report.rate,
            bound_status: match report.status {
                BoundStatus::Ok => 0,
                BoundStatus::NoSinglePhotonEvents => 1,
                BoundStatus::QberTooHigh => 2,
                BoundStatus::SolverFailed => 3,
            },
        };
        RfiStatus::Ok
    })
}

/// Maximizes the key rate over (Pr_Z, p_μ, p_ν, μ, ν) for the channel.
///
/// # Safety
/// `channel` and `out` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn rfi_optimize_rate(
    variant: RfiVariant,
    channel: *const RfiChannel,
    mode: RfiKeyMode,
    n_pulses: f64,
    out: *mut RfiOptimum,
) -> RfiStatus {
    guarded(|| {
        let ch = deref!(channel, "channel");
        let out = out!(out, "out");
        if !(n_pulses > 0.0 && n_pulses.is_finite()) {
            return fail(RfiStatus::InvalidArgument, "n_pulses must be positive");
        }
        let problem = RateProblem {
            variant: variant.into(),
            channel: ch.0,
            security: SecurityParams::default(),
            n_pulses,
            mode: mode.into(),
        };
        match optimize_rate(&problem, &OptimizerSettings::default()) {
            Ok(r) => {
                let p = r.params;
                *out = RfiOptimum { pr_z: p.pr_z, p_mu: p.p_mu, p_nu: p.p_nu, mu: p.mu, nu: p.nu, rate: r.rate };
                RfiStatus::Ok
            }
            Err(e) => fail(pipeline_status(&e), e.to_string()),
        }
    })
}
