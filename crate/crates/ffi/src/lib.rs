//! C ABI over `tec-core`.
//!
//! Every fallible call returns a [`TecStatus`]; on failure a description is
//! available from [`tec_last_error_message`] on the same thread. Objects are
//! opaque handles released with their matching `*_free`. Byte results come
//! back as a [`TecBuffer`] owned by the caller and released with
//! [`tec_buffer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use num_bigint::BigUint;
use tec_core::cryptanalysis::{paper_try_count, TryCountModel};
use tec_core::password_store::{HostConfig, Identifier, PasswordStore, StoreError};
use tec_core::stego_codec::{open, seal, Ciphertext, CodecError};
use tec_core::keystream::admissible_multiplier;
use tec_core::{derive_seed, DigitStream, KeySpec, KeystreamError, TranscendentalBase};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TecStatus {
    TecOk = 0,
    TecNullPointer = 1,
    TecInvalidArgument = 2,
    TecKeystreamError = 3,
    TecCodecError = 4,
    TecStoreCorrupt = 5,
    TecStoreError = 6,
    TecIoError = 7,
    TecPanic = 8,
}

/// Base selector: 0 = pi, 1 = e, 2 = ln 2.
pub type TecBase = u8;

/// Try-count model selector: 0 = (2^2)^n, 1 = (2^3)^n, 2 = exact slot count 210^n.
pub type TecTryCountModel = u8;

pub struct TecKeySpec(KeySpec);

pub struct TecStream(DigitStream);

pub struct TecCiphertext(Ciphertext);

pub struct TecStore(PasswordStore);

/// Heap bytes handed to C. Release with `tec_buffer_free`.
#[repr(C)]
pub struct TecBuffer {
    pub data: *mut u8,
    pub len: usize,
}

impl TecBuffer {
    fn empty() -> Self {
        Self {
            data: ptr::null_mut(),
            len: 0,
        }
    }

    fn from_vec(v: Vec<u8>) -> Self {
        let boxed = v.into_boxed_slice();
        let len = boxed.len();
        Self {
            data: Box::into_raw(boxed) as *mut u8,
            len,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TecStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(TecStatus::TecNullPointer, format!("{what} is null"))
    }

    fn arg(msg: impl Into<String>) -> Self {
        Failure(TecStatus::TecInvalidArgument, msg.into())
    }
}

impl From<KeystreamError> for Failure {
    fn from(e: KeystreamError) -> Self {
        Failure(TecStatus::TecKeystreamError, e.to_string())
    }
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        Failure(TecStatus::TecCodecError, e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::StoreCorrupt(_) => TecStatus::TecStoreCorrupt,
            StoreError::Io(_) => TecStatus::TecIoError,
            _ => TecStatus::TecStoreError,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            TecStatus::TecOk
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside tec".into());
            TecStatus::TecPanic
        }
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize, what: &str) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure::arg(format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

fn decimal(s: &str) -> Result<BigUint, Failure> {
    BigUint::parse_bytes(s.trim().as_bytes(), 10).ok_or_else(|| Failure::arg(format!("`{s}` is not a decimal integer")))
}

fn base(tag: TecBase) -> Result<TranscendentalBase, Failure> {
    TranscendentalBase::from_tag(tag).ok_or_else(|| Failure::arg(format!("unknown base {tag}")))
}

fn host_config(secret: *const c_char, use_fib: bool) -> Result<HostConfig, Failure> {
    let mut cfg = HostConfig::new(decimal(unsafe { text(secret, "host secret") }?)?);
    cfg.use_fib = use_fib;
    Ok(cfg)
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next `tec_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tec_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `seed_decimal` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_keyspec_new(
    base_tag: TecBase,
    seed_decimal: *const c_char,
    out: *mut *mut TecKeySpec,
) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let seed = decimal(text(seed_decimal, "seed")?)?;
        if !admissible_multiplier(&seed) {
            return Err(KeystreamError::InvalidSeed.into());
        }
        *out = Box::into_raw(Box::new(TecKeySpec(KeySpec::new(base(base_tag)?, seed))));
        Ok(())
    })
}

/// Key whose multiplier is derived from identifier bytes and a millisecond timestamp.
///
/// # Safety
/// `identifier` must point to `identifier_len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_keyspec_from_identifier(
    base_tag: TecBase,
    identifier: *const u8,
    identifier_len: usize,
    timestamp_ms: u64,
    out: *mut *mut TecKeySpec,
) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let seed = derive_seed(bytes(identifier, identifier_len, "identifier")?, timestamp_ms)?;
        *out = Box::into_raw(Box::new(TecKeySpec(KeySpec::new(base(base_tag)?, seed))));
        Ok(())
    })
}

/// # Safety
/// `spec` must come from a `tec_keyspec_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tec_keyspec_free(spec: *mut TecKeySpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_stream_new(spec: *const TecKeySpec, out: *mut *mut TecStream) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec = handle(spec, "spec")?;
        *out = Box::into_raw(Box::new(TecStream(DigitStream::new(&spec.0)?)));
        Ok(())
    })
}

/// Writes the next `count` keystream bits to `out_bits`, one 0/1 byte each.
///
/// # Safety
/// `stream` must be a live handle; `out_bits` must have room for `count` bytes.
#[no_mangle]
pub unsafe extern "C" fn tec_stream_next_bits(stream: *mut TecStream, out_bits: *mut u8, count: usize) -> TecStatus {
    guard(|| {
        let stream = out_ptr(stream, "stream")?;
        if count == 0 {
            return Ok(());
        }
        if out_bits.is_null() {
            return Err(Failure::null("out_bits"));
        }
        let bits = stream.0.next_bits(count)?;
        let out = std::slice::from_raw_parts_mut(out_bits, count);
        for (o, b) in out.iter_mut().zip(bits) {
            *o = u8::from(b);
        }
        Ok(())
    })
}

/// # Safety
/// `stream` must come from `tec_stream_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tec_stream_free(stream: *mut TecStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// # Safety
/// `spec` must be a live handle, `data` must point to `len` bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_seal(
    spec: *const TecKeySpec,
    data: *const u8,
    len: usize,
    use_fib: bool,
    out: *mut *mut TecCiphertext,
) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ct = seal(bytes(data, len, "data")?, &handle(spec, "spec")?.0, use_fib)?;
        *out = Box::into_raw(Box::new(TecCiphertext(ct)));
        Ok(())
    })
}

/// # Safety
/// `spec` and `ct` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_open(
    spec: *const TecKeySpec,
    ct: *const TecCiphertext,
    use_fib: bool,
    out: *mut TecBuffer,
) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = TecBuffer::empty();
        let plain = open(&handle(ct, "ciphertext")?.0, &handle(spec, "spec")?.0, use_fib)?;
        *out = TecBuffer::from_vec(plain);
        Ok(())
    })
}

/// Number of meaningful bits, or 0 for a null handle.
///
/// # Safety
/// `ct` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tec_ciphertext_bit_len(ct: *const TecCiphertext) -> u64 {
    ct.as_ref().map_or(0, |c| c.0.bit_len())
}

/// Serialises to the `TEC1` file layout.
///
/// # Safety
/// `ct` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_ciphertext_to_file(ct: *const TecCiphertext, use_fib: bool, out: *mut TecBuffer) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = TecBuffer::from_vec(handle(ct, "ciphertext")?.0.to_file_bytes(use_fib));
        Ok(())
    })
}

/// Parses the `TEC1` file layout; `out_use_fib` receives the header flag.
///
/// # Safety
/// `data` must point to `len` bytes; `out` and `out_use_fib` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_ciphertext_from_file(
    data: *const u8,
    len: usize,
    out: *mut *mut TecCiphertext,
    out_use_fib: *mut bool,
) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let out_fib = out_ptr(out_use_fib, "out_use_fib")?;
        let (ct, fib) = Ciphertext::from_file_bytes(bytes(data, len, "data")?)?;
        *out_fib = fib;
        *out = Box::into_raw(Box::new(TecCiphertext(ct)));
        Ok(())
    })
}

/// # Safety
/// `ct` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tec_ciphertext_free(ct: *mut TecCiphertext) {
    if !ct.is_null() {
        drop(Box::from_raw(ct));
    }
}

/// # Safety
/// `buf` must have been filled by this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tec_buffer_free(buf: TecBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_store_new(out: *mut *mut TecStore) -> TecStatus {
    guard(|| {
        *out_ptr(out, "out")? = Box::into_raw(Box::new(TecStore(PasswordStore::new())));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_store_load(path: *const c_char, out: *mut *mut TecStore) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let store = PasswordStore::load(PathBuf::from(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(TecStore(store)));
        Ok(())
    })
}

/// Writes atomically (temporary sibling, then rename).
///
/// # Safety
/// `store` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tec_store_save(store: *const TecStore, path: *const c_char) -> TecStatus {
    guard(|| {
        handle(store, "store")?.0.save(PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tec_store_len(store: *const TecStore) -> usize {
    store.as_ref().map_or(0, |s| s.0.len())
}

/// Enrolls a user. Identifier `i` is `labels[i]` with value
/// `values[i][0..value_lens[i]]`; the first one keys the stored record.
/// `host_secret` is a decimal integer.
///
/// # Safety
/// All pointers must be valid for the stated lengths; the three identifier
/// arrays must each hold `n_identifiers` entries.
#[no_mangle]
pub unsafe extern "C" fn tec_store_enroll(
    store: *mut TecStore,
    host_secret: *const c_char,
    username: *const c_char,
    password: *const u8,
    password_len: usize,
    labels: *const *const c_char,
    values: *const *const u8,
    value_lens: *const usize,
    n_identifiers: usize,
    now_ms: u64,
    use_fib: bool,
) -> TecStatus {
    guard(|| {
        let store = out_ptr(store, "store")?;
        let host = host_config(host_secret, use_fib)?;
        let mut ids = Vec::with_capacity(n_identifiers);
        if n_identifiers > 0 && (labels.is_null() || values.is_null() || value_lens.is_null()) {
            return Err(Failure::null("identifier arrays"));
        }
        for i in 0..n_identifiers {
            let label = text(*labels.add(i), "identifier label")?;
            let value = bytes(*values.add(i), *value_lens.add(i), "identifier value")?;
            ids.push(Identifier::new(label, value));
        }
        store
            .0
            .enroll(&host, text(username, "username")?, bytes(password, password_len, "password")?, ids, now_ms)?;
        Ok(())
    })
}

/// Sets `*out_match` to whether `password` is the stored password.
///
/// # Safety
/// `store` must be a live handle and the other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn tec_store_verify(
    store: *const TecStore,
    host_secret: *const c_char,
    username: *const c_char,
    password: *const u8,
    password_len: usize,
    out_match: *mut bool,
) -> TecStatus {
    guard(|| {
        let out = out_ptr(out_match, "out_match")?;
        *out = false;
        let host = host_config(host_secret, false)?;
        *out = handle(store, "store")?.0.verify_stored(
            text(username, "username")?,
            bytes(password, password_len, "password")?,
            &host,
        )?;
        Ok(())
    })
}

/// # Safety
/// `store` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tec_store_free(store: *mut TecStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Brute-force try count for `n` characters as a decimal string; release with
/// `tec_string_free`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tec_trycount(n: u64, model: TecTryCountModel, out: *mut *mut c_char) -> TecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = match model {
            0 => TryCountModel::PaperMin,
            1 => TryCountModel::PaperMax,
            2 => TryCountModel::ExactPositions(None),
            m => return Err(Failure::arg(format!("unknown model {m}"))),
        };
        let s = paper_try_count(n, &model).to_string();
        *out = CString::new(s).expect("digits only").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
