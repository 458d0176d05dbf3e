use std::ffi::{CStr, CString};
use std::ptr;

use tec_ffi::*;

fn last_error() -> String {
    let p = tec_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn seal_open_through_handles() {
    unsafe {
        let mut spec = ptr::null_mut();
        let id = b"vein-pattern";
        assert_eq!(tec_keyspec_from_identifier(2, id.as_ptr(), id.len(), 99, &mut spec), TecStatus::TecOk);
        let msg = b"across the boundary";
        let mut ct = ptr::null_mut();
        assert_eq!(tec_seal(spec, msg.as_ptr(), msg.len(), false, &mut ct), TecStatus::TecOk);
        let bits = tec_ciphertext_bit_len(ct);
        assert!((8 * 19 + 2 * 19..=8 * 19 + 3 * 19).contains(&bits));
        let mut out = TecBuffer {
            data: ptr::null_mut(),
            len: 0,
        };
        assert_eq!(tec_open(spec, ct, false, &mut out), TecStatus::TecOk);
        assert_eq!(std::slice::from_raw_parts(out.data, out.len), msg);
        tec_buffer_free(out);

        let mut other = ptr::null_mut();
        let seed = CString::new("12345").unwrap();
        assert_eq!(tec_keyspec_new(0, seed.as_ptr(), &mut other), TecStatus::TecOk);
        let mut wrong = TecBuffer {
            data: ptr::null_mut(),
            len: 0,
        };
        let st = tec_open(other, ct, false, &mut wrong);
        if st == TecStatus::TecOk {
            assert_ne!(std::slice::from_raw_parts(wrong.data, wrong.len), msg);
            tec_buffer_free(wrong);
        } else {
            assert_eq!(st, TecStatus::TecCodecError);
            assert!(wrong.data.is_null());
        }
        tec_keyspec_free(other);
        tec_ciphertext_free(ct);
        tec_keyspec_free(spec);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut spec = ptr::null_mut();
        let bad = CString::new("12x").unwrap();
        assert_eq!(tec_keyspec_new(0, bad.as_ptr(), &mut spec), TecStatus::TecInvalidArgument);
        assert!(last_error().contains("decimal"));
        assert_eq!(tec_keyspec_new(7, c"5".as_ptr(), &mut spec), TecStatus::TecInvalidArgument);
        assert_eq!(tec_keyspec_new(0, ptr::null(), &mut spec), TecStatus::TecNullPointer);
        assert_eq!(tec_seal(ptr::null(), ptr::null(), 0, false, &mut ptr::null_mut()), TecStatus::TecNullPointer);
        let mut s = ptr::null_mut();
        let mut fib = false;
        assert_eq!(tec_ciphertext_from_file(b"TEC".as_ptr(), 3, &mut s, &mut fib), TecStatus::TecCodecError);
        // success clears the message
        let mut out = ptr::null_mut();
        assert_eq!(tec_trycount(3, 2, &mut out), TecStatus::TecOk);
        assert!(tec_last_error_message().is_null());
        assert_eq!(CStr::from_ptr(out).to_str().unwrap(), "9261000");
        tec_string_free(out);
        // freeing null is a no-op
        tec_keyspec_free(ptr::null_mut());
        tec_buffer_free(TecBuffer {
            data: ptr::null_mut(),
            len: 0,
        });
    }
}

#[test]
fn store_corruption_maps_to_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tecp");
    std::fs::write(&path, b"TECP\x01\x00\x00\x00\x02").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut store = ptr::null_mut();
    unsafe {
        assert_eq!(tec_store_load(p.as_ptr(), &mut store), TecStatus::TecStoreCorrupt);
        let missing = CString::new(dir.path().join("none").to_str().unwrap()).unwrap();
        assert_eq!(tec_store_load(missing.as_ptr(), &mut store), TecStatus::TecIoError);
        assert_eq!(tec_store_new(&mut store), TecStatus::TecOk);
        let mut ok = true;
        assert_eq!(
            tec_store_verify(store, c"1".as_ptr(), c"nobody".as_ptr(), ptr::null(), 0, &mut ok),
            TecStatus::TecStoreError
        );
        assert!(!ok);
        tec_store_free(store);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/tec.h")).unwrap();
    for name in [
        "tec_seal",
        "tec_open",
        "tec_stream_next_bits",
        "tec_store_enroll",
        "tec_store_verify",
        "tec_trycount",
        "tec_last_error_message",
        "typedef struct TecKeySpec TecKeySpec",
        "TEC_STORE_CORRUPT = 5",
    ] {
        assert!(header.contains(name), "{name} missing from tec.h");
    }
}
