#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(tf) = liegeo::files::trajectory_from_json(text) {
            let out = liegeo::files::trajectory_to_json(&tf);
            let back = liegeo::files::trajectory_from_json(&out)
                .expect("re-serialized trajectory must parse");
            assert_eq!(tf, back);
        }
    }
});
