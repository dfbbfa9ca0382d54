#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mf) = liegeo::files::model_from_json(text) {
            // loading runs the full validation stack; it may reject the
            // model but must not panic
            let _ = liegeo::files::load_model(&mf);
        }
    }
});
