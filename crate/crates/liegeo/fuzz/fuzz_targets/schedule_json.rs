#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(schedule) = liegeo::files::schedule_from_json(text) {
            let out = liegeo::files::schedule_to_json(&schedule);
            let back = liegeo::files::schedule_from_json(&out)
                .expect("re-serialized schedule must parse");
            assert_eq!(schedule, back);
        }
    }
});
