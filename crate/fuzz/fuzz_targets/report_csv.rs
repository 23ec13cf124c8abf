#![no_main]

use libfuzzer_sys::fuzz_target;
use rbsg_core::harness::{parse_report_csv, write_report_csv};

// Accepted reports re-render to CSV that parses to the same rows.
fuzz_target!(|data: &[u8]| {
    let Ok(rows) = parse_report_csv(data) else { return };
    let mut out = Vec::new();
    write_report_csv(&rows, &mut out).expect("in-memory write");
    let again = parse_report_csv(&out).expect("rendered report parses");
    assert_eq!(again.len(), rows.len());
    for (a, b) in again.iter().zip(&rows) {
        assert_eq!(
            (&a.experiment, a.seed, a.trial, a.metric),
            (&b.experiment, b.seed, b.trial, b.metric)
        );
        assert!(a.value.to_bits() == b.value.to_bits() || (a.value.is_nan() && b.value.is_nan()));
    }
});
