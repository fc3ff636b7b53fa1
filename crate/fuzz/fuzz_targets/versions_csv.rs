#![no_main]

use libfuzzer_sys::fuzz_target;
use zipsel::analysis::{self, Family, XAxis};

fuzz_target!(|data: &[u8]| {
    let Ok(points) = analysis::read_versions_csv(data) else { return };
    let flagged = analysis::detect_anomaly(&points);
    assert!(flagged.len() < points.len().max(1));
    for x in [XAxis::Ratio, XAxis::Loss] {
        for family in [Family::Linear, Family::Exponential, Family::IsotonicDecreasing] {
            let _ = analysis::fit_entropy_curve(&points, x, family);
        }
    }
});
