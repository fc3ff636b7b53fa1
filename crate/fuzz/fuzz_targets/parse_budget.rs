#![no_main]

use libfuzzer_sys::fuzz_target;
use zipsel::BudgetSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(b) = text.parse::<BudgetSpec>() {
        assert!(b.amount >= 1);
        assert_eq!(b.to_string().parse::<BudgetSpec>().unwrap(), b);
    }
});
