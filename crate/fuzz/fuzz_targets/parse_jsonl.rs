#![no_main]

use libfuzzer_sys::fuzz_target;
use zipsel::corpus::{parse_record, RenderTemplate};
use zipsel::{Mode, Pool};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for mode in [Mode::Single, Mode::Pair] {
        for line in text.lines() {
            let _ = parse_record(line, mode);
        }
        if let Ok(pool) = Pool::parse_jsonl(text, mode, RenderTemplate::RoleContent) {
            assert_eq!(pool.records().len(), pool.len());
            for s in pool.samples() {
                assert!(!s.payload.is_empty());
                assert!(s.token_len >= 1);
            }
        }
    }
});
