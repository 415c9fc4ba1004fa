#![no_main]

use libfuzzer_sys::fuzz_target;
use mogen::path_data::parse_ngram;

// First byte picks the mode and separator; the rest is the file.
fuzz_target!(|data: &[u8]| {
    let Some((&mode, text)) = data.split_first() else {
        return;
    };
    let weighted = mode & 1 == 1;
    let sep = if mode & 2 == 0 { "," } else { " " };
    if let Ok(s) = parse_ngram(text, sep, weighted) {
        let mut out = Vec::new();
        s.write_ngram(&mut out, sep, true).unwrap();
        let back = parse_ngram(out.as_slice(), sep, true).unwrap();
        assert_eq!(back.total_observations(), s.total_observations());
    }
});
