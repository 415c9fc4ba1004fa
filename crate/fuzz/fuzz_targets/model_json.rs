#![no_main]

use libfuzzer_sys::fuzz_target;
use mogen::{MultiOrderCounts, MultiOrderModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(counts) = MultiOrderCounts::from_json(text) {
        let again = MultiOrderCounts::from_json(&counts.to_json().unwrap()).unwrap();
        assert_eq!(again, counts);
    }
    if let Ok(model) = MultiOrderModel::from_json(text) {
        let _ = model.to_json().unwrap();
    }
});
