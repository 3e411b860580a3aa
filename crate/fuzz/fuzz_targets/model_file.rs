#![no_main]
use jacobi_core::model_file::{model_to_toml, parse_model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_model(text) {
        let again = parse_model(&model_to_toml(&m)).expect("serialized model parses");
        assert_eq!(again, m);
        let _ = m.eval_a(5);
        let _ = m.eval_b(5);
    }
});
