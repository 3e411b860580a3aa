#![no_main]
use jacobi_cli::parse::{parse_grid, MAX_GRID_POINTS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(g) = parse_grid(s) {
            assert!(g.len() >= 1 && g.len() <= MAX_GRID_POINTS + 1);
        }
    }
});
