#![no_main]
use jacobi_cli::config::{parse_config_file, ModelRef};
use jacobi_cli::{ExperimentConfig, Overrides};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(mut file) = parse_config_file(text) else { return };
    // Keep the target away from the filesystem.
    if let Some(ModelRef::Name(name)) = &file.model {
        if jacobi_core::CoefficientModel::builtin_named(name).is_none() {
            file.model = None;
        }
    }
    file.output.dir = None;
    let _ = ExperimentConfig::build(Some(file), Overrides::default(), None);
});
