pub mod bench;
pub mod calc;
pub mod data;
pub mod eval;
pub mod pair;

use std::fs;
use std::path::Path;

use fastzip::quantizer::{parse_dump, DumpRecord};

use crate::error::{data, CliResult};

pub fn read_dump(path: &Path) -> CliResult<Vec<DumpRecord>> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    parse_dump(&text).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    use statrs::statistics::Statistics;
    if xs.len() < 2 {
        return (xs.first().copied().unwrap_or(0.0), 0.0);
    }
    (xs.mean(), xs.std_dev())
}
