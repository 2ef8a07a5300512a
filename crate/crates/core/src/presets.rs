//! Built-in scenarios, stored as configuration files.

use crate::error::{Error, Result};

pub const NAMES: [&str; 4] = [
    "toy-pseudo-hyperbolic",
    "tempered-exp",
    "example2-poly",
    "corollaries",
];

/// TOML text of the named preset.
pub fn source(name: &str) -> Result<&'static str> {
    Ok(match name {
        "toy-pseudo-hyperbolic" => include_str!("presets/toy-pseudo-hyperbolic.toml"),
        "tempered-exp" => include_str!("presets/tempered-exp.toml"),
        "example2-poly" => include_str!("presets/example2-poly.toml"),
        "corollaries" => include_str!("presets/corollaries.toml"),
        _ => {
            return Err(Error::Config(format!(
                "unknown preset {name:?}; expected one of {}",
                NAMES.join(", ")
            )))
        }
    })
}
