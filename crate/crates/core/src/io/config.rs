//! `key = value` run configuration files.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Params;
use crate::pipeline::OnlineOrder;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Offline,
    Online,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "offline" => Ok(Mode::Offline),
            "online" => Ok(Mode::Online),
            other => Err(format!("mode must be offline or online, got '{other}'")),
        }
    }
}

impl FromStr for OnlineOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "classify_first" => Ok(OnlineOrder::ClassifyFirst),
            "integrate_first" => Ok(OnlineOrder::IntegrateFirst),
            other => Err(format!(
                "online_order must be classify_first or integrate_first, got '{other}'"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: Params,
    pub mode: Mode,
    pub online_order: OnlineOrder,
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are ignored.
/// Missing keys keep their defaults.
pub fn parse_config(path: &Path, text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(path, line_no, format!("expected key=value, got '{line}'")));
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::parse(path, line_no, format!("{key}: invalid {what} '{value}'"));
        match key {
            "voxel_size" => cfg.params.voxel_size = value.parse().map_err(|_| bad("number"))?,
            "d_s" => cfg.params.noise_margin = value.parse().map_err(|_| bad("number"))?,
            "d_p" => cfg.params.localization_radius = value.parse().map_err(|_| bad("integer"))?,
            "max_range" => {
                cfg.params.max_range = match value {
                    "" | "none" => None,
                    v => Some(v.parse().map_err(|_| bad("number"))?),
                }
            }
            "hit_extension" => {
                cfg.params.hit_extension = match value {
                    "" | "auto" => None,
                    v => Some(v.parse().map_err(|_| bad("integer"))?),
                }
            }
            "mode" => cfg.mode = value.parse().map_err(|e: String| Error::parse(path, line_no, e))?,
            "online_order" => cfg.online_order = value.parse().map_err(|e: String| Error::parse(path, line_no, e))?,
            other => return Err(Error::parse(path, line_no, format!("unknown key '{other}'"))),
        }
    }
    cfg.params
        .validate()
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(path, &text)
}
