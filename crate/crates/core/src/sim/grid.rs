//! Batch grids over presets, operating points, noise kinds and delay.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_scenario, write_series_csv, ControllerSpec, DelayConfig, NoiseConfig, Scenario};
use crate::error::{Error, Result};
use crate::reactor::TABLE1_POWERS;
use crate::stochastic::PERSISTENT_BETA;

pub const GRID_HEADER: [&str; 14] = [
    "cell",
    "controller",
    "power_percent",
    "noise",
    "beta",
    "delay",
    "seed",
    "status",
    "j",
    "overshoot_pct",
    "settling_time",
    "steady_state_error",
    "u_variance_tail",
    "message",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSection {
    /// Ideal-condition presets on every plant, no noise or delay.
    Section4,
    /// Ideal-condition presets under each noise kind, delay off and on.
    Section5,
    /// Presets tuned for each noise kind under that noise, delay off and on.
    Section6,
}

impl std::str::FromStr for GridSection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "section-4" | "4" => Ok(GridSection::Section4),
            "section-5" | "5" => Ok(GridSection::Section5),
            "section-6" | "6" => Ok(GridSection::Section6),
            _ => Err(Error::Config(format!("unknown grid section {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    pub section: GridSection,
    pub seed: u64,
    /// Plants to include; an empty list gives an empty grid.
    pub powers: Vec<u32>,
    /// Template for every cell (horizon, dt, setpoint, objective, …).
    pub base: Scenario,
    /// When set, each cell's series is written to `<dir>/cell_<index>.csv`.
    pub series_dir: Option<PathBuf>,
}

impl GridOptions {
    pub fn new(section: GridSection) -> Self {
        Self {
            section,
            seed: 0,
            powers: TABLE1_POWERS.to_vec(),
            base: Scenario::default(),
            series_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub controller: String,
    pub noise: Option<(&'static str, f64)>,
    pub delay: bool,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub cell: usize,
    pub controller: String,
    pub power_percent: u32,
    pub noise: String,
    pub beta: Option<f64>,
    pub delay: bool,
    pub seed: u64,
    pub status: String,
    pub j: Option<f64>,
    pub overshoot_pct: Option<f64>,
    pub settling_time: Option<f64>,
    pub steady_state_error: Option<f64>,
    pub u_variance_tail: Option<f64>,
    pub message: String,
}

const NOISE_KINDS: [(&str, f64); 3] = [
    ("persistent", PERSISTENT_BETA),
    ("white", 0.0),
    ("antipersistent", -PERSISTENT_BETA),
];

const IDEAL_PRESETS: [&str; 4] = ["table2-fopid-100", "table2-pid-100", "table2-fopid-20", "table2-pid-20"];

/// SplitMix64 finaliser, used to give every cell its own seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Enumerates the cells of a grid in a fixed order.
pub fn grid_cells(opts: &GridOptions) -> Vec<GridCell> {
    let mut combos: Vec<(String, Option<(&'static str, f64)>, bool)> = Vec::new();
    match opts.section {
        GridSection::Section4 => {
            for p in IDEAL_PRESETS {
                combos.push((p.to_string(), None, false));
            }
        }
        GridSection::Section5 => {
            for p in IDEAL_PRESETS {
                for nk in NOISE_KINDS {
                    for delay in [false, true] {
                        combos.push((p.to_string(), Some(nk), delay));
                    }
                }
            }
        }
        GridSection::Section6 => {
            for nk in NOISE_KINDS {
                for tuned in ["fopid-100", "pid-100", "fopid-20", "pid-20"] {
                    for delay in [false, true] {
                        combos.push((format!("table3-{}-{tuned}", nk.0), Some(nk), delay));
                    }
                }
            }
        }
    }
    let mut cells = Vec::new();
    for (controller, noise, delay) in combos {
        for &power in &opts.powers {
            let index = cells.len();
            let scenario = Scenario {
                power_percent: power,
                params: None,
                controller: ControllerSpec::Named(controller.clone()),
                noise: noise.map(|(_, beta)| NoiseConfig::with_beta(beta)),
                delay: delay.then(DelayConfig::default),
                seed: mix(opts.seed ^ mix(index as u64)),
                ..opts.base.clone()
            };
            cells.push(GridCell {
                index,
                controller: controller.clone(),
                noise,
                delay,
                scenario,
            });
        }
    }
    cells
}

/// Runs every cell in parallel; failures are recorded per row.
pub fn run_grid(opts: &GridOptions) -> Result<Vec<GridRow>> {
    if let Some(dir) = &opts.series_dir {
        std::fs::create_dir_all(dir)?;
    }
    let cells = grid_cells(opts);
    cells
        .par_iter()
        .map(|cell| {
            let mut row = GridRow {
                cell: cell.index,
                controller: cell.controller.clone(),
                power_percent: cell.scenario.power_percent,
                noise: cell.noise.map_or("none", |n| n.0).to_string(),
                beta: cell.noise.map(|n| n.1),
                delay: cell.delay,
                seed: cell.scenario.seed,
                status: "ok".into(),
                j: None,
                overshoot_pct: None,
                settling_time: None,
                steady_state_error: None,
                u_variance_tail: None,
                message: String::new(),
            };
            match run_scenario(&cell.scenario) {
                Ok(res) => {
                    row.j = Some(res.summary.j);
                    row.overshoot_pct = Some(res.summary.overshoot_pct);
                    row.settling_time = res.summary.settling_time;
                    row.steady_state_error = Some(res.summary.steady_state_error);
                    row.u_variance_tail = Some(res.summary.u_variance_tail);
                    if let Some(dir) = &opts.series_dir {
                        let f = std::fs::File::create(dir.join(format!("cell_{:03}.csv", cell.index)))?;
                        write_series_csv(&res, std::io::BufWriter::new(f))?;
                    }
                }
                Err(Error::DivergedSimulation { time }) => {
                    row.status = "diverged".into();
                    row.message = format!("diverged at t = {time} s");
                }
                Err(e) => {
                    row.status = "error".into();
                    row.message = e.to_string();
                }
            }
            Ok(row)
        })
        .collect()
}

/// Writes one line per row under [`GRID_HEADER`]; missing values are empty.
pub fn write_grid_csv<W: Write>(rows: &[GridRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_HEADER)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        w.write_record([
            r.cell.to_string(),
            r.controller.clone(),
            r.power_percent.to_string(),
            r.noise.clone(),
            opt(r.beta),
            r.delay.to_string(),
            r.seed.to_string(),
            r.status.clone(),
            opt(r.j),
            opt(r.overshoot_pct),
            opt(r.settling_time),
            opt(r.steady_state_error),
            opt(r.u_variance_tail),
            r.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_counts() {
        assert_eq!(grid_cells(&GridOptions::new(GridSection::Section4)).len(), 20);
        assert_eq!(grid_cells(&GridOptions::new(GridSection::Section5)).len(), 120);
        assert_eq!(grid_cells(&GridOptions::new(GridSection::Section6)).len(), 120);
        let cells = grid_cells(&GridOptions::new(GridSection::Section6));
        assert!(cells.iter().all(|c| c.controller.contains(c.noise.unwrap().0)));
        let seeds: std::collections::HashSet<u64> = cells.iter().map(|c| c.scenario.seed).collect();
        assert_eq!(seeds.len(), cells.len());
    }

    #[test]
    fn empty_selection_writes_header_only() {
        let mut opts = GridOptions::new(GridSection::Section5);
        opts.powers.clear();
        let rows = run_grid(&opts).unwrap();
        assert!(rows.is_empty());
        let mut buf = Vec::new();
        write_grid_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), GRID_HEADER.join(",") + "\n");
    }

    #[test]
    fn section_names_parse() {
        assert_eq!("section-6".parse::<GridSection>().unwrap(), GridSection::Section6);
        assert!("section-7".parse::<GridSection>().is_err());
    }
}
