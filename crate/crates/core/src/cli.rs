//! File formats of the command-line front end: JSON scenario configs,
//! per-cell CSV, PPM heatmaps and JSON reports.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{ComparisonReport, GainRow, Metric, Scenario, SchemeName, SweepTable};
use crate::metrics::{ComplianceReport, FieldMap, UniformityReport};

/// Reads, parses and validates a scenario. Absent keys take their defaults.
pub fn parse_config(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: format!("cannot read: {e}"),
    })?;
    let scenario = parse_config_str(&text).map_err(|message| Error::Config { path: path.to_path_buf(), message })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Parses without validating; the error text carries the field path.
pub fn parse_config_str(text: &str) -> std::result::Result<Scenario, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("at `{path}`: {}", e.inner())
        }
    })
}

pub fn config_to_string(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serializes")
}

pub fn write_config(s: &Scenario, path: &Path) -> Result<()> {
    write_bytes(path, (config_to_string(s) + "\n").as_bytes())
}

fn check_path(path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty output path")));
    }
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    check_path(path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Fixed-point text with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0.00000000".into() } else { v.to_string() };
    }
    let sci = format!("{v:.8e}");
    let exponent: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    let rounded: f64 = sci.parse().unwrap_or(v);
    let decimals = (8 - exponent).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// [`format_sig9`] with trailing zeros removed, used for coordinates.
pub fn format_coord(v: f64) -> String {
    let s = format_sig9(v);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn field_csv(map: &FieldMap) -> String {
    let mut out = String::with_capacity(40 * map.values.len() + 16);
    out.push_str("x_m,y_m,value,unit\n");
    for j in 0..map.ny {
        for i in 0..map.nx {
            let (x, y) = map.cell_center(i, j);
            out.push_str(&format_coord(x));
            out.push(',');
            out.push_str(&format_coord(y));
            out.push(',');
            out.push_str(&format_sig9(map.get(i, j)));
            out.push(',');
            out.push_str(&map.units);
            out.push('\n');
        }
    }
    out
}

pub fn write_field_csv(map: &FieldMap, path: &Path) -> Result<()> {
    write_bytes(path, field_csv(map).as_bytes())
}

// viridis anchor colors, dark to bright
const RAMP: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

/// Ramp color for `t ∈ [0, 1]`.
pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (RAMP.len() - 1) as f64;
    let k = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - k as f64;
    let mut c = [0u8; 3];
    for ch in 0..3 {
        let a = RAMP[k][ch] as f64;
        let b = RAMP[k + 1][ch] as f64;
        c[ch] = (a + (b - a) * f).round() as u8;
    }
    c
}

/// Binary PPM bytes; the first image row is the largest `y`.
pub fn heatmap_ppm(map: &FieldMap) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", map.nx, map.ny);
    let mut out = Vec::with_capacity(header.len() + 3 * map.values.len());
    out.extend_from_slice(header.as_bytes());
    let (lo, hi) = (map.min(), map.max());
    let span = hi - lo;
    for j in (0..map.ny).rev() {
        for i in 0..map.nx {
            let t = if span > 0.0 { (map.get(i, j) - lo) / span } else { 0.0 };
            out.extend_from_slice(&ramp_color(t));
        }
    }
    out
}

pub fn render_heatmap(map: &FieldMap, path: &Path) -> Result<()> {
    write_bytes(path, &heatmap_ppm(map))
}

#[derive(Debug, Serialize)]
pub struct SchemeEntry<'a> {
    pub scheme: SchemeName,
    pub illuminance_lux: &'a UniformityReport,
    pub rate_bps: &'a UniformityReport,
    pub compliance: &'a ComplianceReport,
}

#[derive(Debug, Serialize)]
pub struct PairGain {
    pub from: SchemeName,
    pub to: SchemeName,
    pub metric: Metric,
    pub gain_percent: f64,
}

#[derive(Debug, Serialize)]
pub struct ComparisonDocument<'a> {
    pub baseline: SchemeName,
    pub schemes: Vec<SchemeEntry<'a>>,
    pub gains: &'a [GainRow],
    pub pairwise_gains: Vec<PairGain>,
}

impl<'a> ComparisonDocument<'a> {
    pub fn new(report: &'a ComparisonReport) -> Self {
        let schemes = report
            .results
            .iter()
            .map(|r| SchemeEntry {
                scheme: r.scheme,
                illuminance_lux: &r.illuminance_stats,
                rate_bps: &r.rate_stats,
                compliance: &r.compliance,
            })
            .collect();
        let pairwise_gains = Metric::ALL
            .into_iter()
            .flat_map(|metric| {
                report
                    .pairwise_gains(metric)
                    .into_iter()
                    .map(move |(from, to, gain_percent)| PairGain { from, to, metric, gain_percent })
            })
            .collect();
        ComparisonDocument { baseline: report.baseline, schemes, gains: &report.gains, pairwise_gains }
    }
}

#[derive(Debug, Serialize)]
pub struct Crossover {
    pub a: SchemeName,
    pub b: SchemeName,
    pub power_w: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepDocument<'a> {
    #[serde(flatten)]
    pub table: &'a SweepTable,
    /// Powers where the minimum-rate ordering of a scheme pair flips.
    pub rate_crossovers: Vec<Crossover>,
}

impl<'a> SweepDocument<'a> {
    pub fn new(table: &'a SweepTable) -> Self {
        let mut rate_crossovers = Vec::new();
        for (k, &a) in table.schemes.iter().enumerate() {
            for &b in &table.schemes[k + 1..] {
                let power_w = table.rate_crossovers(a, b);
                if !power_w.is_empty() {
                    rate_crossovers.push(Crossover { a, b, power_w });
                }
            }
        }
        SweepDocument { table, rate_crossovers }
    }
}

/// Pretty JSON followed by a newline.
pub fn write_report<T: Serialize>(doc: &T, path: &Path) -> Result<()> {
    check_path(path)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, doc).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// `<scheme>_<quantity>` file stem shared by the CSV and PPM outputs.
pub fn output_stem(map: &FieldMap) -> String {
    format!("{}_{}", map.scheme, map.quantity.file_stem())
}
