//! Tab-separated data files with `#` metadata headers, manifests with
//! SHA-256 digests, and plot-ready tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::analysis::{LadderFit, ShiftFit};
use crate::error::{Error, Result};
use crate::spectro::{RetardingCurve, VoltageGrid};
use crate::spectrum::Spectrum;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn header(out: &mut String, meta: &BTreeMap<String, String>) {
    for (k, v) in meta {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

pub fn format_spectrum(s: &Spectrum) -> String {
    let mut out = String::new();
    header(&mut out, &s.metadata);
    let _ = writeln!(out, "# energy_start = {}", s.energy_start);
    let _ = writeln!(out, "# energy_step = {}", s.energy_step);
    out.push_str("energy_eV\tdensity\n");
    for (i, d) in s.density.iter().enumerate() {
        let _ = writeln!(out, "{:.6}\t{d:e}", s.energy(i));
    }
    out
}

pub fn write_spectrum(path: &Path, s: &Spectrum) -> Result<()> {
    fs::write(path, format_spectrum(s))?;
    Ok(())
}

struct Table {
    meta: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let bad = |message: String| Error::DataFormat { path: path.to_path_buf(), message };
    let mut meta = BTreeMap::new();
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(|c| c.trim().to_string()).collect();
        if columns.is_empty() {
            columns = cells;
        } else if cells.len() != columns.len() {
            return Err(bad(format!("line {}: expected {} columns, got {}", n + 1, columns.len(), cells.len())));
        } else {
            rows.push(cells);
        }
    }
    if columns.is_empty() {
        return Err(bad("no column header".into()));
    }
    Ok(Table { meta, columns, rows })
}

fn meta_f64(t: &Table, key: &str, path: &Path) -> Result<f64> {
    t.meta
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::DataFormat { path: path.to_path_buf(), message: format!("missing or malformed `{key}`") })
}

fn column<T: FromStr>(t: &Table, name: &str, path: &Path) -> Result<Vec<T>> {
    let bad = |message: String| Error::DataFormat { path: path.to_path_buf(), message };
    let k = t.columns.iter().position(|c| c == name).ok_or_else(|| bad(format!("missing column `{name}`")))?;
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| r[k].parse().map_err(|_| bad(format!("row {}: malformed `{}`", i + 1, r[k]))))
        .collect()
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum> {
    let mut t = read_table(path)?;
    let start = meta_f64(&t, "energy_start", path)?;
    let step = meta_f64(&t, "energy_step", path)?;
    let density = column(&t, "density", path)?;
    t.meta.remove("energy_start");
    t.meta.remove("energy_step");
    let mut s = Spectrum::new(start, step, density).map_err(|e| Error::DataFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    s.metadata = t.meta;
    Ok(s)
}

pub fn format_curve(c: &RetardingCurve) -> String {
    let mut out = String::new();
    header(&mut out, &c.metadata);
    let _ = writeln!(out, "# exposure = {}", c.exposure);
    let _ = writeln!(out, "# seed = {}", c.seed);
    let _ = writeln!(out, "# voltage_start = {}", c.voltages.start);
    let _ = writeln!(out, "# voltage_step = {}", c.voltages.step);
    out.push_str("voltage_V\tcounts\n");
    for (i, n) in c.counts.iter().enumerate() {
        let _ = writeln!(out, "{:.6}\t{n}", c.voltages.voltage(i));
    }
    out
}

pub fn write_curve(path: &Path, c: &RetardingCurve) -> Result<()> {
    fs::write(path, format_curve(c))?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<RetardingCurve> {
    let mut t = read_table(path)?;
    let exposure = meta_f64(&t, "exposure", path)?;
    let start = meta_f64(&t, "voltage_start", path)?;
    let step = meta_f64(&t, "voltage_step", path)?;
    let seed = t.meta.get("seed").and_then(|v| v.parse().ok()).ok_or_else(|| Error::DataFormat {
        path: path.to_path_buf(),
        message: "missing or malformed `seed`".into(),
    })?;
    let counts: Vec<u64> = column(&t, "counts", path)?;
    let voltages: Vec<f64> = column(&t, "voltage_V", path)?;
    let grid = VoltageGrid { start, step, count: counts.len() };
    if voltages.iter().enumerate().any(|(i, v)| (v - grid.voltage(i)).abs() > 1e-6 * step.abs().max(1.0)) {
        return Err(Error::NonUniformGrid);
    }
    for k in ["exposure", "seed", "voltage_start", "voltage_step"] {
        t.meta.remove(k);
    }
    Ok(RetardingCurve { voltages: grid, counts, exposure, seed, metadata: t.meta })
}

/// `key = value` lines, sorted by key.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    /// Records the digest of `file` (relative to `root`) under `file.<name>`.
    pub fn add_file(&mut self, root: &Path, name: &str) -> Result<()> {
        let bytes = fs::read(root.join(name))?;
        self.insert(format!("file.{name}"), sha256_hex(&bytes));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Manifest {
        let entries = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Manifest { entries }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        Ok(Manifest::parse(&fs::read_to_string(path)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Spectrum,
    Ladder,
    Shift,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectrum" => Ok(PlotKind::Spectrum),
            "ladder" => Ok(PlotKind::Ladder),
            "shift" => Ok(PlotKind::Shift),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

pub fn format_ladder(fit: &LadderFit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# spacing_eV = {}", fit.spacing);
    let _ = writeln!(out, "# spacing_error_eV = {}", fit.spacing_error);
    let _ = writeln!(out, "# intercept_eV = {}", fit.intercept);
    let _ = writeln!(out, "# rms_eV = {}", fit.rms);
    if let Some((order, energy)) = fit.excluded {
        let _ = writeln!(out, "# excluded = {order} {energy}");
    }
    out.push_str("order\tenergy_eV\tresidual_eV\n");
    for ((o, e), r) in fit.orders.iter().zip(&fit.energies).zip(&fit.residuals) {
        let _ = writeln!(out, "{o}\t{e:.6}\t{r:.6}");
    }
    out
}

/// One file per tracked feature, named `shift_<label>.tsv`.
pub fn write_shift_series(dir: &Path, fit: &ShiftFit) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in &fit.features {
        let mut out = String::new();
        let _ = writeln!(out, "# feature = {}", t.label());
        let _ = writeln!(out, "# slope_eV_per_Wcm2 = {:e}", t.slope);
        let _ = writeln!(out, "# slope_error = {:e}", t.slope_error);
        let _ = writeln!(out, "# mean_slope = {:e}", fit.mean_slope);
        out.push_str("intensity_Wcm2\tenergy_eV\n");
        for (i, e) in &t.points {
            let _ = writeln!(out, "{i:e}\t{e:.6}");
        }
        let path = dir.join(format!("shift_{}.tsv", t.label()));
        fs::write(&path, out)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = Spectrum::new(0.5, 0.02, vec![0.0, 1.5e-7, 3.25, 1.0 / 3.0]).unwrap().with_meta("engine", "tdse");
        let p = dir.path().join("s.tsv");
        write_spectrum(&p, &s).unwrap();
        let back = read_spectrum(&p).unwrap();
        assert_eq!(back, s);
        assert!(fs::read_to_string(&p).unwrap().contains("energy_eV\tdensity"));
    }

    #[test]
    fn curve_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = RetardingCurve {
            voltages: VoltageGrid { start: 1.0, step: 0.02, count: 3 },
            counts: vec![10, 7, 0],
            exposure: 1e5,
            seed: u64::MAX,
            metadata: BTreeMap::from([("resolution_eV".to_string(), "0.08".to_string())]),
        };
        let p = dir.path().join("c.tsv");
        write_curve(&p, &c).unwrap();
        assert_eq!(read_curve(&p).unwrap(), c);
    }

    #[test]
    fn malformed_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.tsv");
        fs::write(&p, "# energy_start = 0\n# energy_step = 0.1\nenergy_eV\tdensity\n0.0\t1\n0.1\n").unwrap();
        assert!(matches!(read_spectrum(&p), Err(Error::DataFormat { .. })));
    }

    #[test]
    fn manifest_is_sorted_and_parses_back() {
        let mut m = Manifest::default();
        m.insert("z", "1");
        m.insert("a", "2");
        let text = m.render();
        assert!(text.starts_with("a = 2"));
        assert_eq!(Manifest::parse(&text), m);
    }

    #[test]
    fn unknown_plot_kind() {
        assert!(matches!("histogram".parse::<PlotKind>(), Err(Error::UnknownKind(_))));
        assert_eq!("shift".parse::<PlotKind>().unwrap(), PlotKind::Shift);
    }
}
