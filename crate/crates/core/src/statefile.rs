//! `state.json` loading.
//!
//! Two kinds are accepted:
//!
//! ```json
//! {"kind":"gaussian","mu1":0,"mu2":0,"sigma":1,"c":-0.99,"grid":{"min":-8,"max":8,"n":512}}
//! {"kind":"grid","grid1":{"min":-8,"max":8,"n":512},"grid2":{...},"amp_file":"amp.csv"}
//! ```
//!
//! The Gaussian `grid` applies to both axes and may be omitted, in which case
//! each axis covers `mu_i ± 8 sigma` with 512 nodes. `amp_file` is a CSV of
//! rows `i,j,re,im` (optional header), resolved relative to the state file;
//! missing entries are zero and the amplitudes are normalized on load.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, GridSpec};
use crate::state::{gaussian_wavefunction, GaussianParams, WaveFunction2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFile {
    Gaussian {
        mu1: f64,
        mu2: f64,
        sigma: f64,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<GridSpec>,
    },
    Grid {
        grid1: GridSpec,
        grid2: GridSpec,
        amp_file: String,
    },
}

/// A state ready for computation.
#[derive(Debug, Clone)]
pub struct LoadedState {
    pub psi: WaveFunction2,
    /// Present for Gaussian state files.
    pub gaussian: Option<GaussianParams>,
    pub file: StateFile,
}

fn checked(g: &GridSpec) -> Result<GridSpec> {
    make_grid(g.min, g.max, g.n)
}

impl StateFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("state file: {e}")))
    }

    /// Builds the wave function; relative `amp_file` paths resolve against
    /// `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<LoadedState> {
        match self {
            StateFile::Gaussian { mu1, mu2, sigma, c, grid } => {
                let params = GaussianParams::new(*mu1, *mu2, *sigma, *c)?;
                let (g1, g2) = match grid {
                    Some(g) => {
                        let g = checked(g)?;
                        (g, g)
                    }
                    None => params.default_grids(),
                };
                Ok(LoadedState { psi: gaussian_wavefunction(params, g1, g2)?, gaussian: Some(params), file: self.clone() })
            }
            StateFile::Grid { grid1, grid2, amp_file } => {
                let (g1, g2) = (checked(grid1)?, checked(grid2)?);
                let path = base_dir.join(amp_file);
                let amp = read_amp_csv(&path, g1.n, g2.n)?;
                let psi = WaveFunction2::from_amplitudes(g1, g2, amp)?.normalized()?;
                Ok(LoadedState { psi, gaussian: None, file: self.clone() })
            }
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub fn load_state(path: &Path) -> Result<LoadedState> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    StateFile::from_json(&text)?.build(&base)
}

/// Reads `i,j,re,im` rows into an `n1 × n2` array.
pub fn read_amp_csv(path: &Path, n1: usize, n2: usize) -> Result<Array2<Complex64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut amp = Array2::zeros((n1, n2));
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if record.len() != 4 {
            return Err(Error::Parse(format!("{}:{}: expected 4 fields", path.display(), line + 1)));
        }
        let i = record[0].parse::<usize>();
        if line == 0 && i.is_err() {
            continue; // header
        }
        let bad = |what: &str| Error::Parse(format!("{}:{}: bad {what}", path.display(), line + 1));
        let i = i.map_err(|_| bad("row index"))?;
        let j = record[1].parse::<usize>().map_err(|_| bad("column index"))?;
        let re = record[2].parse::<f64>().map_err(|_| bad("real part"))?;
        let im = record[3].parse::<f64>().map_err(|_| bad("imaginary part"))?;
        if i >= n1 || j >= n2 {
            return Err(Error::Parse(format!("{}:{}: index ({i}, {j}) outside {n1}x{n2}", path.display(), line + 1)));
        }
        amp[[i, j]] = Complex64::new(re, im);
    }
    Ok(amp)
}

/// Writes nonzero amplitudes as `i,j,re,im` rows with a header.
pub fn write_amp_csv(psi: &WaveFunction2, path: &Path) -> Result<()> {
    let mut out = String::from("i,j,re,im\n");
    for ((i, j), a) in psi.amp.indexed_iter() {
        if a.re != 0.0 || a.im != 0.0 {
            out.push_str(&format!("{i},{j},{:.16e},{:.16e}\n", a.re, a.im));
        }
    }
    fs::File::create(path).and_then(|mut f| f.write_all(out.as_bytes())).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_gaussian_with_and_without_grid() {
        let s = StateFile::from_json(r#"{"kind":"gaussian","mu1":2,"mu2":4,"sigma":1,"c":0.3}"#).unwrap();
        let loaded = s.build(Path::new(".")).unwrap();
        assert_eq!(loaded.psi.grid1.n, 512);
        assert_eq!(loaded.psi.grid1.min, -6.0);
        assert_eq!(loaded.psi.grid2.max, 12.0);
        let s = StateFile::from_json(r#"{"kind":"gaussian","mu1":0,"mu2":0,"sigma":1,"c":0,"grid":{"min":-8,"max":8,"n":256}}"#).unwrap();
        assert_eq!(s.build(Path::new(".")).unwrap().psi.grid2.n, 256);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(matches!(StateFile::from_json(r#"{"kind":"other"}"#), Err(Error::Parse(_))));
        assert!(matches!(StateFile::from_json(r#"{"kind":"gaussian","mu1":0}"#), Err(Error::Parse(_))));
        let bad_c = StateFile::from_json(r#"{"kind":"gaussian","mu1":0,"mu2":0,"sigma":1,"c":1.5}"#).unwrap();
        assert!(matches!(bad_c.build(Path::new(".")), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn grid_state_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let params = GaussianParams::new(0.0, 0.0, 1.0, 0.4).unwrap();
        let g = make_grid(-8.0, 8.0, 64).unwrap();
        let psi = gaussian_wavefunction(params, g, g).unwrap();
        write_amp_csv(&psi, &dir.path().join("amp.csv")).unwrap();
        let json = r#"{"kind":"grid","grid1":{"min":-8,"max":8,"n":64},"grid2":{"min":-8,"max":8,"n":64},"amp_file":"amp.csv"}"#;
        fs::write(dir.path().join("state.json"), json).unwrap();
        let loaded = load_state(&dir.path().join("state.json")).unwrap();
        assert!(loaded.gaussian.is_none());
        let diff = (&loaded.psi.amp - &psi.amp).iter().map(|d| d.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("amp.csv");
        fs::write(&path, "0,0,1,0\n99,0,1,0\n").unwrap();
        assert!(matches!(read_amp_csv(&path, 16, 16), Err(Error::Parse(_))));
    }
}
