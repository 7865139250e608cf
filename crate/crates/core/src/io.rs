//! Flat-file formats: headerless comma-separated matrices with 17 significant
//! digits, and a panel directory layout.
//!
//! ```text
//! <dir>/Y.csv          n x d responses
//! <dir>/X_f<j>.csv     n x d feature slice j (j = 0..k)
//! <dir>/K_true.csv     d x d ground-truth Gram matrix (generated panels only)
//! <dir>/meta.txt       key=value lines
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::synth::PanelData;

/// One line per row, `{:.16e}` per entry.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 24);
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, what: &str) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!("{what}: line {}: cannot parse {field:?} as a number", lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("{what}: line {}: non-finite value", lineno + 1)));
            }
            data.push(v);
        }
        let width = data.len() - start;
        match ncols {
            None => ncols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse(format!(
                    "{what}: line {} has {width} columns, expected {c}",
                    lineno + 1
                )))
            }
            _ => {}
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    Ok(DMatrix::from_row_slice(nrows, ncols, &data))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    parse_matrix(&text, &path.display().to_string())
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got {line:?}")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Contents of `meta.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelMeta {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub kernel: String,
    pub sigma_xi: f64,
    pub seed: u64,
}

impl PanelMeta {
    pub fn to_text(&self) -> String {
        format!(
            "d={}\nn={}\nk={}\nr={}\nkernel={}\nsigma_xi={:.16e}\nseed={}\n",
            self.d, self.n, self.k, self.r, self.kernel, self.sigma_xi, self.seed
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
            kv.get(key)
                .ok_or_else(|| Error::Parse(format!("meta.txt: missing {key}")))?
                .parse()
                .map_err(|_| Error::Parse(format!("meta.txt: bad value for {key}")))
        }
        Ok(PanelMeta {
            d: get(&kv, "d")?,
            n: get(&kv, "n")?,
            k: get(&kv, "k")?,
            r: get(&kv, "r")?,
            kernel: get(&kv, "kernel")?,
            sigma_xi: get(&kv, "sigma_xi")?,
            seed: get(&kv, "seed")?,
        })
    }
}

pub fn feature_file(j: usize) -> String {
    format!("X_f{j}.csv")
}

/// Writes `Y.csv`, the feature slices, and optionally `K_true.csv` and `meta.txt`.
pub fn write_panel(
    dir: &Path,
    panel: &PanelData,
    k_true: Option<&DMatrix<f64>>,
    meta: Option<&PanelMeta>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join("Y.csv"), &panel.y)?;
    for (j, x) in panel.features.iter().enumerate() {
        write_matrix(&dir.join(feature_file(j)), x)?;
    }
    if let Some(k) = k_true {
        write_matrix(&dir.join("K_true.csv"), k)?;
    }
    if let Some(m) = meta {
        fs::write(dir.join("meta.txt"), m.to_text())?;
    }
    Ok(())
}

/// Reads `Y.csv` and every consecutive `X_f<j>.csv` starting at `j = 0`.
pub fn read_panel(dir: &Path) -> Result<PanelData> {
    let y = read_matrix(&dir.join("Y.csv"))?;
    let mut features = Vec::new();
    loop {
        let path = dir.join(feature_file(features.len()));
        if !path.exists() {
            break;
        }
        features.push(read_matrix(&path)?);
    }
    PanelData::new(features, y, None)
}

pub fn read_meta(dir: &Path) -> Result<Option<PanelMeta>> {
    let path = dir.join("meta.txt");
    if !path.exists() {
        return Ok(None);
    }
    PanelMeta::parse(&fs::read_to_string(path)?).map(Some)
}
