//! On-disk dataset layout. A dataset directory holds:
//!
//! | file          | content                                                        |
//! |---------------|----------------------------------------------------------------|
//! | `spec.json`   | `{"spec": DatasetSpec, "samples": N}`                          |
//! | `labels.csv`  | `cultivation,oil_pct,time_h,fructose,urea,biomass,hb,hhx`      |
//! | `spectra.bin` | `N×m` little-endian `f64`, row-major, no header                |
//! | `spectra.json`| `{"rows": N, "cols": m, "dtype": "f64le", "order": "row-major", "grid": {...}}` |
//! | `norm.json`   | `NormRecord` or `null` when labels are raw (g/L)               |
//!
//! Labels in `labels.csv` are normalized exactly when `norm.json` is not null.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::build::{Dataset, SampleMeta};
use super::norm::NormRecord;
use super::spec::DatasetSpec;
use crate::error::{Error, Result};
use crate::spectra::{WavenumberGrid, SUBSTANCES};
use crate::Real;

#[derive(Serialize, Deserialize)]
struct SpecFile {
    spec: DatasetSpec,
    samples: usize,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectraHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub order: String,
    pub grid: WavenumberGrid,
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn opt<V: ToString>(v: Option<V>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_dataset<T: Real>(dir: &Path, data: &Dataset<T>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(
        &dir.join("spec.json"),
        &SpecFile {
            spec: data.spec.clone(),
            samples: data.len(),
        },
    )?;
    write_json(&dir.join("norm.json"), &data.norm)?;
    write_json(
        &dir.join("spectra.json"),
        &SpectraHeader {
            rows: data.x.nrows(),
            cols: data.x.ncols(),
            dtype: "f64le".into(),
            order: "row-major".into(),
            grid: data.grid,
        },
    )?;

    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("labels.csv"))?));
    let mut header = vec!["cultivation", "oil_pct", "time_h"];
    header.extend(SUBSTANCES.iter().take(data.y.ncols()));
    wtr.write_record(&header)?;
    for (row, meta) in data.y.rows().into_iter().zip(&data.meta) {
        let mut rec = vec![opt(meta.cultivation), opt(meta.oil_pct), opt(meta.time_h)];
        rec.extend(row.iter().map(|v| v.as_f64().to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;

    let mut bin = BufWriter::new(File::create(dir.join("spectra.bin"))?);
    for v in data.x.iter() {
        bin.write_all(&v.as_f64().to_le_bytes())?;
    }
    bin.flush()?;
    Ok(())
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FixtureMissing(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_dataset<T: Real>(dir: &Path) -> Result<Dataset<T>> {
    let spec_file: SpecFile = read_json(&dir.join("spec.json"))?;
    let norm: Option<NormRecord> = read_json(&dir.join("norm.json"))?;
    let header: SpectraHeader = read_json(&dir.join("spectra.json"))?;
    if header.dtype != "f64le" || header.order != "row-major" {
        return Err(Error::InvalidInput(format!(
            "unsupported spectra encoding {} / {}",
            header.dtype, header.order
        )));
    }

    let labels_path = dir.join("labels.csv");
    let origin = labels_path.display().to_string();
    let mut rdr = csv::Reader::from_path(&labels_path)?;
    let k = rdr.headers()?.len().saturating_sub(3);
    let mut y = Array2::<T>::zeros((header.rows, k));
    let mut meta = Vec::with_capacity(header.rows);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let perr = |msg: String| Error::Parse {
            path: origin.clone(),
            line,
            msg,
        };
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        if i >= header.rows {
            return Err(perr("more label rows than spectra".into()));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| perr(format!("`{s}` is not a number")))
            }
        };
        meta.push(SampleMeta {
            cultivation: num(&rec[0])?.map(|v| v as u32),
            oil_pct: num(&rec[1])?,
            time_h: num(&rec[2])?,
        });
        for j in 0..k {
            let v = num(rec.get(3 + j).unwrap_or(""))?.ok_or_else(|| perr(format!("missing label {j}")))?;
            y[(i, j)] = T::lit(v);
        }
    }
    if meta.len() != header.rows {
        return Err(Error::InvalidInput(format!(
            "{origin}: {} label rows for {} spectra",
            meta.len(),
            header.rows
        )));
    }

    let mut bytes = Vec::new();
    BufReader::new(File::open(dir.join("spectra.bin"))?).read_to_end(&mut bytes)?;
    if bytes.len() != header.rows * header.cols * 8 {
        return Err(Error::InvalidInput(format!(
            "spectra.bin has {} bytes, expected {}",
            bytes.len(),
            header.rows * header.cols * 8
        )));
    }
    let values: Vec<T> = bytes
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let x =
        Array2::from_shape_vec((header.rows, header.cols), values).map_err(|e| Error::InvalidInput(e.to_string()))?;

    Ok(Dataset {
        spec: spec_file.spec,
        grid: header.grid,
        x,
        y,
        meta,
        norm,
    })
}
