//! On-disk dataset format and CSV import.
//!
//! Binary layout (little-endian): magic `LHD1`, u32 sample count, u16 height
//! (12), u16 width (12), then per sample one u8 label followed by 144 pixel
//! bytes (each 0 or 1, row-major). The CSV importer accepts rows of 144
//! pixel values followed by the label, for converting externally sourced
//! data into [`Dataset`]s.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::{Dataset, Sample, GRID, PIXELS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LHD1";

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(d.len() as u32).to_le_bytes())?;
    out.write_all(&(GRID as u16).to_le_bytes())?;
    out.write_all(&(GRID as u16).to_le_bytes())?;
    for sample in &d.samples {
        out.write_all(&[sample.label])?;
        let pixels: Vec<u8> = sample.grid.iter().map(|&v| v as u8).collect();
        out.write_all(&pixels)?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = [0u8; 12];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02x?}, expected {MAGIC:02x?}",
            &header[..4]
        )));
    }
    let count = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u16::from_le_bytes(header[8..10].try_into().unwrap()) as usize;
    let width = u16::from_le_bytes(header[10..12].try_into().unwrap()) as usize;
    if height != GRID || width != GRID {
        return Err(Error::Format(format!(
            "unsupported grid {height}x{width}, expected {GRID}x{GRID}"
        )));
    }

    let mut samples = Vec::with_capacity(count);
    let mut buf = vec![0u8; 1 + PIXELS];
    for i in 0..count {
        reader
            .read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("truncated payload at sample {i}")))?;
        let label = buf[0];
        if label > 1 {
            return Err(Error::Format(format!("sample {i}: bad label {label}")));
        }
        let mut grid = Vec::with_capacity(PIXELS);
        for (j, &p) in buf[1..].iter().enumerate() {
            if p > 1 {
                return Err(Error::Format(format!("sample {i}: bad pixel {p} at {j}")));
            }
            grid.push(p as f64);
        }
        samples.push(Sample { grid, label });
    }
    // trailing bytes mean the header count lied
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after declared samples".into()));
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Dataset::new(name, samples))
}

/// Import a headerless CSV of `144 pixel values, label` per row.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Format(format!("csv open: {e}")))?;
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("csv row {row}: {e}")))?;
        if record.len() != PIXELS + 1 {
            return Err(Error::Format(format!(
                "csv row {row}: expected {} fields, got {}",
                PIXELS + 1,
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(PIXELS);
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("csv row {row} col {col}: not a number")))?;
            values.push(v);
        }
        let label_value = values.pop().unwrap();
        if label_value != 0.0 && label_value != 1.0 {
            return Err(Error::Format(format!(
                "csv row {row}: label must be 0 or 1, got {label_value}"
            )));
        }
        samples.push(Sample::new(values, label_value as u8).map_err(|e| {
            Error::Format(format!("csv row {row}: {e}"))
        })?);
    }
    if samples.is_empty() {
        return Err(Error::Format("csv holds no samples".into()));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Ok(Dataset::new(name, samples))
}
