//! Batch dataset generation: mask overlay on unmasked faces, random blur, and
//! an optional train/test split.
//!
//! Output layout under the output directory:
//!
//! ```text
//! images/000000_<stem>.png   augmented images
//! manifest.csv               path,label for every written image
//! failures.csv               path,error for records that could not be produced
//! train.csv, test.csv        only when a test fraction is requested
//! ```
//!
//! Record `i` draws from ChaCha8 seeded with the run seed on stream `i`, so
//! records can be processed in parallel without changing the output.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blur::{blur_augment, pick_blur, BlurConfig};
use super::mask::{overlay_mask, LandmarkSet, MaskAsset};
use crate::error::{Error, Result};
use crate::image_io;

/// One `path,label` row. Label 0 is unmasked, 1 is masked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub label: u8,
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse("manifest", e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "label"] {
        return Err(Error::parse(
            "manifest",
            format!("expected header `path,label`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (n, record) in rdr.deserialize::<ManifestRow>().enumerate() {
        // Line 1 is the header.
        let line = n + 2;
        let row = record.map_err(|e| Error::parse("manifest", format!("line {line}: {e}")))?;
        if row.label > 1 {
            return Err(Error::validation(
                "manifest",
                format!("line {line}: label {} is not 0 or 1", row.label),
            ));
        }
        if row.path.is_empty() {
            return Err(Error::validation("manifest", format!("line {line}: empty path")));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_manifest_file(path: &Path) -> Result<Vec<ManifestRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
        Error::Validation { message, .. } => Error::validation(path.display().to_string(), message),
        other => other,
    })
}

pub fn write_manifest<W: Write>(writer: W, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["path", "label"]).map_err(|e| Error::parse("manifest", e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::parse("manifest", e))?;
    }
    w.flush().map_err(|e| Error::io("manifest", e))
}

fn write_manifest_file(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut buf = Vec::new();
    write_manifest(&mut buf, rows)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Loads every `*.png` in `dir`, sorted by file name, as RGBA mask assets.
pub fn load_mask_assets(dir: &Path) -> Result<Vec<MaskAsset>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            MaskAsset::new(name, image_io::load(p)?)
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    /// Mask graphics used round-robin on label-0 records. Empty disables
    /// mask overlay.
    pub masks: Vec<MaskAsset>,
    /// Directory holding `<image stem>.json` landmark files.
    pub landmarks_dir: Option<PathBuf>,
    /// Blur draw ranges; `None` disables blurring.
    pub blur: Option<BlurConfig>,
    pub seed: u64,
    /// Fraction of output rows assigned to `test.csv`.
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordFailure {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetOutput {
    pub rows: Vec<ManifestRow>,
    pub failures: Vec<RecordFailure>,
    pub train: Option<Vec<ManifestRow>>,
    pub test: Option<Vec<ManifestRow>>,
}

/// Record RNG: ChaCha8 with the run seed, stream = record index.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Indices of the rows assigned to the test split, ascending.
pub fn test_split(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let n_test = ((n as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut record_rng(seed, u64::MAX));
    let mut test = order[..n_test].to_vec();
    test.sort_unstable();
    test
}

struct Job<'a> {
    index: usize,
    row: &'a ManifestRow,
    mask: Option<&'a MaskAsset>,
}

fn process_record(job: &Job<'_>, base: &Path, out_dir: &Path, opts: &GenerateOptions) -> Result<ManifestRow> {
    let src = base.join(&job.row.path);
    let mut img = image_io::load(&src)?;
    let mut label = job.row.label;
    if let Some(asset) = job.mask {
        let stem = src.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let dir = opts.landmarks_dir.as_deref().unwrap_or(base);
        let lm = LandmarkSet::load(&dir.join(format!("{stem}.json")))?;
        img = overlay_mask(&img, &lm, asset)?;
        label = 1;
    }
    if let Some(cfg) = &opts.blur {
        let mut rng = record_rng(opts.seed, job.index as u64);
        let choice = pick_blur(&mut rng, cfg);
        img = blur_augment(&img, &choice);
    }
    let stem = Path::new(&job.row.path)
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    let rel = format!("images/{:06}_{stem}.png", job.index);
    image_io::save(&img, &out_dir.join(&rel))?;
    Ok(ManifestRow { path: rel, label })
}

/// Runs the augmentation over every row of `input_manifest` and writes the
/// result under `out_dir`. Image paths in the manifest are relative to the
/// manifest's directory. Per-record failures are collected, not fatal.
pub fn generate_dataset(input_manifest: &Path, out_dir: &Path, opts: &GenerateOptions) -> Result<DatasetOutput> {
    let rows = read_manifest_file(input_manifest)?;
    let base = input_manifest.parent().unwrap_or(Path::new("."));
    let images_dir = out_dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;

    let mut unmasked_seen = 0usize;
    let jobs: Vec<Job<'_>> = rows
        .iter()
        .enumerate()
        .map(|(index, row)| {
            let mask = (row.label == 0 && !opts.masks.is_empty()).then(|| {
                let asset = &opts.masks[unmasked_seen % opts.masks.len()];
                unmasked_seen += 1;
                asset
            });
            Job { index, row, mask }
        })
        .collect();

    let results: Vec<Result<ManifestRow>> = jobs
        .par_iter()
        .map(|job| process_record(job, base, out_dir, opts))
        .collect();

    let mut output = DatasetOutput::default();
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(row) => output.rows.push(row),
            Err(e) => {
                log::warn!("record {} ({}): {e}", job.index, job.row.path);
                output.failures.push(RecordFailure {
                    path: job.row.path.clone(),
                    error: e.to_string(),
                });
            }
        }
    }

    write_manifest_file(&out_dir.join("manifest.csv"), &output.rows)?;
    let failures_path = out_dir.join("failures.csv");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["path", "error"]).map_err(|e| Error::parse("failures", e))?;
    for f in &output.failures {
        w.serialize(f).map_err(|e| Error::parse("failures", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse("failures", e))?;
    std::fs::write(&failures_path, bytes).map_err(|e| Error::io(&failures_path, e))?;

    if let Some(fraction) = opts.test_fraction {
        let test_idx = test_split(output.rows.len(), fraction, opts.seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut next = test_idx.iter().peekable();
        for (i, row) in output.rows.iter().enumerate() {
            if next.peek() == Some(&&i) {
                next.next();
                test.push(row.clone());
            } else {
                train.push(row.clone());
            }
        }
        write_manifest_file(&out_dir.join("train.csv"), &train)?;
        write_manifest_file(&out_dir.join("test.csv"), &test)?;
        output.train = Some(train);
        output.test = Some(test);
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_errors() {
        let rows = read_manifest("path,label\na.png,0\nb.png,1\n".as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        let mut buf = Vec::new();
        write_manifest(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "path,label\na.png,0\nb.png,1\n");

        assert!(read_manifest("file,label\na.png,0\n".as_bytes()).is_err());
        let err = read_manifest("path,label\na.png,0\nb.png,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_manifest("path,label\na.png,x\n".as_bytes()).is_err());
        assert!(read_manifest("path,label\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn split_sizes() {
        assert_eq!(test_split(100, 0.10, 1).len(), 10);
        assert_eq!(test_split(0, 0.10, 1).len(), 0);
        assert_eq!(test_split(7, 0.10, 1).len(), 1);
        assert_eq!(test_split(50, 0.2, 9), test_split(50, 0.2, 9));
    }
}
