//! Batch manifests: one JSON file per generated cell directory naming
//! every sample's tensors by relative path. Reruns with the same plan
//! write byte-identical manifests; nothing time-dependent is recorded.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::SampleRecord;
use crate::io::tensor;
use crate::scm::{GroundTruth, Regime};
use crate::violations::ScheduleVariant;

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub index: u32,
    pub series: String,
    pub lwcg: String,
    pub inst: String,
    pub lsg: String,
}

/// Index of one generated cell: identity fields plus the sample files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub schema: u32,
    pub violation: String,
    pub level: u8,
    pub regime: Regime,
    pub seed: u64,
    pub count: u32,
    pub schedule_variant: ScheduleVariant,
    pub samples: Vec<SampleEntry>,
}

impl BatchManifest {
    /// Structural validation: schema, dense ids 0..count-1 in order, and
    /// every referenced file present under `dir`.
    pub fn validate(&self, dir: &Path) -> Result<()> {
        if self.schema != MANIFEST_SCHEMA {
            return Err(Error::Format {
                path: dir.join(MANIFEST_FILE).display().to_string(),
                reason: format!("schema {} unsupported (expected {MANIFEST_SCHEMA})", self.schema),
            });
        }
        if self.samples.len() != self.count as usize {
            return Err(Error::Format {
                path: dir.join(MANIFEST_FILE).display().to_string(),
                reason: format!("{} sample entries against count {}", self.samples.len(), self.count),
            });
        }
        for (k, entry) in self.samples.iter().enumerate() {
            if entry.index as usize != k {
                return Err(Error::Format {
                    path: dir.join(MANIFEST_FILE).display().to_string(),
                    reason: format!("sample ids must be dense, entry {k} has index {}", entry.index),
                });
            }
            for rel in [&entry.series, &entry.lwcg, &entry.inst, &entry.lsg] {
                if !dir.join(rel).is_file() {
                    return Err(Error::Format {
                        path: dir.join(MANIFEST_FILE).display().to_string(),
                        reason: format!("referenced file {rel} missing"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn truth_to_f64_3(a: &Array3<u8>) -> Array3<f64> {
    a.mapv(f64::from)
}

fn truth_to_f64_2(a: &Array2<u8>) -> Array2<f64> {
    a.mapv(f64::from)
}

/// Writes one sample's tensors and returns its manifest entry.
fn write_sample(dir: &Path, record: &SampleRecord) -> Result<SampleEntry> {
    let stem = format!("s{:04}", record.index);
    let entry = SampleEntry {
        index: record.index,
        series: format!("{stem}_x.tcda"),
        lwcg: format!("{stem}_lwcg.tcda"),
        inst: format!("{stem}_inst.tcda"),
        lsg: format!("{stem}_lsg.tcda"),
    };
    tensor::write_array2(&dir.join(&entry.series), record.x.view())?;
    tensor::write_array3(&dir.join(&entry.lwcg), truth_to_f64_3(&record.truth.lwcg).view())?;
    tensor::write_array2(&dir.join(&entry.inst), truth_to_f64_2(&record.truth.inst).view())?;
    tensor::write_array2(&dir.join(&entry.lsg), truth_to_f64_2(&record.truth.lsg).view())?;
    Ok(entry)
}

/// Materializes one cell's samples plus its manifest under `dir`.
/// Records must share the cell identity and arrive in index order.
pub fn write_batch(
    dir: &Path,
    violation: &str,
    level: u8,
    variant: ScheduleVariant,
    records: &[SampleRecord],
) -> Result<BatchManifest> {
    let Some(first) = records.first() else {
        return Err(Error::InvalidArgument("cannot write an empty batch".into()));
    };
    fs::create_dir_all(dir)?;
    let mut samples = Vec::with_capacity(records.len());
    for record in records {
        samples.push(write_sample(dir, record)?);
    }
    let manifest = BatchManifest {
        schema: MANIFEST_SCHEMA,
        violation: violation.to_owned(),
        level,
        regime: first.regime,
        seed: first.seed,
        count: records.len() as u32,
        schedule_variant: variant,
        samples,
    };
    manifest.validate(dir)?;
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// Loads and validates the manifest of one cell directory.
pub fn load_manifest(dir: &Path) -> Result<BatchManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: BatchManifest = serde_json::from_str(&text)?;
    manifest.validate(dir)?;
    Ok(manifest)
}

fn binarize2(path: &Path) -> Result<Array2<u8>> {
    Ok(tensor::read_array2(path)?.mapv(|v| u8::from(v != 0.0)))
}

/// Loads one sample's series and ground truth, cross-checking shapes.
pub fn load_sample(dir: &Path, entry: &SampleEntry) -> Result<(Array2<f64>, GroundTruth)> {
    let x = tensor::read_array2(&dir.join(&entry.series))?;
    let lwcg = tensor::read_array3(&dir.join(&entry.lwcg))?.mapv(|v| u8::from(v != 0.0));
    let inst = binarize2(&dir.join(&entry.inst))?;
    let lsg = binarize2(&dir.join(&entry.lsg))?;
    let d = x.nrows();
    let (ld, ld2, _) = lwcg.dim();
    if ld != d || ld2 != d || inst.dim() != (d, d) || lsg.dim() != (d, d) {
        return Err(Error::Format {
            path: dir.join(&entry.series).display().to_string(),
            reason: format!(
                "sample {} truth shapes do not match its {d}-variable series",
                entry.index
            ),
        });
    }
    Ok((x, GroundTruth { lwcg, inst, lsg }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{expand_plan, make_sample, Plan};
    use tempfile::tempdir;

    fn tiny_records() -> Vec<SampleRecord> {
        let plan = Plan {
            violations: vec!["obs_add".into()],
            levels: vec![2],
            regimes: vec![Regime { d: 5, l: 3, t: 60, p_lag: 0.15, p_inst: 0.1 }],
            count: 3,
            seed: 31,
            schedule_variant: ScheduleVariant::Default,
            exogenous_path: None,
        };
        let cells = expand_plan(&plan).unwrap();
        (0..plan.count)
            .map(|i| make_sample(plan.seed, &cells[0].configs, &cells[0].regime, i, None).unwrap())
            .collect()
    }

    #[test]
    fn batch_round_trips_and_validates() {
        let dir = tempdir().unwrap();
        let records = tiny_records();
        let written =
            write_batch(dir.path(), "obs_add", 2, ScheduleVariant::Default, &records).unwrap();
        let loaded = load_manifest(dir.path()).unwrap();
        assert_eq!(written, loaded);
        assert_eq!(loaded.count, 3);
        assert_eq!(loaded.violation, "obs_add");
        for (entry, record) in loaded.samples.iter().zip(&records) {
            let (x, truth) = load_sample(dir.path(), entry).unwrap();
            assert_eq!(x, record.x, "series must round-trip bit-exactly");
            assert_eq!(truth, record.truth);
        }
    }

    #[test]
    fn rerun_writes_identical_manifest_bytes() {
        let a = tempdir().unwrap();
        let b = tempdir().unwrap();
        let records = tiny_records();
        write_batch(a.path(), "obs_add", 2, ScheduleVariant::Default, &records).unwrap();
        write_batch(b.path(), "obs_add", 2, ScheduleVariant::Default, &records).unwrap();
        let bytes_a = fs::read(a.path().join(MANIFEST_FILE)).unwrap();
        let bytes_b = fs::read(b.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn missing_files_and_sparse_ids_are_rejected() {
        let dir = tempdir().unwrap();
        let records = tiny_records();
        let manifest =
            write_batch(dir.path(), "obs_add", 2, ScheduleVariant::Default, &records).unwrap();

        fs::remove_file(dir.path().join(&manifest.samples[1].lsg)).unwrap();
        assert!(load_manifest(dir.path()).is_err());

        // restore, then break the id density by hand
        tensor::write_array2(
            &dir.path().join(&manifest.samples[1].lsg),
            truth_to_f64_2(&records[1].truth.lsg).view(),
        )
        .unwrap();
        assert!(load_manifest(dir.path()).is_ok());
        let mut edited = manifest.clone();
        edited.samples[1].index = 7;
        assert!(edited.validate(dir.path()).is_err());

        let mut wrong_count = manifest;
        wrong_count.count = 2;
        assert!(wrong_count.validate(dir.path()).is_err());
    }

    #[test]
    fn tampered_tensor_shapes_fail_the_sample_load() {
        let dir = tempdir().unwrap();
        let records = tiny_records();
        let manifest =
            write_batch(dir.path(), "obs_add", 2, ScheduleVariant::Default, &records).unwrap();
        // overwrite the inst tensor with a wrong-shaped one
        tensor::write_tensor(&dir.path().join(&manifest.samples[0].inst), &[2, 2], &[0.0; 4])
            .unwrap();
        assert!(load_sample(dir.path(), &manifest.samples[0]).is_err());
    }
}
