use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, DatasetManifest, Recording, TrialEntry};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Loads a manifest and every trial it references.
///
/// `manifest_path` may point at the manifest file itself or at the
/// directory holding `manifest.json`.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let mut path = manifest_path.as_ref().to_path_buf();
    if path.is_dir() {
        path.push(MANIFEST_FILE);
    }
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let text = fs::read_to_string(&path)?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest(e.to_string()))?;
    manifest.validate()?;

    let root = path.parent().unwrap_or(Path::new("."));
    let recordings = manifest
        .trials
        .iter()
        .map(|entry| {
            let file = root.join(&entry.file);
            if !file.is_file() {
                return Err(Error::MissingFile(file));
            }
            let reader = fs::File::open(&file)?;
            let (names, samples) = read_trial_csv(reader)?;
            if names != manifest.channel_names {
                return Err(Error::ChannelMismatch(format!(
                    "{}: header {:?} does not match manifest channels {:?}",
                    file.display(),
                    names,
                    manifest.channel_names
                )));
            }
            let rec = recording_for(entry, &manifest, samples);
            rec.validate()?;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        manifest,
        recordings,
    })
}

fn recording_for(
    entry: &TrialEntry,
    manifest: &DatasetManifest,
    samples: Vec<Vec<f64>>,
) -> Recording {
    Recording {
        samples,
        sampling_rate_hz: manifest.sampling_rate_hz,
        channel_names: manifest.channel_names.clone(),
        stimulus_freq_hz: entry.stimulus_freq_hz,
        subject_id: entry.subject_id.clone(),
        trial_id: entry.trial_id.clone(),
    }
}

/// Writes `manifest.json` and all trial CSVs below `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    dataset.validate()?;
    fs::create_dir_all(dir)?;
    for (entry, rec) in dataset.manifest.trials.iter().zip(&dataset.recordings) {
        let file = dir.join(&entry.file);
        if let Some(parent) = file.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = std::io::BufWriter::new(fs::File::create(&file)?);
        write_trial_csv(&mut out, &rec.channel_names, &rec.samples)?;
        out.flush()?;
    }
    let mut json = serde_json::to_string_pretty(&dataset.manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(())
}

/// Reads one trial CSV into `(channel names, [channel][time] samples)`.
pub fn read_trial_csv(reader: impl Read) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut samples = vec![Vec::new(); names.len()];
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::ChannelMismatch(format!(
                "row {} has {} fields, header has {}",
                line + 2,
                record.len(),
                names.len()
            )));
        }
        for (ch, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidRecording(format!("row {}: cannot parse {field:?}", line + 2))
            })?;
            samples[ch].push(v);
        }
    }
    Ok((names, samples))
}

/// Writes samples with `f64`'s shortest round-trip decimal form, which never
/// uses exponent notation.
pub fn write_trial_csv(writer: impl Write, names: &[String], samples: &[Vec<f64>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(names)?;
    let n = samples.first().map_or(0, Vec::len);
    let mut row = Vec::with_capacity(samples.len());
    for t in 0..n {
        row.clear();
        row.extend(samples.iter().map(|ch| ch[t].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
