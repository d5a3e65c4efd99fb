//! Session directories: a JSON manifest plus one CSV file per modality.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::GroundTruth;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{MovementLabel, MultiChannelSignal, RawSession};

pub const SESSION_FORMAT: &str = "bmui-session/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GROUND_TRUTH_FILE: &str = "groundtruth.csv";

/// Whether the stored signals are as recorded or already filtered.
///
/// A preprocessed session holds CAR + band-passed EEG, the EMG envelope and
/// the force trace, all aligned to 1000 Hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStage {
    #[default]
    Raw,
    Preprocessed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityDescriptor {
    pub name: String,
    pub rate_hz: f64,
    pub channel_names: Vec<String>,
    pub units: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub format_version: String,
    pub subject_id: String,
    #[serde(default)]
    pub stage: SessionStage,
    pub modalities: Vec<ModalityDescriptor>,
    pub movement_labels: Vec<MovementLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

impl SessionManifest {
    fn modality(&self, name: &str) -> Result<&ModalityDescriptor> {
        self.modalities
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::CorruptSession(format!("manifest has no {name} modality")))
    }
}

/// Everything found in a session directory.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession<T> {
    pub session: RawSession<T>,
    pub stage: SessionStage,
    pub ground_truth: Option<GroundTruth>,
}

/// Formats a sample with 9 significant digits.
pub fn fmt9<T: Real>(v: T) -> String {
    format!("{:.8e}", v.as_f64())
}

fn write_signal<T: Real>(path: &Path, sig: &MultiChannelSignal<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(sig.channel_names()).map_err(csv_err)?;
    let mut row = Vec::with_capacity(sig.n_channels());
    for t in 0..sig.n_samples() {
        row.clear();
        row.extend(sig.rows().iter().map(|r| fmt9(r[t])));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    if !path.exists() {
        return Err(Error::NotFound(path.display().to_string()));
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(corrupt(path))?.iter().map(str::to_owned).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec.map_err(corrupt(path))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::CorruptSession(format!("{}: bad number {field:?}", path.display())))?;
            cols[c].push(v);
        }
    }
    Ok((header, cols))
}

fn read_signal<T: Real>(dir: &Path, desc: &ModalityDescriptor) -> Result<MultiChannelSignal<T>> {
    let path = dir.join(&desc.file);
    let (header, cols) = read_table(&path)?;
    if header != desc.channel_names {
        return Err(Error::CorruptSession(format!(
            "{}: manifest lists {} channels, file has {} columns",
            desc.file,
            desc.channel_names.len(),
            header.len()
        )));
    }
    let data = cols.into_iter().map(|c| c.into_iter().map(T::lit).collect()).collect();
    MultiChannelSignal::new(desc.rate_hz, header, data)
        .map_err(|e| Error::CorruptSession(format!("{}: {e}", desc.file)))
}

fn descriptor<T: Real>(name: &str, units: &str, sig: &MultiChannelSignal<T>) -> ModalityDescriptor {
    ModalityDescriptor {
        name: name.into(),
        rate_hz: sig.rate_hz(),
        channel_names: sig.channel_names().to_vec(),
        units: units.into(),
        file: format!("{name}.csv"),
    }
}

/// Writes `session` (and optional ground truth) into `dir`, creating it.
pub fn save_session_dir<T: Real>(
    dir: &Path,
    session: &RawSession<T>,
    stage: SessionStage,
    ground_truth: Option<&GroundTruth>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let emg_units = if stage == SessionStage::Preprocessed { "uV (envelope)" } else { "uV" };
    let modalities = vec![
        descriptor("eeg", "uV", &session.eeg),
        descriptor("emg", emg_units, &session.emg),
        descriptor("force", "N", &session.force),
    ];
    for (m, sig) in modalities.iter().zip([&session.eeg, &session.emg, &session.force]) {
        write_signal(&dir.join(&m.file), sig)?;
    }
    if let Some(gt) = ground_truth {
        write_ground_truth(&dir.join(GROUND_TRUTH_FILE), gt)?;
    }
    let manifest = SessionManifest {
        format_version: SESSION_FORMAT.into(),
        subject_id: session.subject_id.clone(),
        stage,
        modalities,
        movement_labels: session.movement_labels.clone(),
        ground_truth: ground_truth.map(|_| GROUND_TRUTH_FILE.to_string()),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

pub fn save_session<T: Real>(session: &RawSession<T>, dir: &Path) -> Result<()> {
    save_session_dir(dir, session, SessionStage::Raw, None)
}

pub fn read_manifest(dir: &Path) -> Result<SessionManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let manifest: SessionManifest =
        serde_json::from_str(&text).map_err(|e| Error::CorruptSession(format!("manifest: {e}")))?;
    if manifest.format_version != SESSION_FORMAT {
        return Err(Error::UnsupportedVersion(manifest.format_version));
    }
    Ok(manifest)
}

pub fn load_session_dir<T: Real>(dir: &Path) -> Result<StoredSession<T>> {
    let manifest = read_manifest(dir)?;
    let session = RawSession {
        subject_id: manifest.subject_id.clone(),
        eeg: read_signal(dir, manifest.modality("eeg")?)?,
        emg: read_signal(dir, manifest.modality("emg")?)?,
        force: read_signal(dir, manifest.modality("force")?)?,
        movement_labels: manifest.movement_labels.clone(),
    };
    let ground_truth = match &manifest.ground_truth {
        Some(f) => Some(read_ground_truth(&dir.join(f))?),
        None => None,
    };
    Ok(StoredSession { session, stage: manifest.stage, ground_truth })
}

pub fn load_session<T: Real>(dir: &Path) -> Result<RawSession<T>> {
    Ok(load_session_dir(dir)?.session)
}

fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "u_flex", "u_extend"]).map_err(csv_err)?;
    for (i, (f, e)) in gt.u_flex.iter().zip(&gt.u_extend).enumerate() {
        let t = i as f64 / gt.rate_hz;
        w.write_record([fmt9(t), fmt9(*f), fmt9(*e)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let (header, mut cols) = read_table(path)?;
    if header != ["t", "u_flex", "u_extend"] {
        return Err(Error::CorruptSession(format!("{}: unexpected header {header:?}", path.display())));
    }
    let u_extend = cols.pop().unwrap_or_default();
    let u_flex = cols.pop().unwrap_or_default();
    let t = cols.pop().unwrap_or_default();
    let rate_hz = if t.len() > 1 { ((t.len() - 1) as f64 / t[t.len() - 1]).round() } else { 1000.0 };
    Ok(GroundTruth { rate_hz, u_flex, u_extend })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::CorruptSession(format!("{other:?}")),
    }
}

fn corrupt(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::CorruptSession(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_sample() -> RawSession<f64> {
        let s = |p: &str| MultiChannelSignal::from_rows(1.0, p, vec![vec![0.123456789123]]).unwrap();
        RawSession {
            subject_id: "s0".into(),
            eeg: s("eeg"),
            emg: s("emg"),
            force: s("force"),
            movement_labels: vec![MovementLabel { trial_index: 0, label: "flex-high".into() }],
        }
    }

    #[test]
    fn single_sample_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = one_sample();
        save_session(&s, dir.path()).unwrap();
        let back: RawSession<f64> = load_session(dir.path()).unwrap();
        assert_eq!(back.subject_id, s.subject_id);
        assert_eq!(back.movement_labels, s.movement_labels);
        assert_eq!(back.eeg.channel(0)[0], 0.123456789);
        save_session(&back, dir.path()).unwrap();
        assert_eq!(load_session::<f64>(dir.path()).unwrap(), back);
    }

    #[test]
    fn column_count_mismatch_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        save_session(&one_sample(), dir.path()).unwrap();
        let mpath = dir.path().join(MANIFEST_FILE);
        let mut m: SessionManifest = serde_json::from_str(&fs::read_to_string(&mpath).unwrap()).unwrap();
        m.modalities[0].channel_names = (0..16).map(|i| format!("eeg{i}")).collect();
        fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(load_session::<f64>(dir.path()), Err(Error::CorruptSession(_))));
    }

    #[test]
    fn missing_and_versioned() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_session::<f64>(dir.path()), Err(Error::NotFound(_))));
        save_session(&one_sample(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("emg.csv")).unwrap();
        assert!(matches!(load_session::<f64>(dir.path()), Err(Error::NotFound(_))));
        let mpath = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).unwrap().replace(SESSION_FORMAT, "bmui-session/9");
        fs::write(&mpath, text).unwrap();
        assert!(matches!(load_session::<f64>(dir.path()), Err(Error::UnsupportedVersion(_))));
    }

    #[test]
    fn ragged_row_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        save_session(&one_sample(), dir.path()).unwrap();
        fs::write(dir.path().join("eeg.csv"), "eeg0\n1.0,2.0\n").unwrap();
        assert!(matches!(load_session::<f64>(dir.path()), Err(Error::CorruptSession(_))));
    }
}
