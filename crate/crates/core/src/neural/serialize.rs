//! `bmui-model/1` text format.
//!
//! ```text
//! bmui-model/1
//! kind regressor
//! n_eeg_ch 16
//! ...
//! input_mean 16 <values>
//! tensor embed.weight 2 160 64
//! <values>
//! end
//! ```
//! Values are written with 17 significant digits so `f64` weights survive
//! the round trip bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::classifier::{ClassifierConfig, ClassifierModel};
use super::gradcheck::ModelKind;
use super::norm::Standardizer;
use super::regressor::{RegressorConfig, RegressorModel};
use super::tensor::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MODEL_FORMAT: &str = "bmui-model/1";
const PER_LINE: usize = 8;

/// Either trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Regressor(RegressorModel<T>),
    Classifier(ClassifierModel<T>),
}

impl<T> Model<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Regressor(_) => ModelKind::Regressor,
            Model::Classifier(_) => ModelKind::Classifier,
        }
    }
}

fn fmt17<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

fn push_values<T: Real>(out: &mut String, vals: &[T]) {
    for chunk in vals.chunks(PER_LINE) {
        let line: Vec<String> = chunk.iter().map(|&v| fmt17(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

fn push_vector<T: Real>(out: &mut String, key: &str, vals: &[T]) {
    let _ = write!(out, "{key} {}", vals.len());
    for &v in vals {
        let _ = write!(out, " {}", fmt17(v));
    }
    out.push('\n');
}

fn push_params<T: Real>(out: &mut String, params: &ParamSet<T>) {
    for (name, t) in params.iter() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "tensor {name} {} {}", t.shape().len(), dims.join(" "));
        push_values(out, t.values());
    }
}

pub fn regressor_to_string<T: Real>(m: &RegressorModel<T>) -> String {
    let c = m.config();
    let mut out = format!("{MODEL_FORMAT}\nkind regressor\n");
    for (k, v) in [
        ("n_eeg_ch", c.n_eeg_ch),
        ("n_emg_ch", c.n_emg_ch),
        ("window", c.window),
        ("patch", c.patch),
        ("d_model", c.d_model),
        ("n_heads", c.n_heads),
        ("n_layers", c.n_layers),
    ] {
        let _ = writeln!(out, "{k} {v}");
    }
    push_vector(&mut out, "input_mean", &m.input_norm.mean);
    push_vector(&mut out, "input_std", &m.input_norm.std);
    push_vector(&mut out, "target_mean", &m.target_norm.mean);
    push_vector(&mut out, "target_std", &m.target_norm.std);
    let trials: Vec<String> = m.test_trials.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "test_trials {} {}", trials.len(), trials.join(" "));
    push_params(&mut out, m.params());
    out.push_str("end\n");
    out
}

pub fn classifier_to_string<T: Real>(m: &ClassifierModel<T>) -> String {
    let c = m.config();
    let mut out = format!("{MODEL_FORMAT}\nkind classifier\n");
    for (k, v) in [("n_channels", c.n_channels), ("n_steps", c.n_steps), ("n_filters", c.n_filters)] {
        let _ = writeln!(out, "{k} {v}");
    }
    push_vector(&mut out, "input_mean", &m.input_norm.mean);
    push_vector(&mut out, "input_std", &m.input_norm.std);
    push_params(&mut out, m.params());
    out.push_str("end\n");
    out
}

struct Tokens<'a> {
    it: std::str::SplitWhitespace<'a>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptModel(msg.into())
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.it.next().ok_or_else(|| corrupt(format!("file ends before {what}")))
    }

    fn expect(&mut self, key: &str) -> Result<()> {
        let got = self.next(key)?;
        if got == key {
            Ok(())
        } else {
            Err(corrupt(format!("expected {key:?}, found {got:?}")))
        }
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let t = self.next(what)?;
        t.parse().map_err(|_| corrupt(format!("{what}: {t:?} is not a count")))
    }

    fn real<T: Real>(&mut self, what: &str) -> Result<T> {
        let t = self.next(what)?;
        let v: f64 = t.parse().map_err(|_| corrupt(format!("{what}: {t:?} is not a number")))?;
        if !v.is_finite() {
            return Err(corrupt(format!("{what}: non-finite value")));
        }
        Ok(T::lit(v))
    }

    fn field(&mut self, key: &str) -> Result<usize> {
        self.expect(key)?;
        self.usize(key)
    }

    fn vector<T: Real>(&mut self, key: &str) -> Result<Vec<T>> {
        let n = self.field(key)?;
        (0..n).map(|_| self.real(key)).collect()
    }

    fn params<T: Real>(&mut self) -> Result<ParamSet<T>> {
        let mut p = ParamSet::default();
        loop {
            match self.next("end")? {
                "end" => break,
                "tensor" => {
                    let name = self.next("tensor name")?.to_string();
                    let rank = self.usize(&name)?;
                    let shape: Vec<usize> = (0..rank).map(|_| self.usize(&name)).collect::<Result<_>>()?;
                    let n: usize = shape.iter().product();
                    let values: Vec<T> = (0..n).map(|_| self.real(&name)).collect::<Result<_>>()?;
                    p.push(name, Tensor::new(shape, values).map_err(|e| corrupt(e.to_string()))?);
                }
                other => return Err(corrupt(format!("unexpected token {other:?}"))),
            }
        }
        if let Some(extra) = self.it.next() {
            return Err(corrupt(format!("trailing data after end: {extra:?}")));
        }
        Ok(p)
    }
}

fn header<'a>(text: &'a str) -> Result<(ModelKind, Tokens<'a>)> {
    let mut t = Tokens { it: text.split_whitespace() };
    let version = t.next("format line")?;
    if version != MODEL_FORMAT {
        return Err(corrupt(format!("unsupported model format {version:?}")));
    }
    t.expect("kind")?;
    let kind = match t.next("kind")? {
        "regressor" => ModelKind::Regressor,
        "classifier" => ModelKind::Classifier,
        k => return Err(corrupt(format!("unknown model kind {k:?}"))),
    };
    Ok((kind, t))
}

pub fn model_from_str<T: Real>(text: &str) -> Result<Model<T>> {
    let (kind, mut t) = header(text)?;
    match kind {
        ModelKind::Regressor => {
            let cfg = RegressorConfig {
                n_eeg_ch: t.field("n_eeg_ch")?,
                n_emg_ch: t.field("n_emg_ch")?,
                window: t.field("window")?,
                patch: t.field("patch")?,
                d_model: t.field("d_model")?,
                n_heads: t.field("n_heads")?,
                n_layers: t.field("n_layers")?,
            };
            cfg.validate().map_err(|e| corrupt(e.to_string()))?;
            let input_norm = Standardizer { mean: t.vector("input_mean")?, std: t.vector("input_std")? };
            let target_norm = Standardizer { mean: t.vector("target_mean")?, std: t.vector("target_std")? };
            let n = t.field("test_trials")?;
            let test_trials = (0..n).map(|_| t.usize("test_trials")).collect::<Result<_>>()?;
            let params = t.params()?;
            Ok(Model::Regressor(RegressorModel::from_parts(cfg, params, input_norm, target_norm, test_trials)?))
        }
        ModelKind::Classifier => {
            let cfg = ClassifierConfig {
                n_channels: t.field("n_channels")?,
                n_steps: t.field("n_steps")?,
                n_filters: t.field("n_filters")?,
            };
            cfg.validate().map_err(|e| corrupt(e.to_string()))?;
            let input_norm = Standardizer { mean: t.vector("input_mean")?, std: t.vector("input_std")? };
            let params = t.params()?;
            Ok(Model::Classifier(ClassifierModel::from_parts(cfg, params, input_norm)?))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
        _ => Error::Io(e),
    })
}

pub fn save_model<T: Real>(model: &Model<T>, path: &Path) -> Result<()> {
    let text = match model {
        Model::Regressor(m) => regressor_to_string(m),
        Model::Classifier(m) => classifier_to_string(m),
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model<T: Real>(path: &Path) -> Result<Model<T>> {
    model_from_str(&read(path)?)
}

pub fn save_regressor<T: Real>(m: &RegressorModel<T>, path: &Path) -> Result<()> {
    fs::write(path, regressor_to_string(m))?;
    Ok(())
}

pub fn save_classifier<T: Real>(m: &ClassifierModel<T>, path: &Path) -> Result<()> {
    fs::write(path, classifier_to_string(m))?;
    Ok(())
}

pub fn load_regressor<T: Real>(path: &Path) -> Result<RegressorModel<T>> {
    match load_model(path)? {
        Model::Regressor(m) => Ok(m),
        Model::Classifier(_) => Err(corrupt(format!("{} holds a classifier, not a regressor", path.display()))),
    }
}

pub fn load_classifier<T: Real>(path: &Path) -> Result<ClassifierModel<T>> {
    match load_model(path)? {
        Model::Classifier(m) => Ok(m),
        Model::Regressor(_) => Err(corrupt(format!("{} holds a regressor, not a classifier", path.display()))),
    }
}
