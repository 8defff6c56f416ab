use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::vectorize::{Normalization, DEFAULT_ELEMENTS, TRAINING_NORMALIZATION};

/// Hyperparameters of a run. Everything here round-trips through the flat
/// `key = value` format used by config files and checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    /// Weight of the lower bound on the topological discrepancy.
    pub alpha: f64,
    /// Weight of the mixture prior.
    pub beta: f64,
    /// Weight of the width penalty inside the prior.
    pub gamma: f64,
    /// Weight of dimension 0 against dimension 1.
    pub lambda0: f64,
    /// Temperature of the edge gates.
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub hidden: usize,
    pub layers: usize,
    pub seed: u64,
    pub c_mode: Normalization,
    pub dropout: f64,
    /// Structure elements per homology dimension.
    pub elements: usize,
    /// One-hot degree buckets appended to the node features; 0 disables.
    pub degree_buckets: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.1,
            gamma: 0.01,
            lambda0: 1.0,
            tau: 1.0,
            lr: 1e-3,
            epochs: 20,
            batch: 128,
            hidden: 64,
            layers: 2,
            seed: 0,
            c_mode: Normalization::Constant(TRAINING_NORMALIZATION),
            dropout: 0.3,
            elements: DEFAULT_ELEMENTS,
            degree_buckets: 8,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl Config {
    pub const KEYS: [&'static str; 15] = [
        "alpha", "beta", "gamma", "lambda0", "tau", "lr", "epochs", "batch", "hidden", "layers", "seed", "c_mode",
        "dropout", "elements", "degree_buckets",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "lambda0" => self.lambda0 = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "elements" => self.elements = parse(key, value)?,
            "degree_buckets" => self.degree_buckets = parse(key, value)?,
            "c_mode" => {
                self.c_mode = match value {
                    "per_batch" => Normalization::PerBatch,
                    "constant" => Normalization::Constant(TRAINING_NORMALIZATION),
                    other => Normalization::Constant(parse(key, other)?),
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("lr", self.lr), ("tau", self.tau), ("lambda0", self.lambda0)];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{k} = {v} must be positive")));
        }
        for (k, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} = {v} must be non-negative")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.batch == 0 || self.hidden == 0 || self.layers == 0 || self.elements == 0 {
            return Err(Error::Config("batch, hidden, layers and elements must be positive".into()));
        }
        if let Normalization::Constant(c) = self.c_mode {
            if !(c > 0.0) {
                return Err(Error::Config(format!("normalisation constant {c} must be positive")));
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let c_mode = match self.c_mode {
            Normalization::PerBatch => "per_batch".to_string(),
            Normalization::Constant(c) => c.to_string(),
        };
        let mut out = String::new();
        for (k, v) in [
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("gamma", self.gamma.to_string()),
            ("lambda0", self.lambda0.to_string()),
            ("tau", self.tau.to_string()),
            ("lr", self.lr.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch", self.batch.to_string()),
            ("hidden", self.hidden.to_string()),
            ("layers", self.layers.to_string()),
            ("seed", self.seed.to_string()),
            ("c_mode", c_mode),
            ("dropout", self.dropout.to_string()),
            ("elements", self.elements.to_string()),
            ("degree_buckets", self.degree_buckets.to_string()),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = Config { alpha: 0.125, seed: 99, c_mode: Normalization::PerBatch, ..Config::default() };
        assert_eq!(Config::from_text(&c.to_text()).unwrap(), c);
        c.c_mode = Normalization::Constant(3.5);
        assert_eq!(Config::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = Config::from_text("# run\n\nalpha = 0.5  # stronger\nepochs=3\n").unwrap();
        assert_eq!((c.alpha, c.epochs, c.beta), (0.5, 3, 0.1));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::from_text("alpha 1"), Err(Error::Config(_))));
        assert!(matches!(Config::from_text("nope = 1"), Err(Error::Config(_))));
        assert!(matches!(Config::from_text("lr = -1"), Err(Error::Config(_))));
        assert!(matches!(Config::from_text("epochs = x"), Err(Error::Config(_))));
    }
}
