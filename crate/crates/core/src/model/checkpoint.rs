//! Text checkpoints: a config section followed by named tensors, each with a
//! `tensor <name> <rows> <cols>` header and one line per row.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::config::Config;
use super::network::Model;
use super::params::ParamStore;
use crate::error::{Error, Result};

const MAGIC: &str = "topo-rationale checkpoint 1";

pub fn to_text(model: &Model, config: &Config) -> String {
    let mut out = format!("{MAGIC}\n[config]\n{}[tensors]\n", config.to_text());
    for (name, t) in model.params.iter() {
        let _ = writeln!(out, "tensor {name} {} {}", t.nrows(), t.ncols());
        for row in t.outer_iter() {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn from_text(text: &str) -> Result<(Model, Config)> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Parse("not a checkpoint".into()));
    }
    if lines.next() != Some("[config]") {
        return Err(Error::Parse("missing [config] section".into()));
    }
    let mut config_text = String::new();
    for line in lines.by_ref() {
        if line == "[tensors]" {
            break;
        }
        config_text.push_str(line);
        config_text.push('\n');
    }
    let config = Config::from_text(&config_text)?;
    let mut store = ParamStore::new();
    while let Some(header) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [tag, name, rows, cols] = parts[..] else {
            return Err(Error::Parse(format!("bad tensor header {header:?}")));
        };
        let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad shape in {header:?}")));
        if tag != "tensor" {
            return Err(Error::Parse(format!("bad tensor header {header:?}")));
        }
        let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("truncated tensor {name}")))?;
            for v in line.split_whitespace() {
                values.push(v.parse::<f64>().map_err(|_| Error::Parse(format!("bad value {v:?} in {name}")))?);
            }
        }
        let t = Array2::from_shape_vec((rows, cols), values)
            .map_err(|_| Error::Parse(format!("tensor {name} does not have shape {rows}x{cols}")))?;
        store.insert(name, t)?;
    }
    Ok((Model::from_params(store, config.degree_buckets)?, config))
}

pub fn save(path: &Path, model: &Model, config: &Config) -> Result<()> {
    std::fs::write(path, to_text(model, config))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Model, Config)> {
    from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use crate::rng::rng_from_seed;

    #[test]
    fn round_trip_is_exact() {
        let arch = Architecture { in_dim: 3, hidden: 4, layers: 2, classes: 3, elements: 2, degree_buckets: 0 };
        let model = Model::new(arch, &mut rng_from_seed(2)).unwrap();
        let config = Config { seed: 17, degree_buckets: 0, ..Config::default() };
        let (back, cfg) = from_text(&to_text(&model, &config)).unwrap();
        assert_eq!(back, model);
        assert_eq!(cfg, config);
    }

    #[test]
    fn rejects_corruption() {
        let arch = Architecture { in_dim: 1, hidden: 2, layers: 1, classes: 2, elements: 1, degree_buckets: 0 };
        let model = Model::new(arch, &mut rng_from_seed(2)).unwrap();
        let config = Config { degree_buckets: 0, ..Config::default() };
        let text = to_text(&model, &config);
        assert!(from_text(&text).is_ok());
        assert!(from_text("hello").is_err());
        assert!(from_text(&text.replace("tensor enc.in.w 1 2", "tensor enc.in.w 2 2")).is_err());
        let truncated: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(from_text(&truncated).is_err());
    }
}
