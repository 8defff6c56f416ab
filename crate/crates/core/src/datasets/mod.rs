//! Synthetic benchmarks with ground-truth rationale masks.

mod motifs;
mod synthetic;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use motifs::{gen_motif, Motif, MotifKind};
pub use synthetic::{barabasi_albert, binary_tree, ladder, wheel, Assembly};

use crate::error::{Error, Result};
use crate::graphs::{read_jsonl, write_jsonl, Graph};
use crate::rng::{rng_for, stream, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    BA2Motifs,
    BAHouseGrid,
    BAHouseAndGrid,
    BAHouseOrGrid,
    BAHouseOrGridNRnd,
    SPMotif,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Self::BA2Motifs,
        Self::BAHouseGrid,
        Self::BAHouseAndGrid,
        Self::BAHouseOrGrid,
        Self::BAHouseOrGridNRnd,
        Self::SPMotif,
    ];

    /// The spelling used in spec files.
    pub fn name(self) -> &'static str {
        match self {
            Self::BA2Motifs => "BA2Motifs",
            Self::BAHouseGrid => "BAHouseGrid",
            Self::BAHouseAndGrid => "BAHouseAndGrid",
            Self::BAHouseOrGrid => "BAHouseOrGrid",
            Self::BAHouseOrGridNRnd => "BAHouseOrGridNRnd",
            Self::SPMotif => "SPMotif",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown dataset variant {s:?}")))
    }
}

fn default_base_size() -> usize {
    20
}
fn default_one() -> usize {
    1
}
fn default_b() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub variant: Variant,
    pub num_graphs: usize,
    #[serde(default = "default_base_size")]
    pub base_size: usize,
    #[serde(default = "default_one")]
    pub ba_attach: usize,
    /// Largest motif multiplicity for the `NRnd` variant.
    #[serde(default = "default_one")]
    pub n: usize,
    /// Spurious correlation strength for `SPMotif`.
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(variant: Variant, num_graphs: usize, seed: u64) -> Self {
        Self { variant, num_graphs, base_size: 20, ba_attach: 1, n: 1, b: 0.5, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_graphs == 0 {
            return Err(Error::Config("num_graphs must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.variant == Variant::SPMotif {
            if !(1.0 / 3.0 - 1e-12..=1.0).contains(&self.b) {
                return Err(Error::Config(format!("b = {} outside [1/3, 1]", self.b)));
            }
        } else if self.ba_attach == 0 || self.base_size <= self.ba_attach {
            return Err(Error::Config(format!(
                "base_size {} too small for attachment {}",
                self.base_size, self.ba_attach
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Vec<Graph>,
    pub val: Vec<Graph>,
    pub test: Vec<Graph>,
}

pub const SPLIT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Which motifs a BA graph carries, as `(houses, grids, cycle5s)`.
fn ba_plan(spec: &DatasetSpec, i: usize) -> (usize, (usize, usize, usize)) {
    let label = i % 2;
    let j = i / 2;
    let plan = match (spec.variant, label) {
        (Variant::BA2Motifs, 0) => (1, 0, 0),
        (Variant::BA2Motifs, _) => (0, 0, 1),
        (Variant::BAHouseGrid, 0) => (1, 0, 0),
        (Variant::BAHouseGrid, _) => (0, 1, 0),
        (Variant::BAHouseAndGrid, 0) => {
            if j % 2 == 0 {
                (1, 0, 0)
            } else {
                (0, 1, 0)
            }
        }
        (Variant::BAHouseAndGrid, _) => (1, 1, 0),
        (Variant::BAHouseOrGrid | Variant::BAHouseOrGridNRnd, 0) => (0, 0, 0),
        (Variant::BAHouseOrGrid | Variant::BAHouseOrGridNRnd, _) => {
            // Label-1 graphs cycle through the 3n manifestations so that
            // each one gets an equal share.
            let n = if spec.variant == Variant::BAHouseOrGrid { 1 } else { spec.n };
            let cell = j % (3 * n);
            let count = cell / 3 + 1;
            match cell % 3 {
                0 => (count, count, 0),
                1 => (0, count, 0),
                _ => (count, 0, 0),
            }
        }
        (Variant::SPMotif, _) => unreachable!("not a BA variant"),
    };
    (label, plan)
}

fn gen_ba_graph(spec: &DatasetSpec, i: usize) -> Result<Graph> {
    let mut rng = rng_for(spec.seed, stream::DATASET, i as u64);
    let (label, (houses, grids, cycles)) = ba_plan(spec, i);
    let base = barabasi_albert(spec.base_size, spec.ba_attach, &mut rng)?;
    let mut a = Assembly::new(spec.base_size, base);
    let mut kinds = Vec::new();
    kinds.extend(std::iter::repeat_n(MotifKind::House, houses));
    kinds.extend(std::iter::repeat_n(MotifKind::Grid3x3, grids));
    kinds.extend(std::iter::repeat_n(MotifKind::Cycle5, cycles));
    kinds.shuffle(&mut rng);
    for k in kinds {
        a.attach(k, &mut rng);
    }
    let n = a.num_nodes();
    a.finish(vec![vec![1.0]; n], label)
}

/// BA base plus motifs; the class balance is exact.
pub fn gen_ba_with_motifs(spec: &DatasetSpec) -> Result<Vec<Graph>> {
    spec.validate()?;
    if spec.variant == Variant::SPMotif {
        return Err(Error::Config("SPMotif is not a BA variant".into()));
    }
    (0..spec.num_graphs).into_par_iter().map(|i| gen_ba_graph(spec, i)).collect()
}

const SP_MOTIFS: [MotifKind; 3] = [MotifKind::Cycle, MotifKind::House, MotifKind::Crane];

/// Base type in `0..3` (tree, ladder, wheel) for a graph with motif `motif`.
/// The base equals the motif with probability `b`, otherwise one of the
/// other two with probability `(1 - b) / 2` each.
pub fn spurious_base(motif: usize, b: f64, rng: &mut Rng) -> usize {
    if rng.random::<f64>() < b {
        motif
    } else {
        (motif + 1 + rng.random_range(0..2)) % 3
    }
}

fn gen_sp_graph(spec: &DatasetSpec, i: usize, biased: bool) -> Result<(Graph, usize)> {
    let mut rng = rng_for(spec.seed, stream::DATASET, i as u64);
    let motif = rng.random_range(0..3);
    let base = if biased { spurious_base(motif, spec.b, &mut rng) } else { rng.random_range(0..3) };
    let (n, edges) = match base {
        0 => binary_tree(3),
        1 => ladder(rng.random_range(8..=12)),
        _ => wheel(rng.random_range(15..=20)),
    };
    let mut a = Assembly::new(n, edges);
    a.attach(SP_MOTIFS[motif], &mut rng);
    let total = a.num_nodes();
    let features = (0..total).map(|_| vec![rng.random::<f64>()]).collect();
    Ok((a.finish(features, motif)?, base))
}

/// Spurious-motif graphs with construction-time splits: train and
/// validation are biased by `b`, the test split pairs bases and motifs
/// uniformly. Returns the splits and the base type of every graph.
pub fn gen_spmotif(spec: &DatasetSpec) -> Result<(Splits, [Vec<usize>; 3])> {
    spec.validate()?;
    let sizes = split_sizes(spec.num_graphs, SPLIT_RATIOS)?;
    let generated: Vec<(Graph, usize)> = (0..spec.num_graphs)
        .into_par_iter()
        .map(|i| gen_sp_graph(spec, i, i < sizes[0] + sizes[1]))
        .collect::<Result<_>>()?;
    let (graphs, bases): (Vec<Graph>, Vec<usize>) = generated.into_iter().unzip();
    let mut graphs = graphs.into_iter();
    let train: Vec<Graph> = graphs.by_ref().take(sizes[0]).collect();
    let val: Vec<Graph> = graphs.by_ref().take(sizes[1]).collect();
    let test: Vec<Graph> = graphs.collect();
    let bases = [
        bases[..sizes[0]].to_vec(),
        bases[sizes[0]..sizes[0] + sizes[1]].to_vec(),
        bases[sizes[0] + sizes[1]..].to_vec(),
    ];
    Ok((Splits { train, val, test }, bases))
}

fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let train = (n as f64 * ratios[0]).round() as usize;
    let val = ((n as f64 * ratios[1]).round() as usize).min(n - train);
    Ok([train, val, n - train - val])
}

/// Seeded shuffle followed by a contiguous split.
pub fn split(mut graphs: Vec<Graph>, ratios: [f64; 3], seed: u64) -> Result<Splits> {
    let sizes = split_sizes(graphs.len(), ratios)?;
    graphs.shuffle(&mut rng_for(seed, stream::SPLIT, 0));
    let test = graphs.split_off(sizes[0] + sizes[1]);
    let val = graphs.split_off(sizes[0]);
    Ok(Splits { train: graphs, val, test })
}

pub fn generate(spec: &DatasetSpec) -> Result<Splits> {
    match spec.variant {
        Variant::SPMotif => Ok(gen_spmotif(spec)?.0),
        _ => split(gen_ba_with_motifs(spec)?, SPLIT_RATIOS, spec.seed),
    }
}

pub const SPLIT_FILES: [&str; 3] = ["train.jsonl", "val.jsonl", "test.jsonl"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub counts: [usize; 3],
    /// SHA-256 over the three split files, in order.
    pub checksum: String,
    pub version: String,
}

fn checksum(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in SPLIT_FILES {
        hasher.update(std::fs::read(dir.join(name))?);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Writes the three splits as JSON lines plus `manifest.json`.
pub fn write_splits(dir: &Path, splits: &Splits, spec: &DatasetSpec) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir)?;
    for (name, graphs) in SPLIT_FILES.iter().zip([&splits.train, &splits.val, &splits.test]) {
        write_jsonl(BufWriter::new(File::create(dir.join(name))?), graphs)?;
    }
    let manifest = DatasetManifest {
        spec: spec.clone(),
        seed: spec.seed,
        counts: [splits.train.len(), splits.val.len(), splits.test.len()],
        checksum: checksum(dir)?,
        version: crate::VERSION.to_string(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_splits(dir: &Path) -> Result<Splits> {
    let read = |name: &str| -> Result<Vec<Graph>> { read_jsonl(BufReader::new(File::open(dir.join(name))?)) };
    Ok(Splits { train: read(SPLIT_FILES[0])?, val: read(SPLIT_FILES[1])?, test: read(SPLIT_FILES[2])? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt_count(g: &Graph) -> usize {
        g.gt_edge_mask.as_ref().unwrap().iter().filter(|&&m| m).count()
    }

    #[test]
    fn ba2motifs_masks_and_labels() {
        let graphs = gen_ba_with_motifs(&DatasetSpec::new(Variant::BA2Motifs, 40, 1)).unwrap();
        for g in &graphs {
            assert!(g.is_connected());
            assert_eq!(gt_count(g), if g.label == 0 { 6 } else { 5 });
            assert_eq!(g.num_nodes, 25);
            // Mask covers exactly the edges among motif nodes.
            for (e, &(u, v)) in g.edges.iter().enumerate() {
                assert_eq!(g.gt_edge_mask.as_ref().unwrap()[e], u >= 20 && v >= 20);
            }
        }
        assert_eq!(graphs.iter().filter(|g| g.label == 1).count(), 20);
    }

    #[test]
    fn and_or_semantics() {
        for g in gen_ba_with_motifs(&DatasetSpec::new(Variant::BAHouseAndGrid, 40, 2)).unwrap() {
            assert_eq!(gt_count(&g), if g.label == 1 { 18 } else if g.num_nodes == 25 { 6 } else { 12 });
        }
        for g in gen_ba_with_motifs(&DatasetSpec::new(Variant::BAHouseOrGrid, 60, 2)).unwrap() {
            if g.label == 0 {
                assert_eq!(gt_count(&g), 0);
            } else {
                assert!([6, 12, 18].contains(&gt_count(&g)));
            }
        }
    }

    #[test]
    fn nrnd_with_n1_matches_or() {
        let or = gen_ba_with_motifs(&DatasetSpec::new(Variant::BAHouseOrGrid, 30, 5)).unwrap();
        let nrnd = gen_ba_with_motifs(&DatasetSpec { n: 1, ..DatasetSpec::new(Variant::BAHouseOrGridNRnd, 30, 5) })
            .unwrap();
        assert_eq!(or, nrnd);
    }

    #[test]
    fn nrnd_manifestations_are_balanced() {
        let spec = DatasetSpec { n: 4, ..DatasetSpec::new(Variant::BAHouseOrGridNRnd, 6000, 7) };
        let graphs = gen_ba_with_motifs(&spec).unwrap();
        let mut counts = std::collections::HashMap::new();
        for g in graphs.iter().filter(|g| g.label == 1) {
            let motif_nodes = g.num_nodes - 20;
            let houses_and_grids = (g.num_edges() - 19 - gt_count(g), motif_nodes);
            *counts.entry(houses_and_grids).or_insert(0usize) += 1;
        }
        // 3n distinct manifestations; each holds 1/(6n) of the whole dataset.
        assert_eq!(counts.len(), 12);
        let expected = 6000.0 / 24.0;
        let sigma = (6000.0 * (1.0 / 24.0) * (23.0 / 24.0f64)).sqrt();
        for (&k, &c) in &counts {
            assert!((c as f64 - expected).abs() <= 3.0 * sigma, "{k:?}: {c}");
        }
        assert_eq!(graphs.iter().filter(|g| g.label == 1).count(), 3000);
    }

    #[test]
    fn spmotif_bias() {
        let spec = DatasetSpec { b: 0.9, ..DatasetSpec::new(Variant::SPMotif, 3000, 3) };
        let (splits, bases) = gen_spmotif(&spec).unwrap();
        let agree = splits.train.iter().zip(&bases[0]).filter(|(g, &b)| g.label == b).count() as f64;
        let n = splits.train.len() as f64;
        let sigma = (0.9 * 0.1 / n).sqrt();
        assert!((agree / n - 0.9).abs() <= 3.0 * sigma);
        let test_agree = splits.test.iter().zip(&bases[2]).filter(|(g, &b)| g.label == b).count() as f64;
        assert!((test_agree / splits.test.len() as f64 - 1.0 / 3.0).abs() < 0.1);
        for g in splits.train.iter().chain(&splits.test) {
            assert!(g.is_connected());
        }
    }

    #[test]
    fn spurious_base_probabilities() {
        let mut rng = crate::rng::rng_from_seed(4);
        for (b, motif) in [(1.0 / 3.0, 0usize), (0.5, 2)] {
            let mut counts = [0usize; 3];
            for _ in 0..30_000 {
                counts[spurious_base(motif, b, &mut rng)] += 1;
            }
            for (base, &c) in counts.iter().enumerate() {
                let p = if base == motif { b } else { (1.0 - b) / 2.0 };
                assert!((c as f64 / 30_000.0 - p).abs() < 0.015, "b={b} base={base}");
            }
        }
    }

    #[test]
    fn spmotif_rejects_bad_b() {
        let spec = DatasetSpec { b: 0.2, ..DatasetSpec::new(Variant::SPMotif, 10, 3) };
        assert!(matches!(gen_spmotif(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let graphs = gen_ba_with_motifs(&DatasetSpec::new(Variant::BA2Motifs, 1000, 1)).unwrap();
        let a = split(graphs.clone(), SPLIT_RATIOS, 9).unwrap();
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (800, 100, 100));
        assert_eq!(a, split(graphs.clone(), SPLIT_RATIOS, 9).unwrap());
        let share = a.train.iter().filter(|g| g.label == 1).count() as f64 / 800.0;
        assert!((share - 0.5).abs() <= 0.05);
        assert!(matches!(split(graphs, [0.5, 0.5, 0.5], 1), Err(Error::Config(_))));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec::new(Variant::BAHouseGrid, 20, 4);
        let splits = generate(&spec).unwrap();
        let manifest = write_splits(dir.path(), &splits, &spec).unwrap();
        assert_eq!(manifest.counts, [16, 2, 2]);
        assert_eq!(read_splits(dir.path()).unwrap(), splits);
        let back: DatasetManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back, manifest);
    }
}
