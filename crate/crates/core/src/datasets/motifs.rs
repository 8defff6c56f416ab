use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MotifKind {
    House,
    Grid3x3,
    Cycle5,
    /// The 6-cycle used by the spurious-motif benchmark.
    Cycle,
    Crane,
}

impl MotifKind {
    pub const ALL: [MotifKind; 5] = [Self::House, Self::Grid3x3, Self::Cycle5, Self::Cycle, Self::Crane];

    pub fn name(self) -> &'static str {
        match self {
            Self::House => "house",
            Self::Grid3x3 => "grid3x3",
            Self::Cycle5 => "cycle5",
            Self::Cycle => "cycle",
            Self::Crane => "crane",
        }
    }
}

impl fmt::Display for MotifKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotifKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown motif {s:?}")))
    }
}

/// A small graph to be glued onto a base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Motif {
    pub kind: MotifKind,
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

fn cycle(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

pub fn gen_motif(kind: MotifKind) -> Motif {
    let (num_nodes, edges) = match kind {
        // Square 0-1-2-3 with roof node 4 over the edge 0-1.
        MotifKind::House => (5, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 4), (1, 4)]),
        MotifKind::Grid3x3 => {
            let mut edges = Vec::with_capacity(12);
            for r in 0..3 {
                for c in 0..3 {
                    let v = 3 * r + c;
                    if c < 2 {
                        edges.push((v, v + 1));
                    }
                    if r < 2 {
                        edges.push((v, v + 3));
                    }
                }
            }
            (9, edges)
        }
        MotifKind::Cycle5 => (5, cycle(5)),
        MotifKind::Cycle => (6, cycle(6)),
        // Body: square 0-1-2-3 braced by 0-2. Neck 1-4, head triangle 4-5-6.
        MotifKind::Crane => (7, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 4), (4, 5), (5, 6), (6, 4)]),
    };
    Motif { kind, num_nodes, edges }
}
