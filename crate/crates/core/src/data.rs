//! Incomplete observations and weighted datasets.
//!
//! A [`CoarseCase`] is a missing-value pattern: each variable is either a
//! known state or missing, so the set of compatible full assignments is a
//! product set. Datasets carry a nonnegative weight per case; integer
//! weights are ordinary samples, fractional ones encode exact pattern
//! distributions.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::Deref;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::Network;

pub const MISSING: &str = "?";
pub const WEIGHT_COLUMN: &str = "__weight";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoarseCase(pub Vec<Option<usize>>);

impl Deref for CoarseCase {
    type Target = [Option<usize>];

    fn deref(&self) -> &[Option<usize>] {
        &self.0
    }
}

impl CoarseCase {
    pub fn complete(x: &[usize]) -> Self {
        CoarseCase(x.iter().map(|&s| Some(s)).collect())
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    pub fn missing_positions(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i].is_none()).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.0.iter().filter(|v| v.is_none()).count()
    }

    /// Whether the full assignment `x` is compatible with this case.
    pub fn contains(&self, x: &[usize]) -> bool {
        self.0.len() == x.len() && self.0.iter().zip(x).all(|(v, &s)| v.is_none_or(|v| v == s))
    }

    /// Renders the case with state labels, `?` for missing values.
    pub fn display(&self, net: &Network) -> String {
        self.0
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Some(s) => format!("{}={}", net.node(i).name, net.node(i).states[*s]),
                None => format!("{}={MISSING}", net.node(i).name),
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    variables: Vec<String>,
    states: Vec<Vec<String>>,
    cases: Vec<(CoarseCase, f64)>,
}

impl Dataset {
    /// Binds `cases` (in the network's node order) to `net`'s variables.
    pub fn new(net: &Network, cases: Vec<(CoarseCase, f64)>) -> Result<Self> {
        for (case, w) in &cases {
            if case.len() != net.len() {
                return Err(Error::DimensionMismatch {
                    expected: net.len(),
                    got: case.len(),
                });
            }
            for (i, v) in case.iter().enumerate() {
                if let Some(s) = *v {
                    if s >= net.node(i).card() {
                        return Err(Error::UnknownState {
                            variable: net.node(i).name.clone(),
                            state: s.to_string(),
                        });
                    }
                }
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::Format(format!("invalid case weight {w}")));
            }
        }
        let total: f64 = cases.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::Format("dataset has zero total weight".into()));
        }
        Ok(Dataset {
            variables: net.nodes().iter().map(|n| n.name.clone()).collect(),
            states: net.nodes().iter().map(|n| n.states.clone()).collect(),
            cases,
        })
    }

    /// Unit-weight dataset of complete cases.
    pub fn from_complete(net: &Network, xs: &[Vec<usize>]) -> Result<Self> {
        Self::new(net, xs.iter().map(|x| (CoarseCase::complete(x), 1.0)).collect())
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// State labels per variable.
    pub fn states(&self) -> &[Vec<String>] {
        &self.states
    }

    pub fn cases(&self) -> &[(CoarseCase, f64)] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// N: the total case weight.
    pub fn total_weight(&self) -> f64 {
        self.cases.iter().map(|(_, w)| w).sum()
    }

    /// Whether this dataset's variables and state labels match `net`.
    pub fn binds_to(&self, net: &Network) -> bool {
        self.variables.len() == net.len()
            && net
                .nodes()
                .iter()
                .zip(self.variables.iter().zip(&self.states))
                .all(|(n, (v, s))| &n.name == v && &n.states == s)
    }

    pub fn check_binds(&self, net: &Network) -> Result<()> {
        if self.binds_to(net) {
            Ok(())
        } else {
            Err(Error::StructureMismatch(format!(
                "dataset variables [{}] do not match network `{}`",
                self.variables.join(","),
                net.name()
            )))
        }
    }

    pub fn is_complete(&self) -> bool {
        self.cases.iter().all(|(c, _)| c.is_complete())
    }

    /// Weighted fraction of cells that are missing.
    pub fn missing_fraction(&self) -> f64 {
        let k = self.variables.len() as f64;
        let missing: f64 = self
            .cases
            .iter()
            .map(|(c, w)| w * c.missing_count() as f64)
            .sum();
        missing / (k * self.total_weight())
    }

    /// Distinct cases with their summed weights.
    pub fn grouped(&self) -> BTreeMap<CoarseCase, f64> {
        let mut out = BTreeMap::new();
        for (c, w) in &self.cases {
            *out.entry(c.clone()).or_insert(0.0) += w;
        }
        out
    }

    /// Integer case weights, or the first offending case.
    pub fn integer_weights(&self) -> Result<Vec<u64>> {
        self.cases
            .iter()
            .enumerate()
            .map(|(i, (_, w))| {
                if *w >= 1.0 && w.fract() == 0.0 && *w < u32::MAX as f64 {
                    Ok(*w as u64)
                } else {
                    Err(Error::FractionalWeights { case: i, weight: *w })
                }
            })
            .collect()
    }

    pub fn read_csv(path: impl AsRef<Path>, net: &Network) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, net).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_csv_str(text: &str, net: &Network) -> Result<Self> {
        Self::from_csv_reader(text.as_bytes(), net)
    }

    pub fn from_csv_reader<R: Read>(reader: R, net: &Network) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let mut column_node = Vec::with_capacity(header.len());
        let mut weight_col = None;
        let mut seen = vec![false; net.len()];
        for (c, h) in header.iter().enumerate() {
            if h == WEIGHT_COLUMN {
                weight_col = Some(c);
                column_node.push(None);
                continue;
            }
            let i = net
                .node_index(h)
                .ok_or_else(|| Error::UnknownVariable(h.to_string()))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Format(format!("duplicate column `{h}`")));
            }
            column_node.push(Some(i));
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!(
                "missing column for variable `{}`",
                net.node(i).name
            )));
        }
        let mut cases = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut case = vec![None; net.len()];
            let mut w = 1.0;
            for (c, field) in rec.iter().enumerate() {
                if Some(c) == weight_col {
                    w = field.parse::<f64>().map_err(|_| {
                        Error::Format(format!("row {}: bad weight `{field}`", r + 2))
                    })?;
                    continue;
                }
                let i = column_node[c].expect("non-weight column");
                if field != MISSING {
                    let node = net.node(i);
                    let s = node.state_index(field).ok_or_else(|| Error::UnknownState {
                        variable: node.name.clone(),
                        state: field.to_string(),
                    })?;
                    case[i] = Some(s);
                }
            }
            cases.push((CoarseCase(case), w));
        }
        Self::new(net, cases)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(file)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_csv_writer(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Writes the dataset; the weight column is emitted only when some
    /// weight differs from 1. Weights are printed in shortest round-trip
    /// form, so reading the file back is lossless.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let weighted = self.cases.iter().any(|(_, w)| *w != 1.0);
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.variables.iter().map(String::as_str).collect();
        if weighted {
            header.push(WEIGHT_COLUMN);
        }
        wtr.write_record(&header)?;
        for (case, w) in &self.cases {
            let mut row: Vec<String> = case
                .iter()
                .enumerate()
                .map(|(i, v)| v.map_or(MISSING.to_string(), |s| self.states[i][s].clone()))
                .collect();
            if weighted {
                row.push(format!("{w:?}"));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
