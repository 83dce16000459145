//! Maximum-likelihood CPT estimation from weighted complete data, and the
//! pseudo-count smoothing applied to every final estimate.

use std::io::Read;

use crate::error::{Error, Result};
use crate::network::Network;

/// Weighted sufficient statistics, shaped like the network's CPTs.
///
/// Accumulation is compensated (Neumaier) so the result does not depend on
/// summation order beyond rounding of the final values.
#[derive(Clone, Debug)]
pub struct CountTable {
    sums: Vec<Vec<f64>>,
    comp: Vec<Vec<f64>>,
}

impl CountTable {
    pub fn zeros(net: &Network) -> Self {
        let sums: Vec<Vec<f64>> = net.cpts().iter().map(|c| vec![0.0; c.len()]).collect();
        let comp = sums.clone();
        CountTable { sums, comp }
    }

    fn add(&mut self, node: usize, idx: usize, w: f64) {
        let s = self.sums[node][idx];
        let t = s + w;
        if s.abs() >= w.abs() {
            self.comp[node][idx] += (s - t) + w;
        } else {
            self.comp[node][idx] += (w - t) + s;
        }
        self.sums[node][idx] = t;
    }

    /// Adds one complete case with weight `w`.
    pub fn add_assignment(&mut self, net: &Network, x: &[usize], w: f64) {
        for i in 0..net.len() {
            let idx = net.parent_config(i, x) * net.node(i).card() + x[i];
            self.add(i, idx, w);
        }
    }

    /// Adds a fractional family table (e.g. a posterior family marginal)
    /// scaled by `w`.
    pub fn add_family(&mut self, node: usize, table: &[f64], w: f64) {
        for (idx, &p) in table.iter().enumerate() {
            if p != 0.0 {
                self.add(node, idx, w * p);
            }
        }
    }

    pub fn value(&self, node: usize, idx: usize) -> f64 {
        self.sums[node][idx] + self.comp[node][idx]
    }

    pub fn node_counts(&self, node: usize) -> Vec<f64> {
        (0..self.sums[node].len()).map(|i| self.value(node, i)).collect()
    }
}

/// Number of (possibly fractional) cases behind each CPT row: `k` in the
/// smoothing formula.
#[derive(Clone, Debug, PartialEq)]
pub struct RowCounts(pub Vec<Vec<f64>>);

impl RowCounts {
    pub fn zeros(net: &Network) -> Self {
        RowCounts((0..net.len()).map(|i| vec![0.0; net.num_rows(i)]).collect())
    }

    pub fn get(&self, node: usize, row: usize) -> f64 {
        self.0[node][row]
    }

    /// CSV with columns `node,row,count`, one line per CPT row.
    pub fn to_csv_string(&self, net: &Network) -> String {
        let mut out = String::from("node,row,count\n");
        for (i, rows) in self.0.iter().enumerate() {
            for (r, k) in rows.iter().enumerate() {
                out.push_str(&format!("{},{r},{k:.16e}\n", net.node(i).name));
            }
        }
        out
    }

    /// Reads the format written by [`RowCounts::to_csv_string`]; every row
    /// of `net` must be present exactly once.
    pub fn from_csv_reader<R: Read>(reader: R, net: &Network) -> Result<Self> {
        let mut counts = RowCounts::zeros(net);
        let mut seen: Vec<Vec<bool>> = counts.0.iter().map(|r| vec![false; r.len()]).collect();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != ["node", "row", "count"] {
            return Err(Error::Format(format!(
                "row counts need the header node,row,count, found {}",
                header.join(",")
            )));
        }
        for rec in rdr.records() {
            let rec = rec?;
            let bad = |what: &str| Error::Format(format!("row counts: bad {what} in `{}`", rec.iter().collect::<Vec<_>>().join(",")));
            let i = net
                .node_index(&rec[0])
                .ok_or_else(|| Error::UnknownVariable(rec[0].to_string()))?;
            let r: usize = rec[1].parse().map_err(|_| bad("row index"))?;
            let k: f64 = rec[2].parse().map_err(|_| bad("count"))?;
            if r >= counts.0[i].len() {
                return Err(bad("row index"));
            }
            if !(k.is_finite() && k >= 0.0) {
                return Err(bad("count"));
            }
            if seen[i][r] {
                return Err(bad("duplicate row"));
            }
            seen[i][r] = true;
            counts.0[i][r] = k;
        }
        if let Some(i) = seen.iter().position(|s| s.iter().any(|&b| !b)) {
            return Err(Error::Format(format!(
                "row counts: missing rows for `{}`",
                net.node(i).name
            )));
        }
        Ok(counts)
    }
}

/// ML parameters from accumulated counts. Rows whose parent configuration
/// never occurs are set uniform.
pub fn ml_from_counts(structure: &Network, counts: &CountTable) -> (Network, RowCounts) {
    let mut cpts = Vec::with_capacity(structure.len());
    let mut rows = Vec::with_capacity(structure.len());
    for i in 0..structure.len() {
        let card = structure.node(i).card();
        let c = counts.node_counts(i);
        let mut cpt = Vec::with_capacity(c.len());
        let mut k_node = Vec::with_capacity(c.len() / card);
        for row in c.chunks(card) {
            let k: f64 = row.iter().sum();
            if k > 0.0 {
                cpt.extend(row.iter().map(|v| v / k));
            } else {
                cpt.extend(std::iter::repeat_n(1.0 / card as f64, card));
            }
            k_node.push(k.max(0.0));
        }
        cpts.push(cpt);
        rows.push(k_node);
    }
    (structure.with_cpts_unchecked(cpts), RowCounts(rows))
}

/// ML estimate for `structure` from weighted complete assignments.
pub fn ml_estimate<'a, I>(structure: &Network, data: I) -> (Network, RowCounts)
where
    I: IntoIterator<Item = (&'a [usize], f64)>,
{
    let mut counts = CountTable::zeros(structure);
    for (x, w) in data {
        counts.add_assignment(structure, x, w);
    }
    ml_from_counts(structure, &counts)
}

/// Replaces each entry θ of a row estimated from `k` cases with
/// (θ·k + 1)/(k + m), m being the row length.
pub fn smooth(net: &Network, counts: &RowCounts) -> Network {
    let cpts = (0..net.len())
        .map(|i| {
            let card = net.node(i).card();
            let m = card as f64;
            net.cpt(i)
                .chunks(card)
                .enumerate()
                .flat_map(|(r, row)| {
                    let k = counts.get(i, r);
                    row.iter().map(move |&p| (p * k + 1.0) / (k + m))
                })
                .collect()
        })
        .collect();
    net.with_cpts_unchecked(cpts)
}

/// Σ w · ln P(x) over weighted complete data.
pub fn weighted_loglik<'a, I>(net: &Network, data: I) -> f64
where
    I: IntoIterator<Item = (&'a [usize], f64)>,
{
    data.into_iter()
        .map(|(x, w)| w * net.log_joint_unchecked(x))
        .sum()
}
