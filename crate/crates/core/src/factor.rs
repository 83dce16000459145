//! Dense table factors over discrete variables (last variable fastest).

use crate::network::{Network, Odometer};

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Factor {
    /// Variable ids, strictly increasing.
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn scalar(v: f64) -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![v],
        }
    }

    /// The CPT of `node` as a factor, restricted to the observed values in
    /// `evidence` (observed variables are dropped from the scope).
    pub fn from_cpt(net: &Network, node: usize, evidence: &[Option<usize>]) -> Self {
        let mut family: Vec<usize> = net.node(node).parents.clone();
        family.push(node);
        let mut vars: Vec<usize> = family
            .iter()
            .copied()
            .filter(|&v| evidence[v].is_none())
            .collect();
        vars.sort_unstable();
        let cards: Vec<usize> = vars.iter().map(|&v| net.node(v).card()).collect();
        let mut x: Vec<usize> = evidence.iter().map(|e| e.unwrap_or(0)).collect();
        let mut values = Vec::with_capacity(cards.iter().product());
        for local in Odometer::new(cards.clone()) {
            for (k, &v) in vars.iter().enumerate() {
                x[v] = local[k];
            }
            values.push(net.row(node, net.parent_config(node, &x))[x[node]]);
        }
        Factor { vars, cards, values }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.vars.len()];
        for k in (0..self.vars.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.cards[k + 1];
        }
        s
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (k, &v) in other.vars.iter().enumerate() {
            match vars.binary_search(&v) {
                Ok(_) => {}
                Err(pos) => {
                    vars.insert(pos, v);
                    cards.insert(pos, other.cards[k]);
                }
            }
        }
        let map = |f: &Factor| -> Vec<usize> {
            let st = f.strides();
            vars.iter()
                .map(|v| f.vars.binary_search(v).map_or(0, |k| st[k]))
                .collect()
        };
        let sa = map(self);
        let sb = map(other);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut idx = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            // advance the mixed-radix counter, keeping both offsets in step
            let mut k = vars.len();
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if idx[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                idx[k] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let st = self.strides();
        let card = self.cards[pos];
        let inner = st[pos];
        let outer = self.values.len() / (inner * card);
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor { vars, cards, values }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Value at the assignment `x` (indexed by global variable id).
    pub fn at(&self, x: &[usize]) -> f64 {
        let idx = self
            .vars
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&v, &c)| acc * c + x[v]);
        self.values[idx]
    }
}
