//! Line-oriented network file format.
//!
//! ```text
//! network <name>
//! node <name> states <s1>,<s2>[,...]
//! parents <name> <p1>[,<p2>...]
//! cpt <name> [| <p1>=<v1>,<p2>=<v2>...] : <q1>,<q2>[,...]
//! ```
//!
//! `#` starts a comment. Every parent configuration needs exactly one `cpt`
//! line; rows off-sum by more than 1e-6 are rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Network, NodeSpec};

pub const PARSE_ROW_TOL: f64 = 1e-6;

struct CptLine {
    line: usize,
    node: String,
    conds: Vec<(String, String)>,
    probs: Vec<f64>,
}

pub fn read_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_network(&text, &path.display().to_string())
}

pub fn write_network_file(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_network(net))?;
    Ok(())
}

pub fn parse_network(text: &str, source: &str) -> Result<Network> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut name: Option<String> = None;
    let mut specs: Vec<NodeSpec> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut parent_lines: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut cpt_lines: Vec<CptLine> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (kw, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match kw {
            "network" => {
                if rest.is_empty() {
                    return Err(err(ln, "missing network name".into()));
                }
                if name.replace(rest.to_string()).is_some() {
                    return Err(err(ln, "duplicate `network` line".into()));
                }
            }
            "node" => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.len() != 3 || toks[1] != "states" {
                    return Err(err(ln, "expected `node <name> states <s1>,<s2>,...`".into()));
                }
                let states: Vec<String> = toks[2].split(',').map(|s| s.trim().to_string()).collect();
                if states.iter().any(String::is_empty) {
                    return Err(err(ln, "empty state label".into()));
                }
                if lookup.insert(toks[0].to_string(), specs.len()).is_some() {
                    return Err(err(ln, format!("duplicate node `{}`", toks[0])));
                }
                specs.push(NodeSpec {
                    name: toks[0].to_string(),
                    states,
                    parents: Vec::new(),
                });
            }
            "parents" => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.len() != 2 {
                    return Err(err(ln, "expected `parents <name> <p1>,<p2>,...`".into()));
                }
                let ps = toks[1].split(',').map(|s| s.trim().to_string()).collect();
                parent_lines.push((ln, toks[0].to_string(), ps));
            }
            "cpt" => {
                let (head, probs) = rest
                    .split_once(':')
                    .ok_or_else(|| err(ln, "expected `:` before probabilities".into()))?;
                let (node, conds) = match head.split_once('|') {
                    Some((n, c)) => {
                        let conds = c
                            .split(',')
                            .map(|kv| {
                                kv.split_once('=')
                                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                                    .ok_or_else(|| err(ln, format!("bad condition `{}`", kv.trim())))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        (n.trim().to_string(), conds)
                    }
                    None => (head.trim().to_string(), Vec::new()),
                };
                let probs = probs
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .map_err(|_| err(ln, format!("bad probability `{}`", p.trim())))
                    })
                    .collect::<Result<Vec<_>>>()?;
                cpt_lines.push(CptLine {
                    line: ln,
                    node,
                    conds,
                    probs,
                });
            }
            other => return Err(err(ln, format!("unknown keyword `{other}`"))),
        }
    }

    let name = name.ok_or_else(|| err(0, "missing `network` line".into()))?;
    for (ln, node, ps) in parent_lines {
        let i = *lookup
            .get(&node)
            .ok_or_else(|| err(ln, format!("unknown node `{node}`")))?;
        if !specs[i].parents.is_empty() {
            return Err(err(ln, format!("duplicate `parents` line for `{node}`")));
        }
        for p in &ps {
            if !lookup.contains_key(p) {
                return Err(err(ln, format!("unknown parent `{p}`")));
            }
        }
        specs[i].parents = ps;
    }

    let mut rows: Vec<Vec<Option<Vec<f64>>>> = specs
        .iter()
        .map(|s| {
            let n: usize = s.parents.iter().map(|p| specs[lookup[p]].states.len()).product();
            vec![None; n]
        })
        .collect();
    for c in cpt_lines {
        let i = *lookup
            .get(&c.node)
            .ok_or_else(|| err(c.line, format!("unknown node `{}`", c.node)))?;
        let spec = &specs[i];
        if c.probs.len() != spec.states.len() {
            return Err(err(
                c.line,
                format!("expected {} probabilities, got {}", spec.states.len(), c.probs.len()),
            ));
        }
        if c.conds.len() != spec.parents.len() {
            return Err(err(
                c.line,
                format!("expected {} parent values, got {}", spec.parents.len(), c.conds.len()),
            ));
        }
        let mut config = 0;
        for p in &spec.parents {
            let (_, v) = c
                .conds
                .iter()
                .find(|(k, _)| k == p)
                .ok_or_else(|| err(c.line, format!("missing value for parent `{p}`")))?;
            let pspec = &specs[lookup[p]];
            let s = pspec
                .states
                .iter()
                .position(|x| x == v)
                .ok_or_else(|| err(c.line, format!("`{v}` is not a state of `{p}`")))?;
            config = config * pspec.states.len() + s;
        }
        if c.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(err(c.line, "probability outside [0,1]".into()));
        }
        let sum: f64 = c.probs.iter().sum();
        if (sum - 1.0).abs() > PARSE_ROW_TOL {
            return Err(err(c.line, format!("row sums to {sum}, not 1")));
        }
        if rows[i][config].is_some() {
            return Err(err(c.line, "duplicate row for this parent configuration".into()));
        }
        rows[i][config] = Some(c.probs.iter().map(|p| p / sum).collect());
    }

    let mut cpts = Vec::with_capacity(specs.len());
    for (i, r) in rows.into_iter().enumerate() {
        let missing = r.iter().filter(|x| x.is_none()).count();
        if missing > 0 {
            return Err(err(
                0,
                format!("node `{}` is missing {missing} cpt row(s)", specs[i].name),
            ));
        }
        cpts.push(r.into_iter().flatten().flatten().collect());
    }
    Network::new(&name, specs, cpts)
}

pub fn write_network(net: &Network) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "network {}", net.name());
    for n in net.nodes() {
        let _ = writeln!(out, "node {} states {}", n.name, n.states.join(","));
    }
    for n in net.nodes() {
        if !n.parents.is_empty() {
            let ps: Vec<&str> = n.parents.iter().map(|&p| net.node(p).name.as_str()).collect();
            let _ = writeln!(out, "parents {} {}", n.name, ps.join(","));
        }
    }
    for (i, n) in net.nodes().iter().enumerate() {
        for r in 0..net.num_rows(i) {
            let probs: Vec<String> = net.row(i, r).iter().map(|p| format!("{p}")).collect();
            if n.parents.is_empty() {
                let _ = writeln!(out, "cpt {} : {}", n.name, probs.join(","));
            } else {
                let conds: Vec<String> = n
                    .parents
                    .iter()
                    .zip(net.decode_config(i, r))
                    .map(|(&p, s)| format!("{}={}", net.node(p).name, net.node(p).states[s]))
                    .collect();
                let _ = writeln!(out, "cpt {} | {} : {}", n.name, conds.join(","), probs.join(","));
            }
        }
    }
    out
}
