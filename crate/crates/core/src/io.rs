//! Plain-text instance format.
//!
//! ```text
//! p <n> <m> <q>
//! e <i> <j>          one per edge, zero-based
//! c <i> <value>      optional coloring, one per node
//! w <i> <value>      optional node whitening, one per node
//! d <i> <j> <value>  optional directional whitening, value of w(i|j)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use crate::coloring::Coloring;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::whitening::{DirectionalAssignment, Whitening};

#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub q: usize,
    pub coloring: Option<Coloring>,
    pub whitening: Option<Whitening>,
    pub directional: Option<DirectionalAssignment>,
}

impl Instance {
    pub fn new(graph: Graph, q: usize) -> Self {
        Instance {
            graph,
            q,
            coloring: None,
            whitening: None,
            directional: None,
        }
    }

    pub fn to_text(&self) -> String {
        let g = &self.graph;
        let mut out = String::with_capacity(16 * (g.m() + g.n()));
        writeln!(out, "p {} {} {}", g.n(), g.m(), self.q).unwrap();
        for &(u, v) in g.edges() {
            writeln!(out, "e {u} {v}").unwrap();
        }
        if let Some(c) = &self.coloring {
            for (i, v) in c.values().iter().enumerate() {
                writeln!(out, "c {i} {v}").unwrap();
            }
        }
        if let Some(w) = &self.whitening {
            for (i, v) in w.values().iter().enumerate() {
                writeln!(out, "w {i} {v}").unwrap();
            }
        }
        if let Some(d) = &self.directional {
            for e in 0..d.len() {
                writeln!(out, "d {} {} {}", g.source(e), g.target(e), d.get(e)).unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut edges = Vec::new();
        let mut colors: Vec<(usize, usize, u8)> = Vec::new();
        let mut whites: Vec<(usize, usize, u8)> = Vec::new();
        let mut directed: Vec<(usize, usize, usize, u8)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let tag = parts.next().unwrap();
            let nums: Vec<usize> = parts
                .map(|s| {
                    s.parse::<usize>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("not a non-negative integer: {s:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            let expect = |count: usize| -> Result<()> {
                if nums.len() == count {
                    Ok(())
                } else {
                    Err(Error::Parse {
                        line,
                        msg: format!("'{tag}' line needs {count} fields, got {}", nums.len()),
                    })
                }
            };
            let value = |x: usize| -> Result<u8> {
                u8::try_from(x).map_err(|_| Error::Parse {
                    line,
                    msg: format!("value {x} out of range"),
                })
            };
            match tag {
                "p" => {
                    expect(3)?;
                    if header.is_some() {
                        return Err(Error::Parse { line, msg: "duplicate 'p' line".into() });
                    }
                    header = Some((nums[0], nums[1], nums[2]));
                }
                _ if header.is_none() => {
                    return Err(Error::Parse { line, msg: "first record must be 'p n m q'".into() });
                }
                "e" => {
                    expect(2)?;
                    edges.push((nums[0], nums[1]));
                }
                "c" => {
                    expect(2)?;
                    colors.push((line, nums[0], value(nums[1])?));
                }
                "w" => {
                    expect(2)?;
                    whites.push((line, nums[0], value(nums[1])?));
                }
                "d" => {
                    expect(3)?;
                    directed.push((line, nums[0], nums[1], value(nums[2])?));
                }
                other => {
                    return Err(Error::Parse { line, msg: format!("unknown record '{other}'") });
                }
            }
        }
        let (n, m, q) = header.ok_or(Error::Parse { line: 0, msg: "missing 'p' line".into() })?;
        if edges.len() != m {
            return Err(Error::Parse {
                line: 0,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        let graph = Graph::from_edges(n, &edges)?;
        let per_node = |entries: &[(usize, usize, u8)], what: &str| -> Result<Option<Vec<u8>>> {
            if entries.is_empty() {
                return Ok(None);
            }
            let mut values: Vec<Option<u8>> = vec![None; n];
            for &(line, i, v) in entries {
                let slot = values.get_mut(i).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("{what} node {i} out of range"),
                })?;
                if slot.replace(v).is_some() {
                    return Err(Error::Parse { line, msg: format!("{what} node {i} repeated") });
                }
            }
            values
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| Error::Parse { line: 0, msg: format!("{what} missing for node {i}") })
                })
                .collect::<Result<Vec<u8>>>()
                .map(Some)
        };
        let coloring = per_node(&colors, "color")?
            .map(|v| Coloring::new(q, v))
            .transpose()?;
        let whitening = per_node(&whites, "whitening")?
            .map(|v| Whitening::new(q, v))
            .transpose()?;
        let directional = if directed.is_empty() {
            None
        } else {
            let mut values: Vec<Option<u8>> = vec![None; graph.num_directed()];
            for &(line, i, j, v) in &directed {
                let e = graph.directed_index(i, j).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("no edge {{{i}, {j}}}"),
                })?;
                if values[e].replace(v).is_some() {
                    return Err(Error::Parse { line, msg: format!("directed entry ({i}, {j}) repeated") });
                }
            }
            let values = values
                .into_iter()
                .enumerate()
                .map(|(e, v)| {
                    v.ok_or_else(|| Error::Parse {
                        line: 0,
                        msg: format!("missing directed entry ({}, {})", graph.source(e), graph.target(e)),
                    })
                })
                .collect::<Result<Vec<u8>>>()?;
            Some(DirectionalAssignment::new(q, values)?)
        };
        Ok(Instance {
            graph,
            q,
            coloring,
            whitening,
            directional,
        })
    }
}
