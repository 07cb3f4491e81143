//! Line-oriented text form of an AOG.
//!
//! ```text
//! aog 1
//! grid 3 3
//! min_part 1 1
//! overlap 0
//! root 0
//! nodes 84
//! 0 or 0,0,3,3 1:switch 3:switch ...
//! 1 and:term 0,0,3,3 2:term
//! 2 t 0,0,3,3
//! ```

use std::fmt::Write as _;

use super::{AndKind, Aog, AogNode, Axis, EdgeKind, GridRegion, NodeId, NodeKind};
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

fn kind_token(kind: NodeKind) -> String {
    match kind {
        NodeKind::Or => "or".into(),
        NodeKind::Terminal => "t".into(),
        NodeKind::And(AndKind::Termination) => "and:term".into(),
        NodeKind::And(AndKind::Deformation) => "and:def".into(),
        NodeKind::And(AndKind::Decomposition {
            axis,
            position,
            overlap,
        }) => {
            let a = match axis {
                Axis::Vertical => 'v',
                Axis::Horizontal => 'h',
            };
            format!("and:dec:{a}:{position}:{overlap}")
        }
    }
}

fn parse_kind(tok: &str) -> Result<NodeKind> {
    let bad = || Error::Format(format!("unknown node kind {tok:?}"));
    Ok(match tok {
        "or" => NodeKind::Or,
        "t" => NodeKind::Terminal,
        "and:term" => NodeKind::And(AndKind::Termination),
        "and:def" => NodeKind::And(AndKind::Deformation),
        _ => {
            let rest = tok.strip_prefix("and:dec:").ok_or_else(bad)?;
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let axis = match parts[0] {
                "v" => Axis::Vertical,
                "h" => Axis::Horizontal,
                _ => return Err(bad()),
            };
            NodeKind::And(AndKind::Decomposition {
                axis,
                position: parts[1].parse().map_err(|_| bad())?,
                overlap: parts[2].parse().map_err(|_| bad())?,
            })
        }
    })
}

fn edge_token(e: EdgeKind) -> &'static str {
    match e {
        EdgeKind::Switch => "switch",
        EdgeKind::Decomposition => "dec",
        EdgeKind::Deformation => "def",
        EdgeKind::Termination => "term",
    }
}

fn parse_edge(tok: &str) -> Result<EdgeKind> {
    Ok(match tok {
        "switch" => EdgeKind::Switch,
        "dec" => EdgeKind::Decomposition,
        "def" => EdgeKind::Deformation,
        "term" => EdgeKind::Termination,
        _ => return Err(Error::Format(format!("unknown edge kind {tok:?}"))),
    })
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Format(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Format(format!("bad {what}")))
}

impl Aog {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "aog {FORMAT_VERSION}");
        let _ = writeln!(s, "grid {} {}", self.grid.0, self.grid.1);
        let _ = writeln!(s, "min_part {} {}", self.min_part.0, self.min_part.1);
        // `Display` for f64 prints the shortest string that round-trips.
        let _ = writeln!(s, "overlap {}", self.overlap_ratio);
        let _ = writeln!(s, "root {}", self.root);
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for n in &self.nodes {
            let _ = write!(s, "{} {} {}", n.id, kind_token(n.kind), n.region);
            for &(c, e) in &n.children {
                let _ = write!(s, " {}:{}", c, edge_token(e));
            }
            s.push('\n');
        }
        s
    }

    /// Parses the output of [`Aog::to_text`] and validates the result.
    pub fn from_text(text: &str) -> Result<Aog> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing {key} line")))?;
            let mut toks = line.split_whitespace();
            if toks.next() != Some(key) {
                return Err(Error::Format(format!("expected {key} line, got {line:?}")));
            }
            Ok(toks.map(str::to_owned).collect())
        };
        let version: u32 = parse_num(header("aog")?.first().map(String::as_str), "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported aog version {version}")));
        }
        let g = header("grid")?;
        let grid = (
            parse_num(g.first().map(String::as_str), "grid width")?,
            parse_num(g.get(1).map(String::as_str), "grid height")?,
        );
        let m = header("min_part")?;
        let min_part = (
            parse_num(m.first().map(String::as_str), "min part width")?,
            parse_num(m.get(1).map(String::as_str), "min part height")?,
        );
        let overlap_ratio: f64 = parse_num(header("overlap")?.first().map(String::as_str), "overlap")?;
        let root = NodeId(parse_num(header("root")?.first().map(String::as_str), "root")?);
        let count: usize = parse_num(header("nodes")?.first().map(String::as_str), "node count")?;

        let mut nodes = Vec::with_capacity(count);
        for i in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("expected {count} nodes, got {i}")))?;
            let mut toks = line.split_whitespace();
            let id = NodeId(parse_num(toks.next(), "node id")?);
            if id.index() != i {
                return Err(Error::Format(format!("node {id} out of order")));
            }
            let kind = parse_kind(toks.next().unwrap_or(""))?;
            let r: Vec<u32> = toks
                .next()
                .ok_or_else(|| Error::Format("missing region".into()))?
                .split(',')
                .map(|v| v.parse().map_err(|_| Error::Format(format!("bad region in {line:?}"))))
                .collect::<Result<_>>()?;
            if r.len() != 4 {
                return Err(Error::Format(format!("bad region in {line:?}")));
            }
            let children = toks
                .map(|t| {
                    let (c, e) = t
                        .split_once(':')
                        .ok_or_else(|| Error::Format(format!("bad child {t:?}")))?;
                    Ok((NodeId(parse_num(Some(c), "child id")?), parse_edge(e)?))
                })
                .collect::<Result<Vec<_>>>()?;
            nodes.push(AogNode {
                id,
                kind,
                region: GridRegion::new(r[0], r[1], r[2], r[3]),
                children,
            });
        }
        let aog = Aog {
            grid,
            min_part,
            overlap_ratio,
            nodes,
            root,
        };
        aog.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(aog)
    }
}
