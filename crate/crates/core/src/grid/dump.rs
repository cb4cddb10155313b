//! Plain-text grid dump.
//!
//! ```text
//! grid <depth> <x_min> <x_max> <y_min> <y_max> <pad_x> <pad_y>
//! cell <i> <j> <k>
//! node <i> <j> <x> <y> <class> <dE> <dW> <dN> <dS>
//! ```
//!
//! Cells and nodes are ordered by `(j, i)`; absent distances print as `-`.

use std::fmt::Write as _;

use super::{Cell, Direction, DomainBox, NodeClass, QuadtreeGrid};
use crate::error::{Error, Result};

pub fn write_grid_dump(grid: &QuadtreeGrid) -> String {
    let mut s = String::new();
    let d = grid.domain();
    let (px, py) = grid.pads();
    let _ = writeln!(
        s,
        "grid {} {} {} {} {} {} {}",
        grid.depth(),
        d.x_min,
        d.x_max,
        d.y_min,
        d.y_max,
        px,
        py
    );
    for c in grid.leaves() {
        let _ = writeln!(s, "cell {} {} {}", c.i, c.j, c.scale);
    }
    for n in grid.nodes() {
        let _ = write!(
            s,
            "node {} {} {} {} {}",
            n.index.i,
            n.index.j,
            n.x,
            n.y,
            n.class.label()
        );
        for dir in Direction::ALL {
            match n.neighbor(dir) {
                Some(nb) => {
                    let _ = write!(s, " {}", nb.dist);
                }
                None => s.push_str(" -"),
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct DumpNode {
    pub i: u32,
    pub j: u32,
    pub x: f64,
    pub y: f64,
    pub class: NodeClass,
    pub dists: [Option<f64>; 4],
}

/// Parsed contents of a grid dump.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDump {
    pub depth: u32,
    pub domain: DomainBox,
    pub pads: (u32, u32),
    pub cells: Vec<Cell>,
    pub nodes: Vec<DumpNode>,
}

impl GridDump {
    /// Rebuild the grid described by the dump's leaf cells.
    pub fn rebuild(&self) -> Result<QuadtreeGrid> {
        QuadtreeGrid::build(self.domain, self.depth, self.pads, &[], &self.cells)
    }
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Input(format!("grid dump line {line}: {msg}"))
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, &format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, &format!("bad {what}")))
}

pub fn parse_grid_dump(text: &str) -> Result<GridDump> {
    let mut header = None;
    let mut cells = Vec::new();
    let mut nodes = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let mut t = line.split_whitespace();
        match t.next() {
            None => continue,
            Some("grid") => {
                let depth: u32 = field(t.next(), ln, "depth")?;
                let vals: Vec<f64> = (0..4)
                    .map(|_| field(t.next(), ln, "domain bound"))
                    .collect::<Result<_>>()?;
                let px: u32 = field(t.next(), ln, "pad_x")?;
                let py: u32 = field(t.next(), ln, "pad_y")?;
                header = Some((depth, DomainBox::new(vals[0], vals[1], vals[2], vals[3])?, (px, py)));
            }
            Some("cell") => {
                let i = field(t.next(), ln, "i")?;
                let j = field(t.next(), ln, "j")?;
                let k = field(t.next(), ln, "k")?;
                cells.push(Cell::new(i, j, k));
            }
            Some("node") => {
                let i = field(t.next(), ln, "i")?;
                let j = field(t.next(), ln, "j")?;
                let x = field(t.next(), ln, "x")?;
                let y = field(t.next(), ln, "y")?;
                let cls: String = field(t.next(), ln, "class")?;
                let class =
                    NodeClass::from_label(&cls).ok_or_else(|| parse_err(ln, "unknown class"))?;
                let mut dists = [None; 4];
                for d in dists.iter_mut() {
                    let tok = t.next().ok_or_else(|| parse_err(ln, "missing distance"))?;
                    if tok != "-" {
                        *d = Some(tok.parse().map_err(|_| parse_err(ln, "bad distance"))?);
                    }
                }
                nodes.push(DumpNode {
                    i,
                    j,
                    x,
                    y,
                    class,
                    dists,
                });
            }
            Some(other) => return Err(parse_err(ln, &format!("unknown record `{other}`"))),
        }
    }
    let (depth, domain, pads) = header.ok_or_else(|| Error::Input("grid dump has no header".into()))?;
    Ok(GridDump {
        depth,
        domain,
        pads,
        cells,
        nodes,
    })
}
