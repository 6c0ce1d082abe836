use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{BoundaryEdge, BoundaryTag, Mesh, Subdomain, Triangle};
use crate::error::{FsiError, Result};

const MAGIC: &str = "FSIROM-MESH v1";

/// Serializes a mesh. Coordinates use the shortest round-trip representation.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.nodes().len(),
        mesh.triangles().len(),
        mesh.boundary_edges().len()
    );
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {} {}", t.nodes[0], t.nodes[1], t.nodes[2], t.subdomain);
    }
    for e in mesh.boundary_edges() {
        let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag);
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_mesh(mesh)).map_err(|e| FsiError::io(path, e))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FsiError::io(path, e))?;
    read_mesh(&text, path)
}

struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> FsiError {
        FsiError::Parse { path: self.path.clone(), line, msg: msg.into() }
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.iter.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l.split_whitespace().collect()))
            }
            None => Err(self.err(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn num<T: std::str::FromStr>(&self, line: usize, tok: &str, what: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(line, format!("invalid {what} '{tok}'")))
    }

    fn index(&self, line: usize, tok: &str, bound: usize) -> Result<usize> {
        let i: usize = self.num(line, tok, "node index")?;
        if i >= bound {
            return Err(self.err(line, format!("node index {i} out of range (have {bound} nodes)")));
        }
        Ok(i)
    }
}

/// Parses the text of a mesh file; `path` is used only in diagnostics.
pub fn read_mesh(text: &str, path: impl AsRef<Path>) -> Result<Mesh> {
    let mut lines = Lines { path: path.as_ref().to_path_buf(), iter: text.lines().enumerate(), last: 0 };
    let (ln, magic) = lines.next("header")?;
    if magic.join(" ") != MAGIC {
        if magic.first() == Some(&"FSIROM-MESH") {
            return Err(lines.err(ln, format!("unsupported version '{}'", magic[1..].join(" "))));
        }
        return Err(lines.err(ln, format!("malformed header, expected '{MAGIC}'")));
    }
    let (ln, counts) = lines.next("counts")?;
    if counts.len() != 3 {
        return Err(lines.err(ln, "expected '<n_nodes> <n_triangles> <n_boundary_edges>'"));
    }
    let nn: usize = lines.num(ln, counts[0], "node count")?;
    let nt: usize = lines.num(ln, counts[1], "triangle count")?;
    let ne: usize = lines.num(ln, counts[2], "edge count")?;
    if nt == 0 {
        return Err(lines.err(ln, "no cells"));
    }

    let mut nodes = Vec::with_capacity(nn);
    for _ in 0..nn {
        let (ln, tok) = lines.next("node line")?;
        if tok.len() != 2 {
            return Err(lines.err(ln, "expected 'x y'"));
        }
        let x: f64 = lines.num(ln, tok[0], "coordinate")?;
        let y: f64 = lines.num(ln, tok[1], "coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(lines.err(ln, "non-finite coordinate"));
        }
        nodes.push([x, y]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, tok) = lines.next("triangle line")?;
        if tok.len() != 4 {
            return Err(lines.err(ln, "expected 'i j k subdomain'"));
        }
        let mut ids = [0; 3];
        for k in 0..3 {
            ids[k] = lines.index(ln, tok[k], nn)?;
        }
        let subdomain: Subdomain = tok[3].parse().map_err(|e: String| lines.err(ln, e))?;
        triangles.push(Triangle { nodes: ids, subdomain });
    }
    let mut edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, tok) = lines.next("edge line")?;
        if tok.len() != 3 {
            return Err(lines.err(ln, "expected 'i j tag'"));
        }
        let a = lines.index(ln, tok[0], nn)?;
        let b = lines.index(ln, tok[1], nn)?;
        let tag: BoundaryTag = tok[2].parse().map_err(|e: FsiError| lines.err(ln, e.to_string()))?;
        edges.push(BoundaryEdge { nodes: [a, b], tag });
    }
    for (i, l) in lines.iter.by_ref() {
        if !l.trim().is_empty() {
            return Err(FsiError::Parse {
                path: lines.path.clone(),
                line: i + 1,
                msg: "trailing content after the declared sections".into(),
            });
        }
    }
    Mesh::new(nodes, triangles, edges)
}
