//! FSIROM-SNAP v1: an ASCII header followed by column-major little-endian `f64` data.

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{FsiError, Result};
use crate::fem::FeSpace;
use crate::reduction::{ReducedBasis, SnapshotSet};

const MAGIC: &str = "FSIROM-SNAP";
const VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapKind {
    Snapshot,
    Basis,
}

impl SnapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SnapKind::Snapshot => "snapshot",
            SnapKind::Basis => "basis",
        }
    }
}

/// Decoded file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapFile {
    pub field: String,
    pub kind: SnapKind,
    /// `<domain>/<order>/<components>`.
    pub space: String,
    pub rows: usize,
    pub columns: Vec<Vec<f64>>,
}

impl SnapFile {
    pub fn from_snapshots(s: &SnapshotSet) -> Self {
        SnapFile { field: s.name.clone(), kind: SnapKind::Snapshot, space: s.space().descriptor(), rows: s.space().n_dofs(), columns: s.columns.clone() }
    }

    pub fn from_basis(b: &ReducedBasis) -> Self {
        SnapFile { field: b.name.clone(), kind: SnapKind::Basis, space: b.space().descriptor(), rows: b.space().n_dofs(), columns: b.modes.clone() }
    }

    fn check_space(&self, space: &FeSpace) -> Result<()> {
        if self.space != space.descriptor() || self.rows != space.n_dofs() {
            return Err(FsiError::Invalid(format!(
                "{} lives on {} with {} rows, expected {} with {}",
                self.field,
                self.space,
                self.rows,
                space.descriptor(),
                space.n_dofs()
            )));
        }
        Ok(())
    }

    pub fn into_snapshots(self, space: &Arc<FeSpace>) -> Result<SnapshotSet> {
        self.check_space(space)?;
        let mut s = SnapshotSet::new(&self.field, space);
        for c in self.columns {
            s.push(c)?;
        }
        Ok(s)
    }

    /// Modes as a basis; eigenvalues travel separately.
    pub fn into_basis(self, space: &Arc<FeSpace>, eigenvalues: Vec<f64>) -> Result<ReducedBasis> {
        self.check_space(space)?;
        if self.kind != SnapKind::Basis {
            return Err(FsiError::Invalid(format!("{} holds snapshots, not a basis", self.field)));
        }
        ReducedBasis::new(&self.field, space, self.columns, eigenvalues)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128 + 8 * self.rows * self.columns.len());
        let _ = write!(
            out,
            "{MAGIC} {VERSION}\nfield={}\nkind={}\nspace={}\nrows={}\ncols={}\n\n",
            self.field,
            self.kind.as_str(),
            self.space,
            self.rows,
            self.columns.len()
        );
        for c in &self.columns {
            debug_assert_eq!(c.len(), self.rows);
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| FsiError::Invalid(format!("FSIROM-SNAP: {msg}"));
        // Header ends at the first empty line.
        let end = bytes.windows(2).position(|w| w == b"\n\n").ok_or_else(|| bad("unterminated header".into()))?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
        let mut lines = header.lines();
        let first = lines.next().unwrap_or("");
        match first.split_once(' ') {
            Some((MAGIC, VERSION)) => {}
            Some((MAGIC, v)) => return Err(FsiError::UnsupportedVersion(format!("FSIROM-SNAP {v}"))),
            _ => return Err(bad(format!("bad magic line '{first}'"))),
        }
        let mut field_value = |key: &str| -> Result<String> {
            let l = lines.next().ok_or_else(|| bad(format!("missing '{key}=' line")))?;
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected '{key}=', got '{l}'")))
        };
        let field = field_value("field")?;
        let kind = match field_value("kind")?.as_str() {
            "snapshot" => SnapKind::Snapshot,
            "basis" => SnapKind::Basis,
            k => return Err(bad(format!("unknown kind '{k}'"))),
        };
        let space = field_value("space")?;
        let count = |s: String, key: &str| s.parse::<usize>().map_err(|_| bad(format!("{key} is not a count: '{s}'")));
        let rows = count(field_value("rows")?, "rows")?;
        let cols = count(field_value("cols")?, "cols")?;
        if let Some(extra) = lines.next() {
            return Err(bad(format!("unexpected header line '{extra}'")));
        }
        let payload = &bytes[end + 2..];
        let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| bad("size overflow".into()))?;
        if payload.len() != expected {
            return Err(bad(format!("payload has {} bytes, header declares {rows}x{cols} values ({expected} bytes)", payload.len())));
        }
        let columns = payload
            .chunks_exact(8 * rows.max(1))
            .take(cols)
            .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))).collect())
            .collect::<Vec<Vec<f64>>>();
        let columns = if rows == 0 { vec![Vec::new(); cols] } else { columns };
        Ok(SnapFile { field, kind, space, rows, columns })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| FsiError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| FsiError::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            FsiError::Invalid(m) => FsiError::Invalid(format!("{}: {m}", path.display())),
            e => e,
        })
    }
}

pub fn save_snapshots(s: &SnapshotSet, path: impl AsRef<Path>) -> Result<()> {
    SnapFile::from_snapshots(s).save(path)
}

pub fn load_snapshots(path: impl AsRef<Path>, space: &Arc<FeSpace>) -> Result<SnapshotSet> {
    SnapFile::load(path)?.into_snapshots(space)
}
