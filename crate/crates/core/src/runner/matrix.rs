use std::fmt;

use serde::{Serialize, Serializer};

use crate::attacks::{AttackClass, AttackReport};
use crate::modes::Mode;

/// A matrix cell. Glyphs follow the published tables: `-` means the attack
/// can be launched, `+` means the mode withstands it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Vulnerable,
    Protected,
}

impl Cell {
    pub fn glyph(self) -> char {
        match self {
            Cell::Vulnerable => '-',
            Cell::Protected => '+',
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cell::Vulnerable => "vulnerable",
            Cell::Protected => "protected",
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.glyph())
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatrixRow {
    pub attack: AttackClass,
    pub cells: Vec<Cell>,
    /// For each column, indices of the reports the cell was derived from.
    pub reports: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VulnerabilityMatrix {
    pub modes: Vec<Mode>,
    pub rows: Vec<MatrixRow>,
}

impl VulnerabilityMatrix {
    /// Derive the matrix from attack reports alone. Rows appear in the order
    /// attack classes first occur; a cell is vulnerable when any report for
    /// that class and mode succeeded.
    pub fn from_reports(modes: &[Mode], reports: &[AttackReport]) -> Self {
        let mut classes: Vec<AttackClass> = Vec::new();
        for r in reports {
            let c = r.spec.kind.class();
            if !classes.contains(&c) {
                classes.push(c);
            }
        }
        let rows = classes
            .into_iter()
            .map(|class| {
                let indices: Vec<Vec<usize>> = modes
                    .iter()
                    .map(|&m| {
                        reports
                            .iter()
                            .enumerate()
                            .filter(|(_, r)| {
                                r.spec.kind.class() == class && r.spec.mode_under_test == m
                            })
                            .map(|(i, _)| i)
                            .collect()
                    })
                    .collect();
                let cells = indices
                    .iter()
                    .map(|idx| {
                        if idx.iter().any(|&i| reports[i].succeeded()) {
                            Cell::Vulnerable
                        } else {
                            Cell::Protected
                        }
                    })
                    .collect();
                MatrixRow {
                    attack: class,
                    cells,
                    reports: indices,
                }
            })
            .collect();
        VulnerabilityMatrix {
            modes: modes.to_vec(),
            rows,
        }
    }

    pub fn cell(&self, attack: AttackClass, mode: Mode) -> Option<Cell> {
        let col = self.modes.iter().position(|&m| m == mode)?;
        let row = self.rows.iter().find(|r| r.attack == attack)?;
        row.cells.get(col).copied()
    }

    /// Rows as glyph strings, one char per column.
    pub fn glyph_rows(&self) -> Vec<(AttackClass, String)> {
        self.rows
            .iter()
            .map(|r| (r.attack, r.cells.iter().map(|c| c.glyph()).collect()))
            .collect()
    }
}
