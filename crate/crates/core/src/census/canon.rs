//! Canonical forms of small connected graphs.
//!
//! A labeled graph on `k` vertices is encoded by its upper triangle, read
//! column by column: pair `(i, j)`, `i < j`, has slot `s = j(j-1)/2 + i`.
//! The canonical code puts slot `s` at bit `n_pairs - 1 - s`, so the pairs
//! among the first vertices are the most significant, and takes the minimum
//! over all vertex orderings.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{RcmError, Result};

/// Largest component order that gets a class.
pub const K_MAX: usize = 8;

#[inline]
pub(crate) fn n_pairs(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

#[inline]
pub(crate) fn slot(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

/// Isomorphism class of a connected graph on `order` vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GraphClass {
    order: usize,
    canon: u32,
}

/// Adjacency rows (bit `j` of `rows[i]` set iff `i ~ j`) from a labeled mask.
pub(crate) fn rows_from_mask(k: usize, mask: u32) -> [u8; K_MAX] {
    let mut rows = [0u8; K_MAX];
    for j in 1..k {
        for i in 0..j {
            if mask >> slot(i, j) & 1 == 1 {
                rows[i] |= 1 << j;
                rows[j] |= 1 << i;
            }
        }
    }
    rows
}

#[cfg(test)]
pub(crate) fn mask_from_rows(k: usize, rows: &[u8]) -> u32 {
    let mut mask = 0u32;
    for j in 1..k {
        for i in 0..j {
            if rows[i] >> j & 1 == 1 {
                mask |= 1 << slot(i, j);
            }
        }
    }
    mask
}

pub(crate) fn rows_connected(k: usize, rows: &[u8]) -> bool {
    if k == 0 {
        return false;
    }
    let full: u16 = (1u16 << k) - 1;
    let mut seen: u16 = 1;
    let mut frontier: u16 = 1;
    while frontier != 0 {
        let mut next: u16 = 0;
        for v in 0..k {
            if frontier >> v & 1 == 1 {
                next |= rows[v] as u16;
            }
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen & full == full
}

/// Code of the labeled graph under the identity ordering.
#[cfg(test)]
pub(crate) fn code_of(k: usize, rows: &[u8]) -> u32 {
    let np = n_pairs(k);
    let mut code = 0u32;
    for j in 1..k {
        for i in 0..j {
            if rows[i] >> j & 1 == 1 {
                code |= 1 << (np - 1 - slot(i, j));
            }
        }
    }
    code
}

struct Search<'a> {
    k: usize,
    np: usize,
    rows: &'a [u8],
    perm: [usize; K_MAX],
    used: u16,
    best: u32,
}

impl Search<'_> {
    fn run(&mut self, pos: usize, code: u32) {
        if pos == self.k {
            if code < self.best {
                self.best = code;
            }
            return;
        }
        for v in 0..self.k {
            if self.used >> v & 1 == 1 {
                continue;
            }
            let mut c = code;
            for i in 0..pos {
                if self.rows[self.perm[i]] >> v & 1 == 1 {
                    c |= 1 << (self.np - 1 - slot(i, pos));
                }
            }
            let done = (pos + 1) * pos / 2;
            let top = if done == 0 {
                0
            } else {
                (((1u64 << done) - 1) << (self.np - done)) as u32
            };
            if c & top > self.best & top {
                continue;
            }
            self.perm[pos] = v;
            self.used |= 1 << v;
            self.run(pos + 1, c);
            self.used &= !(1 << v);
        }
    }
}

/// Minimum code over all vertex orderings (branch and bound on prefixes).
pub(crate) fn canonical_code(k: usize, rows: &[u8]) -> u32 {
    if k <= 1 {
        return 0;
    }
    let mut s = Search {
        k,
        np: n_pairs(k),
        rows,
        perm: [0; K_MAX],
        used: 0,
        best: u32::MAX,
    };
    s.run(0, 0);
    s.best
}

/// Canonical class of a connected graph given as a symmetric boolean matrix.
pub fn canonical_form(adjacency: &[Vec<bool>]) -> Result<GraphClass> {
    let k = adjacency.len();
    if k == 0 {
        return Err(RcmError::InvalidParameter("graph must have at least one vertex".into()));
    }
    if k > K_MAX {
        return Err(RcmError::OrderTooLarge { order: k, cap: K_MAX });
    }
    let mut rows = [0u8; K_MAX];
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != k {
            return Err(RcmError::DimensionMismatch {
                expected: k,
                found: row.len(),
            });
        }
        for (j, &e) in row.iter().enumerate() {
            if e != adjacency[j][i] {
                return Err(RcmError::InvalidParameter("adjacency matrix must be symmetric".into()));
            }
            if e && i == j {
                return Err(RcmError::InvalidParameter("self-loops are not allowed".into()));
            }
            if e {
                rows[i] |= 1 << j;
            }
        }
    }
    GraphClass::from_rows(k, &rows)
}

impl GraphClass {
    pub(crate) fn from_rows(k: usize, rows: &[u8]) -> Result<Self> {
        if k == 0 || k > K_MAX {
            return Err(RcmError::OrderTooLarge { order: k, cap: K_MAX });
        }
        if !rows_connected(k, rows) {
            return Err(RcmError::Disconnected);
        }
        Ok(GraphClass {
            order: k,
            canon: canonical_code(k, rows),
        })
    }

    /// Class of the labeled graph on `[k]` with the given edge list.
    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if k == 0 || k > K_MAX {
            return Err(RcmError::OrderTooLarge { order: k, cap: K_MAX });
        }
        let mut rows = [0u8; K_MAX];
        for &(i, j) in edges {
            if i >= k || j >= k || i == j {
                return Err(RcmError::InvalidParameter(format!("bad edge ({i}, {j}) for {k} vertices")));
            }
            rows[i] |= 1 << j;
            rows[j] |= 1 << i;
        }
        Self::from_rows(k, &rows)
    }

    pub fn vertex() -> Self {
        GraphClass { order: 1, canon: 0 }
    }

    pub fn edge() -> Self {
        Self::from_edges(2, &[(0, 1)]).expect("edge is connected")
    }

    pub fn path(k: usize) -> Result<Self> {
        let edges: Vec<_> = (1..k).map(|i| (i - 1, i)).collect();
        Self::from_edges(k, &edges)
    }

    pub fn complete(k: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for j in 1..k {
            for i in 0..j {
                edges.push((i, j));
            }
        }
        Self::from_edges(k, &edges)
    }

    pub fn star(k: usize) -> Result<Self> {
        let edges: Vec<_> = (1..k).map(|i| (0, i)).collect();
        Self::from_edges(k, &edges)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn canon(&self) -> u32 {
        self.canon
    }

    pub fn edge_count(&self) -> usize {
        self.canon.count_ones() as usize
    }

    /// Adjacency rows of the canonical representative.
    pub(crate) fn rows(&self) -> [u8; K_MAX] {
        let k = self.order;
        let np = n_pairs(k);
        let mut rows = [0u8; K_MAX];
        for j in 1..k {
            for i in 0..j {
                if self.canon >> (np - 1 - slot(i, j)) & 1 == 1 {
                    rows[i] |= 1 << j;
                    rows[j] |= 1 << i;
                }
            }
        }
        rows
    }

    /// Edge list of the canonical representative.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let rows = self.rows();
        let mut out = Vec::new();
        for j in 1..self.order {
            for i in 0..j {
                if rows[i] >> j & 1 == 1 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let rows = self.rows();
        (0..self.order)
            .map(|i| (0..self.order).map(|j| rows[i] >> j & 1 == 1).collect())
            .collect()
    }

    /// `k{order}-{canon as 8 hex digits}`.
    pub fn id(&self) -> String {
        format!("k{}-{:08x}", self.order, self.canon)
    }
}

impl fmt::Display for GraphClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for GraphClass {
    type Err = RcmError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || RcmError::BadClassId(s.to_string());
        let rest = s.strip_prefix('k').ok_or_else(bad)?;
        let (k, hex) = rest.split_once('-').ok_or_else(bad)?;
        let order: usize = k.parse().map_err(|_| bad())?;
        let canon = u32::from_str_radix(hex, 16).map_err(|_| bad())?;
        if order == 0 || order > K_MAX || (n_pairs(order) < 32 && canon >> n_pairs(order) != 0) {
            return Err(bad());
        }
        let class = GraphClass { order, canon };
        let rows = class.rows();
        if !rows_connected(order, &rows) || canonical_code(order, &rows) != canon {
            return Err(bad());
        }
        Ok(class)
    }
}

impl TryFrom<String> for GraphClass {
    type Error = RcmError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GraphClass> for String {
    fn from(c: GraphClass) -> String {
        c.id()
    }
}

fn all_classes() -> &'static Vec<Vec<GraphClass>> {
    static CLASSES: OnceLock<Vec<Vec<GraphClass>>> = OnceLock::new();
    CLASSES.get_or_init(|| {
        let mut by_order: Vec<Vec<GraphClass>> = vec![Vec::new(), vec![GraphClass::vertex()]];
        for k in 2..=K_MAX {
            let mut next = Vec::new();
            // every connected graph has a vertex whose removal keeps it connected
            for g in &by_order[k - 1] {
                let base = g.rows();
                for attach in 1u16..(1 << (k - 1)) {
                    let mut rows = base;
                    for v in 0..k - 1 {
                        if attach >> v & 1 == 1 {
                            rows[v] |= 1 << (k - 1);
                            rows[k - 1] |= 1 << v;
                        }
                    }
                    next.push(GraphClass {
                        order: k,
                        canon: canonical_code(k, &rows),
                    });
                }
            }
            next.sort();
            next.dedup();
            by_order.push(next);
        }
        by_order
    })
}

/// All connected classes on `k` vertices, sorted by canonical code.
pub fn enumerate_classes(k: usize) -> Result<Vec<GraphClass>> {
    if k == 0 || k > K_MAX {
        return Err(RcmError::OrderTooLarge { order: k, cap: K_MAX });
    }
    Ok(all_classes()[k].clone())
}

/// Largest order for which labeled-mask lookup tables are built.
pub const TABLE_CAP: usize = 6;

/// For each labeled mask on `k` vertices, the index of its class in
/// `enumerate_classes(k)`, or `None` when disconnected.
pub(crate) fn class_table(k: usize) -> &'static [Option<u16>] {
    static TABLES: OnceLock<Vec<Vec<Option<u16>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        (0..=TABLE_CAP)
            .map(|k| {
                if k == 0 {
                    return Vec::new();
                }
                let classes = &all_classes()[k];
                (0u32..(1u32 << n_pairs(k)))
                    .map(|mask| {
                        let rows = rows_from_mask(k, mask);
                        if !rows_connected(k, &rows) {
                            return None;
                        }
                        let c = canonical_code(k, &rows);
                        let idx = classes
                            .binary_search_by(|g| g.canon.cmp(&c))
                            .expect("every connected graph has a class");
                        Some(idx as u16)
                    })
                    .collect()
            })
            .collect()
    });
    &tables[k]
}
