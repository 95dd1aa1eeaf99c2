//! Virtual dimensions of vortex moduli on a surface with cylindrical ends,
//! in exact rational arithmetic.
//!
//! For the weighted circle action `H_2^G(X; Z)` is identified with `Z`, and
//! `<c_1^G(TX), B> = (sum_j w_j) B`.

use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::critical::{degree_shift_cr, SectorLabel};
use crate::error::{invalid, Result, VortexError};
use crate::space::CircleSpace;

/// Real dimension of the structure group.
pub const GROUP_DIM: i64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexQuery {
    pub space: CircleSpace,
    pub genus: u32,
    /// Equivariant class, in units of the generator.
    pub class: i64,
    /// One sector per cylindrical end.
    pub sectors: Vec<SectorLabel>,
}

/// `<c_1^G(TX), B>`.
pub fn chern_pairing(space: &CircleSpace, class: i64) -> i64 {
    space.weights().iter().sum::<i64>() * class
}

/// Checks that `(m, k)` is a reduced label of a sector with fixed points
/// and returns it with its fixed coordinates.
pub fn resolve_sector(space: &CircleSpace, m: u32, k: u32) -> Result<SectorLabel> {
    match SectorLabel::for_element(m, k, space.weights()) {
        Some(s) if s.m == m && s.k == k => Ok(s),
        Some(_) => Err(invalid("index.sectors", format!("label {m}:{k} is not in lowest terms"))),
        None => Err(VortexError::EmptySectorQuery { m, k }),
    }
}

/// `2 <c_1^G, B> + 2 (n - dim G)(1 - g) - 2 sum_i iota_CR(g_i)`.
pub fn virtual_dimension(q: &IndexQuery) -> Result<Ratio<i64>> {
    if q.sectors.is_empty() {
        return Err(invalid("index.sectors", "need at least one cylindrical end"));
    }
    // <[omega - mu], B> = 2 pi tau B must be positive
    if q.class <= 0 {
        return Err(invalid(
            "index.class",
            format!("the class must pair positively with the action, found {}", q.class),
        ));
    }
    let mut shift = Ratio::from_integer(0);
    for s in &q.sectors {
        let resolved = resolve_sector(&q.space, s.m, s.k)?;
        shift += degree_shift_cr(&q.space, &resolved);
    }
    let n = q.space.dim() as i64;
    let base = 2 * chern_pairing(&q.space, q.class) + 2 * (n - GROUP_DIM) * (1 - q.genus as i64);
    Ok(Ratio::from_integer(base) - shift * 2)
}

/// One evaluated query, for tables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexRow {
    pub weights: Vec<i64>,
    pub genus: u32,
    pub class: i64,
    /// Sector labels `m:k`.
    pub sectors: Vec<String>,
    pub chern: i64,
    pub shift: String,
    pub dimension: String,
}

impl IndexRow {
    pub fn evaluate(q: &IndexQuery) -> Result<Self> {
        let dimension = virtual_dimension(q)?;
        let shift: Ratio<i64> = q.sectors.iter().map(|s| degree_shift_cr(&q.space, s)).sum();
        Ok(Self {
            weights: q.space.weights().to_vec(),
            genus: q.genus,
            class: q.class,
            sectors: q.sectors.iter().map(|s| format!("{}:{}", s.m, s.k)).collect(),
            chern: chern_pairing(&q.space, q.class),
            shift: shift.to_string(),
            dimension: dimension.to_string(),
        })
    }
}

impl fmt::Display for IndexRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        write!(
            f,
            "{:<12} {:>5} {:>5} {:<16} {:>6} {:>8} {:>10}",
            format!("({})", w.join(",")),
            self.genus,
            self.class,
            self.sectors.join(" "),
            self.chern,
            self.shift,
            self.dimension
        )
    }
}

/// Aligned text table with a header line.
pub fn format_table(rows: &[IndexRow]) -> String {
    let mut out = format!(
        "{:<12} {:>5} {:>5} {:<16} {:>6} {:>8} {:>10}\n",
        "weights", "genus", "B", "sectors", "c1", "shift", "dim"
    );
    for r in rows {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// `weights;genus;B;sectors;c1;shift;dim` rows.
pub fn format_csv(rows: &[IndexRow]) -> String {
    let mut out = String::from("weights,genus,B,sectors,c1,shift,dim\n");
    for r in rows {
        let w: Vec<String> = r.weights.iter().map(|w| w.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            w.join(" "),
            r.genus,
            r.class,
            r.sectors.join(" "),
            r.chern,
            r.shift,
            r.dimension
        ));
    }
    out
}
