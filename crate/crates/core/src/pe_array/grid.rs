//! Functional model of the PE grid.
//!
//! The grid is four 8×8 slices stacked vertically (32 rows, 8 columns).
//! Every PE holds two operand registers and one exact accumulator. Matrix
//! products run Cannon's schedule inside a slice; matrix-vector products
//! broadcast the vector along rows or columns and reduce partial sums
//! through PEs configured as adders.

use num_complex::Complex;

use crate::numerics::{widen as wide, AccMatrix, FxMatrix};
use crate::{Error, Result};

/// Side of one slice.
pub const SLICE: usize = 8;

type Ci = Complex<i64>;
type Ca = Complex<i128>;
pub type Tile = [[Ci; SLICE]; SLICE];
pub type AccTile = [[Ca; SLICE]; SLICE];

const ZI: Ci = Complex::new(0, 0);
const ZA: Ca = Complex::new(0, 0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeMode {
    Mac,
    RowAdder,
    ColAdder,
}

/// One 8×8 slice.
#[derive(Debug, Clone)]
pub struct Slice {
    a: Tile,
    b: Tile,
    acc: AccTile,
    mode: PeMode,
}

impl Default for Slice {
    fn default() -> Self {
        Self {
            a: [[ZI; SLICE]; SLICE],
            b: [[ZI; SLICE]; SLICE],
            acc: [[ZA; SLICE]; SLICE],
            mode: PeMode::Mac,
        }
    }
}

impl Slice {
    pub fn a_register(&self) -> &Tile {
        &self.a
    }

    pub fn mode(&self) -> PeMode {
        self.mode
    }

    fn clear_acc(&mut self) {
        self.acc = [[ZA; SLICE]; SLICE];
    }

    fn mac_all(&mut self, conj_a: bool) {
        for i in 0..SLICE {
            for j in 0..SLICE {
                let a = if conj_a { wide(self.a[i][j]).conj() } else { wide(self.a[i][j]) };
                self.acc[i][j] += a * wide(self.b[i][j]);
            }
        }
    }

    fn shift_a_left(&mut self) {
        for row in self.a.iter_mut() {
            row.rotate_left(1);
        }
    }

    fn shift_b_left(&mut self) {
        for row in self.b.iter_mut() {
            row.rotate_left(1);
        }
    }

    fn shift_b_up(&mut self) {
        self.b.rotate_left(1);
    }

    fn shift_acc_down(&mut self) {
        self.acc.rotate_right(1);
    }

    /// Accumulates `A·B`: A skewed left by its row index, B up by its
    /// column index, then eight MAC-and-shift steps. The accumulators stay
    /// in place, so repeated calls sum over inner blocks.
    pub fn cannon(&mut self, a: &Tile, b: &Tile) {
        self.mode = PeMode::Mac;
        for i in 0..SLICE {
            for j in 0..SLICE {
                self.a[i][j] = a[i][(i + j) % SLICE];
                self.b[i][j] = b[(i + j) % SLICE][j];
            }
        }
        for _ in 0..SLICE {
            self.mac_all(false);
            self.shift_a_left();
            self.shift_b_up();
        }
    }

    /// `Aᴴ·B` with `A` loaded in natural layout and kept stationary. `B`
    /// rows are pre-skewed right by the row index and shift left; the
    /// accumulators rotate down the columns, so after eight steps PE `(i, j)`
    /// holds `C[j][(j − i) mod 8]`, which the deskew moves home.
    pub fn cannon_herm(&mut self, a: &Tile, b: &Tile) -> AccTile {
        self.mode = PeMode::Mac;
        self.clear_acc();
        self.a = *a;
        for i in 0..SLICE {
            for j in 0..SLICE {
                self.b[i][j] = b[i][(j + SLICE - i) % SLICE];
            }
        }
        for _ in 0..SLICE {
            self.mac_all(true);
            self.shift_b_left();
            self.shift_acc_down();
        }
        let mut out = [[ZA; SLICE]; SLICE];
        for i in 0..SLICE {
            for j in 0..SLICE {
                out[j][(j + SLICE - i) % SLICE] = self.acc[i][j];
            }
        }
        out
    }

    /// Reads the accumulators (after the deskew of a standard product).
    pub fn take_acc(&mut self) -> AccTile {
        let out = self.acc;
        self.clear_acc();
        out
    }
}

/// The full 32×8 array.
#[derive(Debug, Clone)]
pub struct PEGrid {
    pub slices: Vec<Slice>,
}

impl Default for PEGrid {
    fn default() -> Self {
        Self::new(4)
    }
}

/// Pairwise adder tree; returns the sum and the number of stages.
fn adder_tree(mut v: Vec<Ca>) -> (Ca, u32) {
    let mut stages = 0;
    while v.len() > 1 {
        v = v.chunks(2).map(|c| c.iter().copied().fold(ZA, |x, y| x + y)).collect();
        stages += 1;
    }
    (v.first().copied().unwrap_or(ZA), stages)
}

/// Zero-padded 8×8 tile at block `(bi, bj)`.
pub fn tile_of(m: &FxMatrix, bi: usize, bj: usize) -> Tile {
    let mut t = [[ZI; SLICE]; SLICE];
    for (i, row) in t.iter_mut().enumerate() {
        for (j, z) in row.iter_mut().enumerate() {
            let (r, c) = (bi * SLICE + i, bj * SLICE + j);
            if r < m.rows() && c < m.cols() {
                *z = m.get(r, c);
            }
        }
    }
    t
}

fn blocks(n: usize) -> usize {
    n.div_ceil(SLICE)
}

impl PEGrid {
    pub fn new(slices: usize) -> Self {
        Self {
            slices: vec![Slice::default(); slices],
        }
    }

    pub fn rows(&self) -> usize {
        self.slices.len() * SLICE
    }

    fn set_mode(&mut self, mode: PeMode) {
        for s in &mut self.slices {
            s.mode = mode;
        }
    }

    /// Tiled `A·B`: row block `rb` runs on slice `rb mod slices`; for each
    /// output block column the inner blocks stream through the slice.
    pub fn product(&mut self, a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix> {
        if a.cols() != b.rows() {
            return Err(Error::Dimension(format!("{}x{} times {}x{}", a.rows(), a.cols(), b.rows(), b.cols())));
        }
        let (m, p) = (a.rows(), b.cols());
        let mut out = vec![ZA; m * p];
        let ns = self.slices.len();
        for rb in 0..blocks(m) {
            let slice = &mut self.slices[rb % ns];
            for cb in 0..blocks(p) {
                slice.clear_acc();
                for kb in 0..blocks(a.cols()) {
                    slice.cannon(&tile_of(a, rb, kb), &tile_of(b, kb, cb));
                }
                let t = slice.take_acc();
                scatter(&mut out, p, m, rb, cb, &t);
            }
        }
        Ok(AccMatrix::from_raw(m, p, a.lsb() + b.lsb(), out))
    }

    /// Tiled `Aᴴ·B`. The inner dimension (rows of `A`) is spread over the
    /// slices; their partial products are summed by column adders.
    pub fn product_herm(&mut self, a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix> {
        if a.rows() != b.rows() {
            return Err(Error::Dimension(format!("({}x{})ᴴ times {}x{}", a.rows(), a.cols(), b.rows(), b.cols())));
        }
        let (n, p) = (a.cols(), b.cols());
        let mut out = vec![ZA; n * p];
        let ns = self.slices.len();
        for ob in 0..blocks(n) {
            for cb in 0..blocks(p) {
                let mut partial: Vec<AccTile> = Vec::new();
                for kb in 0..blocks(a.rows()) {
                    let t = self.slices[kb % ns].cannon_herm(&tile_of(a, kb, ob), &tile_of(b, kb, cb));
                    partial.push(t);
                }
                self.set_mode(PeMode::ColAdder);
                let mut sum = [[ZA; SLICE]; SLICE];
                for (i, row) in sum.iter_mut().enumerate() {
                    for (j, z) in row.iter_mut().enumerate() {
                        *z = adder_tree(partial.iter().map(|t| t[i][j]).collect()).0;
                    }
                }
                scatter(&mut out, p, n, ob, cb, &sum);
            }
        }
        self.set_mode(PeMode::Mac);
        Ok(AccMatrix::from_raw(n, p, a.lsb() + b.lsb(), out))
    }

    /// `M·v` or `Mᴴ·v` by broadcasting `v` and reducing with adder PEs.
    pub fn mat_vec(&mut self, m: &FxMatrix, v: &FxMatrix, dir: Direction) -> Result<AccMatrix> {
        if v.cols() != 1 {
            return Err(Error::Dimension("broadcast operand must be a column vector".into()));
        }
        let (rows, cols) = (m.rows(), m.cols());
        let lsb = m.lsb() + v.lsb();
        match dir {
            Direction::Rows => {
                if v.rows() != cols {
                    return Err(Error::Dimension(format!("{rows}x{cols} times {}-vector", v.rows())));
                }
                // v[kb·8 + c] is broadcast down PE column c; PE (r, c)
                // accumulates over the block columns, row adders finish
                let mut out = Vec::with_capacity(rows);
                let mut acc = vec![[ZA; SLICE]; rows];
                for kb in 0..blocks(cols) {
                    for (r, pe_row) in acc.iter_mut().enumerate() {
                        for (c, a) in pe_row.iter_mut().enumerate() {
                            let k = kb * SLICE + c;
                            if k < cols {
                                *a += wide(m.get(r, k)) * wide(v.get(k, 0));
                            }
                        }
                    }
                }
                self.set_mode(PeMode::RowAdder);
                for pe_row in &acc {
                    out.push(adder_tree(pe_row.to_vec()).0);
                }
                self.set_mode(PeMode::Mac);
                Ok(AccMatrix::from_raw(rows, 1, lsb, out))
            }
            Direction::Cols => {
                if v.rows() != rows {
                    return Err(Error::Dimension(format!("({rows}x{cols})ᴴ times {}-vector", v.rows())));
                }
                // v[r] is broadcast along PE row r; column adders sum the
                // 8 rows of a slice, then across slices
                let ns = self.slices.len();
                let mut out = vec![ZA; cols];
                for kb in 0..blocks(cols) {
                    for c in 0..SLICE {
                        let k = kb * SLICE + c;
                        if k >= cols {
                            continue;
                        }
                        let per_row: Vec<Ca> =
                            (0..rows).map(|r| wide(m.get(r, k)).conj() * wide(v.get(r, 0))).collect();
                        self.set_mode(PeMode::ColAdder);
                        let slice_sums: Vec<Ca> = per_row.chunks(SLICE).map(|ch| adder_tree(ch.to_vec()).0).collect();
                        let mut total = ZA;
                        for group in slice_sums.chunks(ns) {
                            total += adder_tree(group.to_vec()).0;
                        }
                        out[k] = total;
                    }
                }
                self.set_mode(PeMode::Mac);
                Ok(AccMatrix::from_raw(cols, 1, lsb, out))
            }
        }
    }

    /// Element-wise `E − j·vᴴ` with `j` broadcast along rows and `v` along
    /// columns.
    pub fn outer_update(&mut self, e: &FxMatrix, j: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix> {
        if j.rows() != e.rows() || v.rows() != e.cols() || j.cols() != 1 || v.cols() != 1 {
            return Err(Error::Dimension("outer update shapes".into()));
        }
        let (rows, cols) = (e.rows(), e.cols());
        let mut prod = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for k in 0..cols {
                prod.push(wide(j.get(r, 0)) * wide(v.get(k, 0)).conj());
            }
        }
        let outer = AccMatrix::from_raw(rows, cols, j.lsb() + v.lsb(), prod);
        e.to_acc().sub(&outer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `M·v`
    Rows,
    /// `Mᴴ·v`
    Cols,
}

fn scatter(out: &mut [Ca], cols: usize, rows: usize, bi: usize, bj: usize, t: &AccTile) {
    for (i, row) in t.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            let (r, c) = (bi * SLICE + i, bj * SLICE + j);
            if r < rows && c < cols {
                out[r * cols + c] = *z;
            }
        }
    }
}

/// Stages of a pairwise adder tree over `n` inputs.
pub fn tree_depth(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u64
    }
}
