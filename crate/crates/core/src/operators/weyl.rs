//! Weyl operators `(W_z f)(w) = f(w − z) k_z(w)`.
//!
//! `W_z` commutes with the level shifts, so on every level it acts by the same
//! block `D(z)_{m,n} = ⟨W_z e_{1,n}, e_{1,m}⟩`. The block has the closed form
//! `D(z)_{m,n} = (−1)^n e^{−|z|²/2} conj(e_{n+1,m}(z))`, evaluated through the
//! scaled basis values; `D(−z) = D(z)*` holds entrywise.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::OperatorMatrix;
use crate::basis::{check_gate, scaled_basis_value, Layout, TruncationSpec};
use crate::error::{Error, Result};

/// `D(z)` restricted to rows `0..rows`, columns `0..cols`.
pub fn displacement_block(z: Complex64, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |m, n| {
        let v = scaled_basis_value(n + 1, m, z).conj();
        if n % 2 == 0 { v } else { -v }
    })
}

/// `W_z` on any layout; identical `D(z)` blocks on the diagonal.
pub fn weyl_on_layout(z: Complex64, layout: Layout) -> Result<OperatorMatrix> {
    check_gate(layout.degrees, z)?;
    let jj = layout.degrees;
    let d = displacement_block(z, jj, jj);
    let mut w = OperatorMatrix::zeros(layout, layout, format!("W({z})"));
    for l in 0..layout.levels {
        w.entries.view_mut((l * jj, l * jj), (jj, jj)).copy_from(&d);
    }
    Ok(w)
}

pub fn weyl_matrix(z: Complex64, spec: &TruncationSpec) -> Result<OperatorMatrix> {
    weyl_on_layout(z, spec.layout())
}

/// `W_{−z} T W_z`.
pub fn conjugate_by_weyl(t: &OperatorMatrix, z: Complex64) -> Result<OperatorMatrix> {
    if !t.is_square() {
        return Err(Error::Domain(format!("conjugation needs a square operator, {} is not", t.label)));
    }
    let w = weyl_on_layout(z, t.rows)?;
    let wm = weyl_on_layout(-z, t.rows)?;
    Ok(OperatorMatrix {
        rows: t.rows,
        cols: t.cols,
        entries: &wm.entries * &t.entries * &w.entries,
        label: format!("W({}) {} W({z})", -z, t.label),
    })
}
