//! Exact primal simplex with Bland's rule.

use num_traits::{One, Signed, Zero};

use crate::dist::Rat;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rat, x: Vec<Rat> },
    Unbounded,
}

/// Maximizes `c·x` subject to `a·x <= b`, `x >= 0`, with `b >= 0` so the
/// origin is a starting vertex.
pub fn maximize(c: &[Rat], a: &[Vec<Rat>], b: &[Rat]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    assert_eq!(b.len(), m, "one right-hand side per row");
    assert!(b.iter().all(|v| !v.is_negative()), "right-hand sides must be nonnegative");
    let width = n + m + 1;
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n, "row width must match objective");
        let mut r = vec![Rat::zero(); width];
        r[..n].clone_from_slice(row);
        r[n + i] = Rat::one();
        r[width - 1] = b[i].clone();
        rows.push(r);
    }
    // reduced costs; the last entry holds minus the objective value
    let mut obj = vec![Rat::zero(); width];
    obj[..n].clone_from_slice(c);
    let mut basis: Vec<usize> = (n..n + m).collect();

    while let Some(enter) = (0..n + m).find(|&j| obj[j].is_positive()) {
        let mut leave: Option<(usize, Rat)> = None;
        for (i, r) in rows.iter().enumerate() {
            if !r[enter].is_positive() {
                continue;
            }
            let ratio = &r[width - 1] / &r[enter];
            let better = match &leave {
                None => true,
                Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let Some((pr, _)) = leave else {
            return LpOutcome::Unbounded;
        };
        let piv = rows[pr][enter].clone();
        for v in rows[pr].iter_mut() {
            *v /= &piv;
        }
        let pivot_row = rows[pr].clone();
        for (i, r) in rows.iter_mut().enumerate() {
            if i == pr || r[enter].is_zero() {
                continue;
            }
            let f = r[enter].clone();
            for (v, p) in r.iter_mut().zip(&pivot_row) {
                *v -= &f * p;
            }
        }
        let f = obj[enter].clone();
        for (v, p) in obj.iter_mut().zip(&pivot_row) {
            *v -= &f * p;
        }
        basis[pr] = enter;
    }

    let mut x = vec![Rat::zero(); n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = rows[i][width - 1].clone();
        }
    }
    LpOutcome::Optimal {
        value: -obj[width - 1].clone(),
        x,
    }
}
