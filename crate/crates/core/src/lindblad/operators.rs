//! Operators on the 2^N product space.
//!
//! Emitter 0 is the most significant bit of a basis index and a set bit
//! means excited, so for two emitters the basis is |gg>, |ge>, |eg>, |ee>.

use crate::{CMatrix, C64};

pub fn dimension(n: usize) -> usize {
    1 << n
}

fn bit(n: usize, i: usize) -> usize {
    1 << (n - 1 - i)
}

/// Whether emitter `i` is excited in basis state `index`.
pub fn is_excited(n: usize, i: usize, index: usize) -> bool {
    index & bit(n, i) != 0
}

/// Basis index of the state with exactly the listed emitters excited.
pub fn basis_index(n: usize, excited: &[usize]) -> usize {
    excited.iter().fold(0, |acc, &i| acc | bit(n, i))
}

/// Lowering operator sigma_i = |g><e| on emitter `i`.
pub fn lowering(n: usize, i: usize) -> CMatrix {
    let d = dimension(n);
    let b = bit(n, i);
    let mut m = CMatrix::zeros(d, d);
    for k in 0..d {
        if k & b != 0 {
            m[(k & !b, k)] = C64::new(1.0, 0.0);
        }
    }
    m
}

/// Excitation number sigma_i^dag sigma_i.
pub fn number(n: usize, i: usize) -> CMatrix {
    let d = dimension(n);
    let b = bit(n, i);
    CMatrix::from_fn(d, d, |r, c| if r == c && r & b != 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Total excitation number.
pub fn total_number(n: usize) -> CMatrix {
    let d = dimension(n);
    CMatrix::from_fn(d, d, |r, c| if r == c { C64::new(r.count_ones() as f64, 0.0) } else { C64::new(0.0, 0.0) })
}
