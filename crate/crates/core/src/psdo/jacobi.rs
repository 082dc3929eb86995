//! Cyclic Jacobi eigensolver for complex Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq` with a diagonal unitary,
//! then applies the classical real rotation that zeroes it.

use super::dense::{sort_pairs, CMat};
use crate::error::{Error, Result};
use crate::C64;

pub const MAX_SWEEPS: usize = 60;

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn jacobi_eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!("jacobi on {}x{} matrix", n, a.ncols())));
    }
    // Work on the Hermitian part so tiny asymmetries cannot stall convergence.
    let mut m = super::dense::hermitian_part(a);
    let mut v = super::dense::identity(n);
    let total = super::dense::fro(&m).max(f64::MIN_POSITIVE);

    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for q in 1..n {
            for p in 0..q {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * total {
            let values = (0..n).map(|i| m[(i, i)].re).collect();
            return Ok(sort_pairs(values, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q, total);
            }
        }
    }
    Err(Error::Structure(format!("jacobi did not converge in {MAX_SWEEPS} sweeps")))
}

fn rotate(m: &mut CMat, v: &mut CMat, p: usize, q: usize, total: f64) {
    let apq = m[(p, q)];
    let b = apq.norm();
    if b <= 1e-300 || b <= 1e-18 * total {
        m[(p, q)] = C64::new(0.0, 0.0);
        m[(q, p)] = C64::new(0.0, 0.0);
        return;
    }
    let phase = apq / b;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let zeta = (aqq - app) / (2.0 * b);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // J = diag(1, conj(phase)) · [[c, s], [-s, c]]
    let jpp = C64::new(c, 0.0);
    let jpq = C64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    let n = m.nrows();
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * jpp + akq * jqp;
        m[(k, q)] = akp * jpq + akq * jqq;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        m[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psdo::dense::{adjoint, eigh_faer, fro, identity, matmul, reconstruct};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        super::super::dense::hermitian_part(&a)
    }

    #[test]
    fn diagonal_input_is_returned() {
        let a = CMat::from_fn(4, 4, |i, j| if i == j { C64::new((4 - i) as f64, 0.0) } else { C64::new(0.0, 0.0) });
        let (vals, _) = jacobi_eigh(&a).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let a = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, 1.0),
            (1, 0) => C64::new(0.0, -1.0),
            _ => C64::new(1.0, 0.0),
        });
        let (vals, _) = jacobi_eigh(&a).unwrap();
        assert!(vals[0].abs() < 1e-15 && (vals[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        for seed in 0..5 {
            let a = random_hermitian(24, seed);
            let (vals, v) = jacobi_eigh(&a).unwrap();
            let d: Vec<C64> = vals.iter().map(|&x| C64::new(x, 0.0)).collect();
            let rec = reconstruct(&v, &d);
            assert!(fro(&(&rec - &a)) / fro(&a) < 1e-13);
            let gram = matmul(&adjoint(&v), &v);
            assert!(fro(&(&gram - identity(24))) < 1e-13);
        }
    }

    #[test]
    fn agrees_with_faer_route() {
        let a = random_hermitian(40, 99);
        let (vj, _) = jacobi_eigh(&a).unwrap();
        let (vf, _) = eigh_faer(&a).unwrap();
        for (x, y) in vj.iter().zip(&vf) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }
}
