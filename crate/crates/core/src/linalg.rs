//! Dense complex linear algebra kept deliberately small: the simulator only
//! needs a matrix exponential for modest dimensions, an LU solve backing it,
//! and a Hermitian eigensolver for physicality checks. Everything operates on
//! `ndarray` arrays of `C64`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(dim: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(dim, ONE))
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Largest entry modulus.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Largest modulus of `a - b` entries.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

/// Deviation from Hermiticity, max |A - A^dag| entry.
pub fn herm_defect(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in i..n {
            d = d.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    d
}

pub fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product, row-major convention: out[(i*p + k), (j*q + l)] = a[i,j] b[k,l].
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (m, n) = a.dim();
    let (p, q) = b.dim();
    let mut out = Array2::zeros((m * p, n * q));
    for i in 0..m {
        for j in 0..n {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            for k in 0..p {
                for l in 0..q {
                    out[[i * p + k, j * q + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// One-norm (max column sum of moduli), the norm the exponential scaling uses.
pub fn one_norm(a: &Array2<C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Solves A X = B by LU with partial pivoting; A and B are consumed as
/// workspaces. Returns X.
pub fn lu_solve(mut a: Array2<C64>, mut b: Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    for k in 0..n {
        let mut piv = k;
        let mut best = a[[k, k]].norm();
        for i in k + 1..n {
            let v = a[[i, k]].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        assert!(best > 0.0, "singular matrix in lu_solve");
        if piv != k {
            for j in 0..n {
                a.swap([k, j], [piv, j]);
            }
            for j in 0..b.ncols() {
                b.swap([k, j], [piv, j]);
            }
        }
        let inv = ONE / a[[k, k]];
        for i in k + 1..n {
            let f = a[[i, k]] * inv;
            if f == ZERO {
                continue;
            }
            a[[i, k]] = f;
            for j in k + 1..n {
                let akj = a[[k, j]];
                a[[i, j]] -= f * akj;
            }
            for j in 0..b.ncols() {
                let bkj = b[[k, j]];
                b[[i, j]] -= f * bkj;
            }
        }
    }
    // back substitution
    for jcol in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut acc = b[[i, jcol]];
            for j in i + 1..n {
                acc -= a[[i, j]] * b[[j, jcol]];
            }
            b[[i, jcol]] = acc / a[[i, i]];
        }
    }
    b
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant. Intended for moderate dimensions; the propagators use it as
/// the reference path and for small generators.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = C64::new(0.5f64.powi(s), 0.0);
    let a1 = a.mapv(|z| z * scale);
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let id = identity(n);
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let mut w = a6.mapv(|z| z * b(13)) + &a4.mapv(|z| z * b(11)) + &a2.mapv(|z| z * b(9));
    w = a6.dot(&w);
    w += &a6.mapv(|z| z * b(7));
    w += &a4.mapv(|z| z * b(5));
    w += &a2.mapv(|z| z * b(3));
    w += &id.mapv(|z| z * b(1));
    let u = a1.dot(&w);

    let mut v = a6.mapv(|z| z * b(12)) + &a4.mapv(|z| z * b(10)) + &a2.mapv(|z| z * b(8));
    v = a6.dot(&v);
    v += &a6.mapv(|z| z * b(6));
    v += &a4.mapv(|z| z * b(4));
    v += &a2.mapv(|z| z * b(2));
    v += &id.mapv(|z| z * b(0));

    let num = &v + &u;
    let den = &v - &u;
    let mut r = lu_solve(den, num);
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

/// Eigenvalues and eigenvectors of a complex Hermitian matrix by cyclic
/// Jacobi rotations. Returns (eigenvalues ascending, column eigenvectors).
pub fn hermitian_eig(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let mut m = a.clone();
    let mut v = identity(n);
    let off = |m: &Array2<C64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += m[[i, j]].norm_sqr();
            }
        }
        s
    };
    let scale = max_abs(a).max(1e-300);
    for _sweep in 0..60 {
        if off(&m).sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let z = m[[p, q]];
                if z.norm() <= 1e-18 * scale {
                    continue;
                }
                let phi = z.arg();
                let zr = z.norm();
                let x = m[[p, p]].re;
                let y = m[[q, q]].re;
                let theta = 0.5 * (2.0 * zr).atan2(x - y);
                let (c, s) = (theta.cos(), theta.sin());
                let e = C64::from_polar(1.0, phi);
                // columns p,q of each row
                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = mip * c + miq * e.conj() * s;
                    m[[i, q]] = -mip * e * s + miq * c;
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = vip * c + viq * e.conj() * s;
                    v[[i, q]] = -vip * e * s + viq * c;
                }
                for j in 0..n {
                    let mpj = m[[p, j]];
                    let mqj = m[[q, j]];
                    m[[p, j]] = mpj * c + mqj * e * s;
                    m[[q, j]] = -mpj * e.conj() * s + mqj * c;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m[[i, i]].re).collect();
    idx.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());
    let mut w = Array1::zeros(n);
    let mut vv = Array2::zeros((n, n));
    for (k, &i) in idx.iter().enumerate() {
        w[k] = evals[i];
        for r in 0..n {
            vv[[r, k]] = v[[r, i]];
        }
    }
    (w, vv)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &Array2<C64>) -> f64 {
    hermitian_eig(a).0[0]
}

/// Haar-ish random unitary from Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: rand::Rng>(dim: usize, rng: &mut R) -> Array2<C64> {
    let mut g = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            g[[i, j]] = C64::new(gauss(rng), gauss(rng));
        }
    }
    // modified Gram-Schmidt on columns
    for j in 0..dim {
        for k in 0..j {
            let proj: C64 = (0..dim).map(|i| g[[i, k]].conj() * g[[i, j]]).sum();
            for i in 0..dim {
                let gik = g[[i, k]];
                g[[i, j]] -= proj * gik;
            }
        }
        let norm: f64 = (0..dim).map(|i| g[[i, j]].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..dim {
            g[[i, j]] /= norm;
        }
    }
    g
}

fn gauss<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
