//! Dense complex linear algebra helpers shared by the Fock-space code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Conversion from ordinary frequency in MHz to angular frequency in rad/ns.
pub const MHZ_TO_RAD_NS: f64 = 2.0 * std::f64::consts::PI * 1e-3;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `A - A†`, relative to the largest entry of `A`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    max_abs(&(m - m.adjoint())) / scale
}

/// Complex product through four real products; the real kernel is blocked
/// and vectorised, the generic complex one is not.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    if a.nrows() * a.ncols() * b.ncols() < 32_768 {
        return a * b;
    }
    let ar = a.map(|z| z.re);
    let ai = a.map(|z| z.im);
    let br = b.map(|z| z.re);
    let bi = b.map(|z| z.im);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMat::from_fn(a.nrows(), b.ncols(), |i, j| {
        C64::new(re[(i, j)], im[(i, j)])
    })
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
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

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a.scale(0.5f64.powi(s));
    let id = CMat::identity(n, n);
    let a2 = matmul(&a, &a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);
    let b = |k: usize| c(PADE13[k]);

    let u_inner = matmul(&a6, &(&a6 * b(13) + &a4 * b(11) + &a2 * b(9)))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = matmul(&a, &u_inner);
    let v = matmul(&a6, &(&a6 * b(12) + &a4 * b(10) + &a2 * b(8)))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..s {
        r = matmul(&r, &r);
    }
    r
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    // Symmetrize to kill round-off asymmetry before the solver sees it.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        fix_phase(&mut col);
        vectors.set_column(k, &col);
    }
    (values, vectors)
}

/// Rotate a vector's global phase so its largest component is real positive.
pub fn fix_phase(v: &mut CVec) {
    let mut best = C64::new(0.0, 0.0);
    for z in v.iter() {
        if z.norm() > best.norm() + 1e-12 {
            best = *z;
        }
    }
    if best.norm() > 0.0 {
        let ph = best.conj() / best.norm();
        for z in v.iter_mut() {
            *z *= ph;
        }
    }
}

/// `exp(-i H t)` for Hermitian `H` via eigen-decomposition.
pub fn unitary_from_hermitian(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = herm_eigen(h);
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for (k, &e) in vals.iter().enumerate() {
        let ph = C64::from_polar(1.0, -e * t);
        for r in 0..n {
            scaled[(r, k)] *= ph;
        }
    }
    scaled * vecs.adjoint()
}

/// Principal square root of a positive semidefinite Hermitian matrix
/// (negative round-off eigenvalues are clamped to zero).
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = herm_eigen(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for (k, &e) in vals.iter().enumerate() {
        let s = e.max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, k)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Solve a small real linear system, `None` when singular.
pub fn solve_real(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}
