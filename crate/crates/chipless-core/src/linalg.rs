//! Dense complex linear algebra used by the pole estimator.
//!
//! Small, self-contained routines in the classic EISPACK style: a
//! Householder reduction of Hermitian matrices to real tridiagonal form,
//! implicit-shift QL for the tridiagonal eigenproblem, Lanczos iteration
//! with full reorthogonalization for leading eigenpairs of large Gram
//! matrices, a shifted QR eigenvalue solver for small general complex
//! matrices, and Householder least squares.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

pub(crate) const EPS: f64 = f64::EPSILON;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::default(); rows * cols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn matvec(&self, v: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = Complex64::default();
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }
}

/// Gram matrix `Yᴴ·Y` of the Hankel matrix `Y[k][i] = x[k+i]`,
/// `k < n−l`, `i ≤ l`, computed diagonal-by-diagonal with sliding sums
/// in `O(l·n)` instead of `O(l²·n)`.
pub(crate) fn hankel_gram(x: &[Complex64], l: usize) -> CMat {
    let n = x.len();
    debug_assert!(l >= 1 && l < n);
    let m = n - l; // Hankel row count
    let cols = l + 1;
    let mut g = CMat::zeros(cols, cols);
    for d in 0..cols {
        let mut s = Complex64::default();
        for k in 0..m {
            s += x[k].conj() * x[k + d];
        }
        *g.at_mut(0, d) = s;
        for i in 1..cols - d {
            s += x[i - 1 + m].conj() * x[i - 1 + m + d] - x[i - 1].conj() * x[i - 1 + d];
            *g.at_mut(i, i + d) = s;
        }
    }
    for i in 0..cols {
        for j in 0..i {
            *g.at_mut(i, j) = g.at(j, i).conj();
        }
    }
    g
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Returns eigenvalues in descending order with matching eigenvector
/// columns. Householder tridiagonalization, QL with implicit shifts,
/// then back-transformation.
pub(crate) fn hermitian_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.rows;
    debug_assert_eq!(n, a.cols);
    let mut h = a.clone();
    let mut q = CMat::zeros(n, n);
    for i in 0..n {
        *q.at_mut(i, i) = Complex64::new(1.0, 0.0);
    }

    // Householder reduction to Hermitian tridiagonal form
    for k in 0..n.saturating_sub(2) {
        let mut norm2 = 0.0;
        for i in k + 1..n {
            norm2 += h.at(i, k).norm_sqr();
        }
        if norm2 <= 0.0 {
            continue;
        }
        let x0 = h.at(k + 1, k);
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let beta = -phase * norm2.sqrt();
        let mut v = vec![Complex64::default(); n];
        for i in k + 1..n {
            v[i] = h.at(i, k);
        }
        v[k + 1] -= beta;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 <= 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;

        // A <- P A P with P = I - tau v v^H:
        //   p = tau A v,  w = p - (tau/2)(v^H p) v,  A -= v w^H + w v^H
        let mut p = vec![Complex64::default(); n];
        for i in 0..n {
            let mut acc = Complex64::default();
            for j in k + 1..n {
                acc += h.at(i, j) * v[j];
            }
            p[i] = acc * tau;
        }
        let vhp: Complex64 = v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum();
        let half = vhp * (0.5 * tau);
        let w: Vec<Complex64> = p.iter().zip(&v).map(|(pi, vi)| pi - vi * half).collect();
        for i in 0..n {
            for j in 0..n {
                let upd = v[i] * w[j].conj() + w[i] * v[j].conj();
                *h.at_mut(i, j) -= upd;
            }
        }
        // Q <- Q P
        for r in 0..n {
            let mut acc = Complex64::default();
            for j in k + 1..n {
                acc += q.at(r, j) * v[j];
            }
            let acc = acc * tau;
            for j in k + 1..n {
                let sub = acc * v[j].conj();
                *q.at_mut(r, j) -= sub;
            }
        }
    }

    // phase-scale the complex tridiagonal to a real one:
    // T = D^H H D with D = diag(t), t chosen so sub-diagonals go real.
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut t = vec![Complex64::new(1.0, 0.0); n];
    for i in 0..n {
        d[i] = h.at(i, i).re;
    }
    for i in 0..n.saturating_sub(1) {
        let scaled = h.at(i + 1, i) * t[i];
        let m = scaled.norm();
        e[i] = m;
        t[i + 1] = if m > 0.0 { scaled / m } else { t[i] };
    }

    let mut z = RMat::identity(n);
    tql2(&mut d, &mut e, Some(&mut z)).expect("QL iteration failed to converge");

    // eigenvectors of A: columns of Q * diag(t) * Z
    let mut qt = q;
    for j in 0..n {
        for i in 0..n {
            *qt.at_mut(i, j) = qt.at(i, j) * t[j];
        }
    }
    let mut vecs = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::default();
            for k in 0..n {
                acc += qt.at(i, k) * z.at(k, j);
            }
            *vecs.at_mut(i, j) = acc;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let vals: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut sorted = CMat::zeros(n, n);
    for (jn, &jo) in order.iter().enumerate() {
        for i in 0..n {
            *sorted.at_mut(i, jn) = vecs.at(i, jo);
        }
    }
    (vals, sorted)
}

/// Row-major dense real matrix (tridiagonal eigenvector accumulation).
#[derive(Debug, Clone)]
pub(crate) struct RMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RMat {
    pub fn identity(n: usize) -> Self {
        let mut m = Self { rows: n, cols: n, data: vec![0.0; n * n] };
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Implicit-shift QL iteration for a real symmetric tridiagonal matrix.
///
/// `d` holds the diagonal (overwritten with eigenvalues, unsorted),
/// `e` the sub-diagonal. When `z` is given it must start as the identity
/// (or an orthogonal basis) and accumulates eigenvectors in its columns.
pub(crate) fn tql2(d: &mut [f64], e: &mut [f64], mut z: Option<&mut RMat>) -> Result<(), ()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    debug_assert_eq!(e.len(), n.saturating_sub(1));
    let mut e = {
        let mut ee = e.to_vec();
        ee.push(0.0);
        ee
    };
    // absolute deflation floor: off-diagonals below EPS * anorm are
    // numerically zero even next to tiny diagonal entries
    let anorm = d
        .iter()
        .map(|v| v.abs())
        .chain(e.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max);
    for l in 0..n {
        let mut iter = 0;
        'outer: loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= EPS * dd.max(anorm) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(());
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut i = m;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    continue 'outer;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zm) = z.as_deref_mut() {
                    for k in 0..zm.rows {
                        f = zm.at(k, i + 1);
                        *zm.at_mut(k, i + 1) = s * zm.at(k, i) + c * f;
                        *zm.at_mut(k, i) = c * zm.at(k, i) - s * f;
                    }
                }
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Result of a Lanczos run on a Hermitian PSD matrix.
pub(crate) struct LanczosOutcome {
    /// Ritz values, descending.
    pub values: Vec<f64>,
    /// Ritz vectors for the leading `want` values (columns).
    pub vectors: CMat,
    /// The iteration hit an invariant subspace (exact numerical rank).
    #[cfg_attr(not(test), allow(dead_code))]
    pub breakdown: bool,
}

/// Lanczos with full reorthogonalization: leading `want` eigenpairs of
/// the Hermitian matrix `g`. Deterministic start vector.
pub(crate) fn lanczos_top(g: &CMat, want: usize, max_steps: usize) -> LanczosOutcome {
    let n = g.rows;
    let want = want.min(n);
    let max_steps = max_steps.clamp(want.max(1), n);
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v0: Vec<Complex64> = (0..n).map(|_| Complex64::new(next(), next())).collect();
    normalize(&mut v0);

    let fro: f64 = g.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let breakdown_tol = fro * EPS * 16.0;

    let mut basis: Vec<Vec<Complex64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut breakdown = false;

    let mut w = vec![Complex64::default(); n];
    for j in 0..max_steps {
        g.matvec(&basis[j], &mut w);
        let a: f64 = basis[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
        alphas.push(a);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= vi * a;
        }
        if j > 0 {
            let b = betas[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= vi * b;
            }
        }
        for _ in 0..2 {
            for v in &basis {
                let proj: Complex64 = v.iter().zip(&w).map(|(vi, wi)| vi.conj() * wi).sum();
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * proj;
                }
            }
        }
        let b = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if b <= breakdown_tol {
            breakdown = true;
            break;
        }
        if j + 1 == max_steps {
            break;
        }
        betas.push(b);
        basis.push(w.iter().map(|c| c / b).collect());

        if j + 1 >= want + 1 {
            let k = alphas.len();
            let mut dd = alphas.clone();
            let mut ee = betas[..k - 1].to_vec();
            let mut zz = RMat::identity(k);
            if tql2(&mut dd, &mut ee, Some(&mut zz)).is_err() {
                continue;
            }
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&p, &q| dd[q].total_cmp(&dd[p]));
            let lam_max = dd[order[0]].abs().max(breakdown_tol);
            let ok = order.iter().take(want).all(|&idx| {
                let resid = b * zz.at(k - 1, idx).abs();
                resid <= lam_max * 1e-12
            });
            if ok {
                break;
            }
        }
    }

    let k = alphas.len();
    let mut dd = alphas;
    let mut ee = betas[..k.saturating_sub(1).min(betas.len())].to_vec();
    let mut zz = RMat::identity(k);
    tql2(&mut dd, &mut ee, Some(&mut zz)).expect("QL on Lanczos tridiagonal failed");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&p, &q| dd[q].total_cmp(&dd[p]));
    let values: Vec<f64> = order.iter().map(|&i| dd[i]).collect();
    let keep = want.min(k);
    let mut vectors = CMat::zeros(n, keep);
    for (col, &idx) in order.iter().take(keep).enumerate() {
        for i in 0..n {
            let mut acc = Complex64::default();
            for (jj, bvec) in basis.iter().enumerate().take(k) {
                acc += bvec[i] * zz.at(jj, idx);
            }
            *vectors.at_mut(i, col) = acc;
        }
    }
    LanczosOutcome { values, vectors, breakdown }
}

fn normalize(v: &mut [Complex64]) {
    let n2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if n2 > 0.0 {
        let inv = 1.0 / n2.sqrt();
        for c in v.iter_mut() {
            *c *= inv;
        }
    }
}

/// Eigenvalues of a small general complex matrix: Householder
/// Hessenberg reduction followed by explicitly shifted QR with
/// deflation.
pub(crate) fn complex_eigenvalues(a: &CMat) -> Result<Vec<Complex64>, ()> {
    let n = a.rows;
    debug_assert_eq!(n, a.cols);
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![a.at(0, 0)]);
    }
    let mut h = a.clone();

    for k in 0..n.saturating_sub(2) {
        let mut norm2 = 0.0;
        for i in k + 1..n {
            norm2 += h.at(i, k).norm_sqr();
        }
        if norm2 <= 0.0 {
            continue;
        }
        let x0 = h.at(k + 1, k);
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let beta = -phase * norm2.sqrt();
        let mut v = vec![Complex64::default(); n];
        for i in k + 1..n {
            v[i] = h.at(i, k);
        }
        v[k + 1] -= beta;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 <= 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        for j in 0..n {
            let mut acc = Complex64::default();
            for i in k + 1..n {
                acc += v[i].conj() * h.at(i, j);
            }
            let acc = acc * tau;
            for i in k + 1..n {
                let sub = v[i] * acc;
                *h.at_mut(i, j) -= sub;
            }
        }
        for i in 0..n {
            let mut acc = Complex64::default();
            for j in k + 1..n {
                acc += h.at(i, j) * v[j];
            }
            let acc = acc * tau;
            for j in k + 1..n {
                let sub = acc * v[j].conj();
                *h.at_mut(i, j) -= sub;
            }
        }
    }

    let mut eigs = vec![Complex64::default(); n];
    let mut hi = n;
    let mut guard = 0usize;
    let max_iter = 80 * n;
    while hi > 0 {
        guard += 1;
        if guard > max_iter {
            return Err(());
        }
        let mut lo = 0;
        for i in (1..hi).rev() {
            let sub = h.at(i, i - 1).norm();
            if sub <= EPS * (h.at(i - 1, i - 1).norm() + h.at(i, i).norm()) {
                *h.at_mut(i, i - 1) = Complex64::default();
                lo = i;
                break;
            }
        }
        if hi == 1 || lo == hi - 1 {
            eigs[hi - 1] = h.at(hi - 1, hi - 1);
            hi -= 1;
            continue;
        }

        // Wilkinson shift from the trailing 2x2 of the active block
        let aa = h.at(hi - 2, hi - 2);
        let bb = h.at(hi - 2, hi - 1);
        let cc = h.at(hi - 1, hi - 2);
        let dd = h.at(hi - 1, hi - 1);
        let tr = aa + dd;
        let det = aa * dd - bb * cc;
        let disc = (tr * tr - det * 4.0).sqrt();
        let mu1 = (tr + disc) * 0.5;
        let mu2 = (tr - disc) * 0.5;
        let shift = if (mu1 - dd).norm() <= (mu2 - dd).norm() { mu1 } else { mu2 };

        let m = hi - lo;
        let mut cs = vec![Complex64::default(); m - 1];
        let mut sn = vec![Complex64::default(); m - 1];
        for i in lo..hi {
            *h.at_mut(i, i) -= shift;
        }
        // R = G_{m-1}...G_1 (H - shift), rotations zeroing the sub-diagonal
        for i in 0..m - 1 {
            let r = lo + i;
            let (c, s) = givens(h.at(r, r), h.at(r + 1, r));
            cs[i] = c;
            sn[i] = s;
            for j in r..hi {
                let x = h.at(r, j);
                let y = h.at(r + 1, j);
                *h.at_mut(r, j) = c * x + s * y;
                *h.at_mut(r + 1, j) = -(s.conj() * x) + c.conj() * y;
            }
        }
        // H' = R G_1^H ... G_{m-1}^H + shift
        for i in 0..m - 1 {
            let r = lo + i;
            let (c, s) = (cs[i], sn[i]);
            for row in lo..(r + 2).min(hi) {
                let x = h.at(row, r);
                let y = h.at(row, r + 1);
                *h.at_mut(row, r) = x * c.conj() + y * s.conj();
                *h.at_mut(row, r + 1) = -(x * s) + y * c;
            }
        }
        for i in lo..hi {
            *h.at_mut(i, i) += shift;
        }
    }
    Ok(eigs)
}

/// Unitary Givens pair `(c, s)` with `[c, s; -s̄, c̄]·(a, b)ᵀ = (r, 0)ᵀ`.
fn givens(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let rr = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if rr == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::default());
    }
    (a.conj() / rr, b.conj() / rr)
}

/// Least squares `min ‖A x − b‖` via Householder QR (`m ≥ n`).
///
/// Returns the solution and a condition estimate from the ratio of the
/// extreme `|R|` diagonal entries.
pub(crate) fn lstsq_qr(a: &CMat, b: &[Complex64]) -> (Vec<Complex64>, f64) {
    let m = a.rows;
    let n = a.cols;
    debug_assert!(m >= n);
    debug_assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let mut norm2 = 0.0;
        for i in k..m {
            norm2 += r.at(i, k).norm_sqr();
        }
        if norm2 <= 0.0 {
            continue;
        }
        let x0 = r.at(k, k);
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let beta = -phase * norm2.sqrt();
        let mut v = vec![Complex64::default(); m];
        for i in k..m {
            v[i] = r.at(i, k);
        }
        v[k] -= beta;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 <= 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        for j in k..n {
            let mut acc = Complex64::default();
            for i in k..m {
                acc += v[i].conj() * r.at(i, j);
            }
            let acc = acc * tau;
            for i in k..m {
                let sub = v[i] * acc;
                *r.at_mut(i, j) -= sub;
            }
        }
        let mut acc = Complex64::default();
        for i in k..m {
            acc += v[i].conj() * rhs[i];
        }
        let acc = acc * tau;
        for i in k..m {
            rhs[i] -= v[i] * acc;
        }
    }
    let mut x = vec![Complex64::default(); n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            acc -= r.at(i, j) * x[j];
        }
        let rii = r.at(i, i);
        x[i] = if rii.norm() > 0.0 { acc / rii } else { Complex64::default() };
    }
    let mut dmax: f64 = 0.0;
    let mut dmin = f64::INFINITY;
    for i in 0..n {
        let v = r.at(i, i).norm();
        dmax = dmax.max(v);
        dmin = dmin.min(v);
    }
    let cond = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    (x, cond)
}
