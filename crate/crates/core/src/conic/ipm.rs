//! Homogeneous self-dual primal–dual interior-point method for SOCPs.
//!
//! Standard form: `min cᵀx  s.t.  Ax = b,  Gx + s = h,  s ∈ K` with `K` a
//! product of second-order cones (a cone of dimension one is the
//! nonnegative ray). Search directions use Nesterov–Todd scaling and a
//! Mehrotra predictor–corrector; the reduced KKT system is solved through
//! dense normal equations with iterative refinement. Infeasibility and
//! unboundedness are detected from the homogeneous embedding certificates.

use super::socp::{Infeasibility, SocpProblem, SocpSolution, SocpStatus, SparseRow};
use crate::Result;

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub tol: f64,
    pub infeasibility_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings {
            tol: 1e-8,
            infeasibility_tol: 1e-8,
            max_iter: 100,
            step_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ConeBlock {
    off: usize,
    dim: usize,
}

/// Nesterov–Todd scaling of one cone block.
#[derive(Debug, Clone)]
struct NtScaling {
    eta: f64,
    wbar: Vec<f64>,
}

impl NtScaling {
    fn identity(dim: usize) -> Self {
        let mut wbar = vec![0.0; dim];
        wbar[0] = 1.0;
        NtScaling { eta: 1.0, wbar }
    }

    /// `W v`.
    fn mul(&self, v: &[f64], out: &mut [f64]) {
        let w0 = self.wbar[0];
        let w1 = &self.wbar[1..];
        let w1v1: f64 = w1.iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
        out[0] = self.eta * (w0 * v[0] + w1v1);
        let coef = v[0] + w1v1 / (1.0 + w0);
        for i in 1..v.len() {
            out[i] = self.eta * (v[i] + coef * w1[i - 1]);
        }
    }

    /// `W⁻¹ v`.
    fn inv_mul(&self, v: &[f64], out: &mut [f64]) {
        let w0 = self.wbar[0];
        let w1 = &self.wbar[1..];
        let w1v1: f64 = w1.iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
        out[0] = (w0 * v[0] - w1v1) / self.eta;
        let coef = -v[0] + w1v1 / (1.0 + w0);
        for i in 1..v.len() {
            out[i] = (v[i] + coef * w1[i - 1]) / self.eta;
        }
    }
}

fn soc_residual(u: &[f64]) -> f64 {
    let n1: f64 = u[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    (u[0] - n1) * (u[0] + n1)
}

fn nt_scaling(s: &[f64], z: &[f64]) -> Option<NtScaling> {
    let sr = soc_residual(s);
    let zr = soc_residual(z);
    if !(sr > 0.0) || !(zr > 0.0) || s[0] <= 0.0 || z[0] <= 0.0 {
        return None;
    }
    let sn = sr.sqrt();
    let zn = zr.sqrt();
    let sbar: Vec<f64> = s.iter().map(|v| v / sn).collect();
    let zbar: Vec<f64> = z.iter().map(|v| v / zn).collect();
    let dot: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
    let gamma = ((1.0 + dot) / 2.0).sqrt();
    let mut wbar = vec![0.0; s.len()];
    wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
    for i in 1..s.len() {
        wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
    }
    // Re-normalise so that wbarᵀ J wbar = 1 exactly.
    let wr = soc_residual(&wbar);
    if wr > 0.0 {
        let f = wr.sqrt();
        wbar.iter_mut().for_each(|v| *v /= f);
    }
    Some(NtScaling {
        eta: (sn / zn).sqrt(),
        wbar,
    })
}

/// Jordan product `u ∘ v`.
fn circ(u: &[f64], v: &[f64], out: &mut [f64]) {
    out[0] = u.iter().zip(v).map(|(a, b)| a * b).sum();
    for i in 1..u.len() {
        out[i] = u[0] * v[i] + v[0] * u[i];
    }
}

/// Solves `λ ∘ x = ξ` for `x`.
fn inv_circ(lambda: &[f64], xi: &[f64], out: &mut [f64]) {
    let l0 = lambda[0];
    let det = soc_residual(lambda);
    let l1xi1: f64 = lambda[1..].iter().zip(&xi[1..]).map(|(a, b)| a * b).sum();
    let x0 = (l0 * xi[0] - l1xi1) / det;
    out[0] = x0;
    for i in 1..lambda.len() {
        out[i] = (xi[i] - x0 * lambda[i]) / l0;
    }
}

/// Largest `α ≥ 0` keeping `u + α d` in the cone (infinite if unbounded).
fn max_step(u: &[f64], d: &[f64]) -> f64 {
    if u.len() == 1 {
        return if d[0] < 0.0 { -u[0] / d[0] } else { f64::INFINITY };
    }
    let a = soc_residual(d);
    let b = u[0] * d[0] - u[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>();
    let c = soc_residual(u).max(0.0);
    // f(α) = a α² + 2 b α + c; first positive root is the boundary hit.
    let mut best = f64::INFINITY;
    if a.abs() < 1e-300 {
        if b < 0.0 {
            best = -c / (2.0 * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(b + b.signum() * sq);
            let mut roots = [f64::INFINITY; 2];
            if q != 0.0 {
                roots[0] = q / a;
                roots[1] = c / q;
            } else {
                roots[0] = (-b + sq) / a;
            }
            for r in roots {
                if r > 0.0 && r < best {
                    best = r;
                }
            }
        }
    }
    // Guard the half-line condition u0 + α d0 ≥ 0.
    if d[0] < 0.0 {
        best = best.min(-u[0] / d[0]);
    }
    best
}

/// Dense symmetric positive-definite factorization (lower Cholesky, row-major).
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in j + 1..n {
                let (ri, rj) = (i * n, j * n);
                let mut s = a[ri + j];
                for k in 0..j {
                    s -= a[ri + k] * a[rj + k];
                }
                a[ri + j] = s / d;
            }
        }
        Some(Cholesky { n, l: a })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            let row = &self.l[i * n..i * n + i];
            for (k, v) in row.iter().enumerate() {
                s -= v * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

struct Problem {
    n: usize,
    p: usize,
    m: usize,
    c: Vec<f64>,
    a_rows: Vec<SparseRow>,
    b: Vec<f64>,
    g_rows: Vec<SparseRow>,
    h: Vec<f64>,
    cones: Vec<ConeBlock>,
}

fn row_norm(r: &SparseRow) -> f64 {
    r.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
}

fn row_dot(r: &SparseRow, x: &[f64]) -> f64 {
    r.iter().map(|&(j, v)| v * x[j]).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Problem {
    fn from_socp(p: &SocpProblem) -> Self {
        let n = p.n_vars;
        let mut g_rows = Vec::new();
        let mut h = Vec::new();
        let mut cones = Vec::new();
        for cone in &p.cone_constraints {
            let off = g_rows.len();
            let mut rows: Vec<SparseRow> = Vec::with_capacity(cone.dim());
            let mut hs = Vec::with_capacity(cone.dim());
            rows.push(cone.c.iter().map(|&(j, v)| (j, -v)).collect());
            hs.push(cone.d);
            for (r, b) in cone.a_rows.iter().zip(&cone.b) {
                rows.push(r.iter().map(|&(j, v)| (j, -v)).collect());
                hs.push(*b);
            }
            // Uniform per-cone scaling keeps the cone invariant.
            let scale = rows.iter().map(row_norm).fold(0.0, f64::max);
            let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            for (r, hv) in rows.iter_mut().zip(hs.iter_mut()) {
                r.iter_mut().for_each(|(_, v)| *v *= scale);
                *hv *= scale;
            }
            g_rows.extend(rows);
            h.extend(hs);
            cones.push(ConeBlock {
                off,
                dim: cone.dim(),
            });
        }
        let mut a_rows = Vec::new();
        let mut b = Vec::new();
        for eq in &p.linear_eqs {
            let nr = row_norm(&eq.a);
            let s = if nr > 0.0 { 1.0 / nr } else { 1.0 };
            a_rows.push(eq.a.iter().map(|&(j, v)| (j, v * s)).collect());
            b.push(eq.rhs * s);
        }
        let cmax = p.objective.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let c_scale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
        Problem {
            n,
            p: a_rows.len(),
            m: g_rows.len(),
            c: p.objective.iter().map(|v| v * c_scale).collect(),
            a_rows,
            b,
            g_rows,
            h,
            cones,
        }
    }

    /// Cone and equality violation of `x / tau` in the scaled problem.
    fn violation(&self, x: &[f64], tau: f64) -> f64 {
        let xs: Vec<f64> = x.iter().map(|v| v / tau).collect();
        let u = self.g_mul(&xs);
        let mut worst: f64 = 0.0;
        for blk in &self.cones {
            let r: Vec<f64> = (blk.off..blk.off + blk.dim).map(|i| self.h[i] - u[i]).collect();
            worst = worst.max(norm(&r[1..]) - r[0]);
        }
        for (ax, b) in self.a_mul(&xs).iter().zip(&self.b) {
            worst = worst.max((ax - b).abs());
        }
        worst
    }

    fn g_mul(&self, x: &[f64]) -> Vec<f64> {
        self.g_rows.iter().map(|r| row_dot(r, x)).collect()
    }

    fn gt_mul_add(&self, z: &[f64], out: &mut [f64]) {
        for (r, zi) in self.g_rows.iter().zip(z) {
            if *zi != 0.0 {
                for &(j, v) in r {
                    out[j] += v * zi;
                }
            }
        }
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        self.a_rows.iter().map(|r| row_dot(r, x)).collect()
    }

    fn at_mul_add(&self, y: &[f64], out: &mut [f64]) {
        for (r, yi) in self.a_rows.iter().zip(y) {
            for &(j, v) in r {
                out[j] += v * yi;
            }
        }
    }
}

/// Factorised reduced KKT system for a fixed scaling.
struct KktSolver<'a> {
    prob: &'a Problem,
    scalings: &'a [NtScaling],
    chol: Cholesky,
    /// `H⁻¹ Aᵀ` columns (n × p, column-major) and the factorised Schur complement.
    hinv_at: Vec<Vec<f64>>,
    schur: Option<Cholesky>,
}

impl<'a> KktSolver<'a> {
    fn new(prob: &'a Problem, scalings: &'a [NtScaling]) -> Option<Self> {
        let n = prob.n;
        let mut h_mat = vec![0.0; n * n];
        let mut col_of = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();
        for (blk, sc) in prob.cones.iter().zip(scalings) {
            let rows = &prob.g_rows[blk.off..blk.off + blk.dim];
            for r in rows {
                for &(j, _) in r {
                    if col_of[j] == usize::MAX {
                        col_of[j] = touched.len();
                        touched.push(j);
                    }
                }
            }
            // Gram form Hᵢ = (W⁻¹Gᵢ)ᵀ(W⁻¹Gᵢ) stays PSD in floating point.
            let t = touched.len();
            let d = blk.dim;
            let mut g = vec![0.0; d * t];
            for (i, r) in rows.iter().enumerate() {
                for &(j, v) in r {
                    g[col_of[j] * d + i] += v;
                }
            }
            let mut m = vec![0.0; d * t];
            for k in 0..t {
                sc.inv_mul(&g[k * d..(k + 1) * d], &mut m[k * d..(k + 1) * d]);
            }
            for (ka, &a) in touched.iter().enumerate() {
                let ma = &m[ka * d..(ka + 1) * d];
                let row = &mut h_mat[a * n..a * n + n];
                for (kb, &b) in touched.iter().enumerate() {
                    row[b] += dot(ma, &m[kb * d..(kb + 1) * d]);
                }
            }
            for &j in &touched {
                col_of[j] = usize::MAX;
            }
            touched.clear();
        }
        let maxdiag = (0..n).map(|i| h_mat[i * n + i]).fold(0.0f64, f64::max);
        let mut reg = 1e-13 * maxdiag.max(1.0);
        let chol = loop {
            let mut a = h_mat.clone();
            for i in 0..n {
                a[i * n + i] += reg;
            }
            if let Some(c) = Cholesky::factor(a, n) {
                break c;
            }
            reg *= 100.0;
            if reg > 1e-2 * maxdiag.max(1.0) {
                return None;
            }
        };
        let mut hinv_at = Vec::with_capacity(prob.p);
        let mut schur = None;
        if prob.p > 0 {
            for r in &prob.a_rows {
                let mut col = vec![0.0; n];
                for &(j, v) in r {
                    col[j] += v;
                }
                chol.solve(&mut col);
                hinv_at.push(col);
            }
            let p = prob.p;
            let mut s = vec![0.0; p * p];
            for i in 0..p {
                for j in 0..p {
                    s[i * p + j] = row_dot(&prob.a_rows[i], &hinv_at[j]);
                }
            }
            let sd = (0..p).map(|i| s[i * p + i]).fold(0.0f64, f64::max);
            let mut sreg = 1e-13 * sd.max(1e-300);
            loop {
                let mut t = s.clone();
                for i in 0..p {
                    t[i * p + i] += sreg;
                }
                if let Some(c) = Cholesky::factor(t, p) {
                    schur = Some(c);
                    break;
                }
                sreg = if sreg == 0.0 { 1e-14 } else { sreg * 100.0 };
                if sreg > 1e-2 * sd.max(1e-12) {
                    return None;
                }
            }
        }
        Some(KktSolver {
            prob,
            scalings,
            chol,
            hinv_at,
            schur,
        })
    }

    fn winv2_mul(&self, v: &[f64], out: &mut [f64]) {
        for (blk, sc) in self.prob.cones.iter().zip(self.scalings) {
            let r = blk.off..blk.off + blk.dim;
            let mut tmp = vec![0.0; blk.dim];
            sc.inv_mul(&v[r.clone()], &mut tmp);
            sc.inv_mul(&tmp, &mut out[r]);
        }
    }

    /// Solves `[H Aᵀ; A 0][dx; dy] = [r1; r2]` with the regularised factorization.
    fn solve_reduced(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dx = r1.to_vec();
        self.chol.solve(&mut dx);
        if self.prob.p == 0 {
            return (dx, Vec::new());
        }
        // dy = S⁻¹ (A H⁻¹ r1 − r2)
        let mut dy: Vec<f64> = self
            .prob
            .a_rows
            .iter()
            .zip(r2)
            .map(|(r, rv)| row_dot(r, &dx) - rv)
            .collect();
        self.schur.as_ref().expect("schur factor").solve(&mut dy);
        for (col, yi) in self.hinv_at.iter().zip(&dy) {
            for (d, c) in dx.iter_mut().zip(col) {
                *d -= c * yi;
            }
        }
        (dx, dy)
    }

    /// Solves the full KKT system for `(dx, dy, dz)` with iterative refinement.
    fn solve(&self, rx: &[f64], ry: &[f64], rz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let prob = self.prob;
        let (mut dx, mut dy, mut dz) = self.solve_once(rx, ry, rz);
        let scale = 1.0 + norm(rx).max(norm(ry)).max(norm(rz));
        let mut last = f64::INFINITY;
        for _ in 0..8 {
            let mut ex = rx.to_vec();
            let mut aty = vec![0.0; prob.n];
            prob.at_mul_add(&dy, &mut aty);
            prob.gt_mul_add(&dz, &mut aty);
            ex.iter_mut().zip(&aty).for_each(|(e, v)| *e -= v);
            let ax = prob.a_mul(&dx);
            let ey: Vec<f64> = ry.iter().zip(&ax).map(|(r, a)| r - a).collect();
            let gx = prob.g_mul(&dx);
            let mut w2dz = vec![0.0; prob.m];
            self.w2_mul(&dz, &mut w2dz);
            let ez: Vec<f64> = (0..prob.m).map(|i| rz[i] - gx[i] + w2dz[i]).collect();
            let err = norm(&ex).max(norm(&ey)).max(norm(&ez));
            if err <= 1e-15 * scale || err >= 0.5 * last {
                break;
            }
            last = err;
            let (cx, cy, cz) = self.solve_once(&ex, &ey, &ez);
            dx.iter_mut().zip(&cx).for_each(|(d, c)| *d += c);
            dy.iter_mut().zip(&cy).for_each(|(d, c)| *d += c);
            dz.iter_mut().zip(&cz).for_each(|(d, c)| *d += c);
        }
        (dx, dy, dz)
    }

    fn w2_mul(&self, v: &[f64], out: &mut [f64]) {
        for (blk, sc) in self.prob.cones.iter().zip(self.scalings) {
            let r = blk.off..blk.off + blk.dim;
            let mut tmp = vec![0.0; blk.dim];
            sc.mul(&v[r.clone()], &mut tmp);
            sc.mul(&tmp, &mut out[r]);
        }
    }

    fn solve_once(&self, rx: &[f64], ry: &[f64], rz: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let prob = self.prob;
        let mut w2rz = vec![0.0; prob.m];
        self.winv2_mul(rz, &mut w2rz);
        let mut r1 = rx.to_vec();
        prob.gt_mul_add(&w2rz, &mut r1);

        let (dx, dy) = self.solve_reduced(&r1, ry);
        let gdx = prob.g_mul(&dx);
        let diff: Vec<f64> = gdx.iter().zip(rz).map(|(g, r)| g - r).collect();
        let mut dz = vec![0.0; prob.m];
        self.winv2_mul(&diff, &mut dz);
        (dx, dy, dz)
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

fn shift_into_cone(prob: &Problem, v: &mut [f64]) {
    let mut alpha = f64::NEG_INFINITY;
    for blk in &prob.cones {
        let u = &v[blk.off..blk.off + blk.dim];
        let n1 = norm(&u[1..]);
        alpha = alpha.max(n1 - u[0]);
    }
    if alpha >= 0.0 || prob.cones.is_empty() {
        for blk in &prob.cones {
            v[blk.off] += 1.0 + alpha.max(0.0);
        }
    }
}

fn cone_step(prob: &Problem, u: &[f64], d: &[f64]) -> f64 {
    prob.cones
        .iter()
        .map(|blk| {
            let r = blk.off..blk.off + blk.dim;
            max_step(&u[r.clone()], &d[r])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Solves `p` with the homogeneous self-dual interior-point method.
pub fn solve(p: &SocpProblem, settings: &IpmSettings) -> Result<SocpSolution> {
    p.validate()?;
    let prob = Problem::from_socp(p);
    let n = prob.n;
    let m = prob.m;
    let degree = prob.cones.len() as f64;

    let identity: Vec<NtScaling> = prob.cones.iter().map(|b| NtScaling::identity(b.dim)).collect();
    let kkt = KktSolver::new(&prob, &identity);
    let mut it = match kkt {
        Some(kkt) => {
            let (x, _, zp) = kkt.solve(&vec![0.0; n], &prob.b, &prob.h);
            let mut s: Vec<f64> = zp.iter().map(|v| -v).collect();
            shift_into_cone(&prob, &mut s);
            let negc: Vec<f64> = prob.c.iter().map(|v| -v).collect();
            let (_, y, mut z) = kkt.solve(&negc, &vec![0.0; prob.p], &vec![0.0; m]);
            shift_into_cone(&prob, &mut z);
            Iterate { x, y, z, s, tau: 1.0, kappa: 1.0 }
        }
        None => {
            let mut s = vec![0.0; m];
            let mut z = vec![0.0; m];
            shift_into_cone(&prob, &mut s);
            shift_into_cone(&prob, &mut z);
            Iterate { x: vec![0.0; n], y: vec![0.0; prob.p], z, s, tau: 1.0, kappa: 1.0 }
        }
    };

    let bnorm = norm(&prob.b).max(norm(&prob.h)).max(1.0);
    let cnorm = norm(&prob.c).max(1.0);
    let mut status = SocpStatus::MaxIterations;
    let mut infeasibility = None;
    let mut iterations = 0;

    for iter in 0..settings.max_iter {
        iterations = iter;
        // Residuals of the homogeneous embedding.
        let mut f1 = prob.c.iter().map(|c| c * it.tau).collect::<Vec<_>>();
        prob.at_mul_add(&it.y, &mut f1);
        prob.gt_mul_add(&it.z, &mut f1);
        let ax = prob.a_mul(&it.x);
        let f2: Vec<f64> = prob.b.iter().zip(&ax).map(|(b, a)| b * it.tau - a).collect();
        let gx = prob.g_mul(&it.x);
        let f3: Vec<f64> = (0..m).map(|i| prob.h[i] * it.tau - gx[i] - it.s[i]).collect();
        let cx = dot(&prob.c, &it.x);
        let by = dot(&prob.b, &it.y);
        let hz = dot(&prob.h, &it.z);
        let f4 = -cx - by - hz - it.kappa;
        let sz = dot(&it.s, &it.z);
        let mu = (sz + it.tau * it.kappa) / (degree + 1.0);

        let pres = norm(&f2).max(norm(&f3)) / it.tau / bnorm;
        let dres = norm(&f1) / it.tau / cnorm;
        let pcost = cx / it.tau;
        let gap = sz / (it.tau * it.tau);
        log::trace!(
            "ipm {iter:3}: pres {pres:.2e} dres {dres:.2e} gap {gap:.2e} pcost {pcost:.6e} tau {:.2e} kappa {:.2e}",
            it.tau,
            it.kappa
        );
        if pres < settings.tol
            && dres < settings.tol
            && gap < settings.tol * (1.0 + pcost.abs())
            && prob.violation(&it.x, it.tau) <= settings.tol
        {
            status = SocpStatus::Optimal;
            break;
        }
        // Certificates.
        if by + hz < 0.0 {
            let mut atygtz = vec![0.0; n];
            prob.at_mul_add(&it.y, &mut atygtz);
            prob.gt_mul_add(&it.z, &mut atygtz);
            if norm(&atygtz) <= settings.infeasibility_tol * -(by + hz) {
                status = SocpStatus::Infeasible;
                infeasibility = Some(Infeasibility::Primal);
                break;
            }
        }
        if cx < 0.0 {
            let gxs: Vec<f64> = gx.iter().zip(&it.s).map(|(g, s)| g + s).collect();
            let r = norm(&ax).max(norm(&gxs));
            if r <= settings.infeasibility_tol * -cx {
                status = SocpStatus::Infeasible;
                infeasibility = Some(Infeasibility::Dual);
                break;
            }
        }

        let scalings: Option<Vec<NtScaling>> = prob
            .cones
            .iter()
            .map(|b| {
                let r = b.off..b.off + b.dim;
                nt_scaling(&it.s[r.clone()], &it.z[r])
            })
            .collect();
        let Some(scalings) = scalings else { break };
        let Some(kkt) = KktSolver::new(&prob, &scalings) else { break };

        // λ = W z
        let mut lambda = vec![0.0; m];
        for (blk, sc) in prob.cones.iter().zip(&scalings) {
            let r = blk.off..blk.off + blk.dim;
            sc.mul(&it.z[r.clone()], &mut lambda[r]);
        }

        let negc: Vec<f64> = prob.c.iter().map(|v| -v).collect();
        let (u1x, u1y, u1z) = kkt.solve(&negc, &prob.b, &prob.h);
        let denom_base = dot(&prob.c, &u1x) + dot(&prob.b, &u1y) + dot(&prob.h, &u1z);

        let direction = |sigma: f64, xi: &[f64], xi_tau: f64| -> Direction {
            let keep = 1.0 - sigma;
            // W (λ \ ξ)
            let mut wlx = vec![0.0; m];
            for (blk, sc) in prob.cones.iter().zip(&scalings) {
                let r = blk.off..blk.off + blk.dim;
                let mut tmp = vec![0.0; blk.dim];
                inv_circ(&lambda[r.clone()], &xi[r.clone()], &mut tmp);
                sc.mul(&tmp, &mut wlx[r]);
            }
            let rx: Vec<f64> = f1.iter().map(|v| -keep * v).collect();
            let ry: Vec<f64> = f2.iter().map(|v| keep * v).collect();
            let rz: Vec<f64> = f3.iter().zip(&wlx).map(|(f, w)| keep * f - w).collect();
            let (u2x, u2y, u2z) = kkt.solve(&rx, &ry, &rz);
            let num = -keep * f4
                + dot(&prob.c, &u2x)
                + dot(&prob.b, &u2y)
                + dot(&prob.h, &u2z)
                + xi_tau / it.tau;
            let den = it.kappa / it.tau - denom_base;
            let dtau = num / den;
            let dx: Vec<f64> = u2x.iter().zip(&u1x).map(|(a, b)| a + dtau * b).collect();
            let dy: Vec<f64> = u2y.iter().zip(&u1y).map(|(a, b)| a + dtau * b).collect();
            let dz: Vec<f64> = u2z.iter().zip(&u1z).map(|(a, b)| a + dtau * b).collect();
            // Δs = W(λ\ξ) − W² Δz
            let mut ds = wlx;
            for (blk, sc) in prob.cones.iter().zip(&scalings) {
                let r = blk.off..blk.off + blk.dim;
                let mut t1 = vec![0.0; blk.dim];
                let mut t2 = vec![0.0; blk.dim];
                sc.mul(&dz[r.clone()], &mut t1);
                sc.mul(&t1, &mut t2);
                for (d, t) in ds[r].iter_mut().zip(&t2) {
                    *d -= t;
                }
            }
            let dkappa = (xi_tau - it.kappa * dtau) / it.tau;
            Direction { dx, dy, dz, ds, dtau, dkappa }
        };

        let step_len = |d: &Direction| -> f64 {
            let mut a = cone_step(&prob, &it.s, &d.ds).min(cone_step(&prob, &it.z, &d.dz));
            if d.dtau < 0.0 {
                a = a.min(-it.tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-it.kappa / d.dkappa);
            }
            a
        };

        // Predictor.
        let mut xi_aff = vec![0.0; m];
        for blk in &prob.cones {
            let r = blk.off..blk.off + blk.dim;
            circ(&lambda[r.clone()], &lambda[r.clone()], &mut xi_aff[r]);
        }
        xi_aff.iter_mut().for_each(|v| *v = -*v);
        let aff = direction(0.0, &xi_aff, -it.tau * it.kappa);
        let alpha_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let mut xi = vec![0.0; m];
        for (blk, sc) in prob.cones.iter().zip(&scalings) {
            let r = blk.off..blk.off + blk.dim;
            let mut ll = vec![0.0; blk.dim];
            circ(&lambda[r.clone()], &lambda[r.clone()], &mut ll);
            let mut a = vec![0.0; blk.dim];
            let mut b = vec![0.0; blk.dim];
            sc.inv_mul(&aff.ds[r.clone()], &mut a);
            sc.mul(&aff.dz[r.clone()], &mut b);
            let mut ab = vec![0.0; blk.dim];
            circ(&a, &b, &mut ab);
            for i in 0..blk.dim {
                xi[blk.off + i] = -ll[i] - ab[i] + if i == 0 { sigma * mu } else { 0.0 };
            }
        }
        let xi_tau = -it.tau * it.kappa + sigma * mu - aff.dtau * aff.dkappa;
        let dir = direction(sigma, &xi, xi_tau);
        let alpha = (settings.step_fraction * step_len(&dir)).min(1.0);
        if !(alpha > 1e-12) || !alpha.is_finite() {
            break;
        }
        for (v, d) in it.x.iter_mut().zip(&dir.dx) {
            *v += alpha * d;
        }
        for (v, d) in it.y.iter_mut().zip(&dir.dy) {
            *v += alpha * d;
        }
        for (v, d) in it.z.iter_mut().zip(&dir.dz) {
            *v += alpha * d;
        }
        for (v, d) in it.s.iter_mut().zip(&dir.ds) {
            *v += alpha * d;
        }
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
        iterations = iter + 1;
    }

    let x: Vec<f64> = if status == SocpStatus::Infeasible {
        it.x.clone()
    } else {
        it.x.iter().map(|v| v / it.tau).collect()
    };
    let objective_value = p.objective_at(&x);
    let max_violation = normalized_violation(p, &x);
    Ok(SocpSolution {
        x,
        status,
        infeasibility,
        objective_value,
        max_violation,
        iterations,
    })
}

/// Constraint violation with every cone's coefficient rows normalised to unit norm.
pub(crate) fn normalized_violation(p: &SocpProblem, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for cone in &p.cone_constraints {
        let scale = std::iter::once(&cone.c)
            .chain(cone.a_rows.iter())
            .map(row_norm)
            .fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let t = row_dot(&cone.c, x) + cone.d;
        let nrm = cone
            .a_rows
            .iter()
            .zip(&cone.b)
            .map(|(r, b)| (row_dot(r, x) + b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max((nrm - t) / scale);
    }
    for eq in &p.linear_eqs {
        let s = row_norm(&eq.a);
        let s = if s > 0.0 { s } else { 1.0 };
        worst = worst.max((row_dot(&eq.a, x) - eq.rhs).abs() / s);
    }
    worst
}
