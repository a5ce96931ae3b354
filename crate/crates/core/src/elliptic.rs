//! Conservative finite differences for `-div(A ∇u)` with homogeneous Dirichlet
//! data on an interval or a rectangle, shifted solves and the principal
//! eigenpair.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Uniform mesh of interior nodes. Node `i` on an axis sits at `(i + 1) h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    extent: Vec<f64>,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
}

impl Mesh {
    pub fn interval(extent: f64, n: usize) -> Result<Self> {
        Self::new(&[extent], &[n])
    }

    pub fn rectangle(extent_x: f64, extent_y: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new(&[extent_x, extent_y], &[nx, ny])
    }

    /// Interval mesh with spacing `h`; `extent / h - 1` must be an integer.
    pub fn interval_with_spacing(extent: f64, h: f64) -> Result<Self> {
        let cells = (extent / h).round();
        if !(cells >= 4.0) || ((cells * h - extent) / extent).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "spacing {h} does not divide the extent {extent} into at least 4 cells"
            )));
        }
        Self::interval(extent, cells as usize - 1)
    }

    fn new(extent: &[f64], nodes: &[usize]) -> Result<Self> {
        for (&e, &n) in extent.iter().zip(nodes) {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Invalid(format!("extent {e} must be positive")));
            }
            if n < 3 {
                return Err(Error::Invalid(format!(
                    "need at least 3 interior nodes per axis, got {n}"
                )));
            }
        }
        let spacing = extent
            .iter()
            .zip(nodes)
            .map(|(&e, &n)| e / (n + 1) as f64)
            .collect();
        Ok(Self {
            extent: extent.to_vec(),
            nodes: nodes.to_vec(),
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element `Π h`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Coordinates of node `idx` (x fastest).
    pub fn coordinates(&self, idx: usize) -> Vec<f64> {
        let mut rest = idx;
        self.nodes
            .iter()
            .zip(&self.spacing)
            .map(|(&n, &h)| {
                let i = rest % n;
                rest /= n;
                (i + 1) as f64 * h
            })
            .collect()
    }

    /// Samples `f` at every interior node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.coordinates(i))).collect()
    }

    /// Discrete integral `Σ v_i Π h`.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        v.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Coefficients at cell midpoints. In 2D, `per_axis[0]` holds the x-faces
/// (`(nx+1)·ny` values, x fastest) and `per_axis[1]` the y-faces (`nx·(ny+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    per_axis: Vec<Vec<f64>>,
    nu: f64,
}

impl CoefficientField {
    pub fn constant(mesh: &Mesh, value: f64) -> Result<Self> {
        Self::from_fn(mesh, |_| value)
    }

    /// Samples a scalar coefficient at the face midpoints of every axis.
    pub fn from_fn(mesh: &Mesh, a: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = mesh.nodes_per_axis();
        let h = mesh.spacing();
        let per_axis = match mesh.dim() {
            1 => vec![(0..=n[0]).map(|i| a(&[(i as f64 + 0.5) * h[0]])).collect()],
            _ => {
                let mut ax = Vec::with_capacity((n[0] + 1) * n[1]);
                for j in 0..n[1] {
                    for i in 0..=n[0] {
                        ax.push(a(&[(i as f64 + 0.5) * h[0], (j + 1) as f64 * h[1]]));
                    }
                }
                let mut ay = Vec::with_capacity(n[0] * (n[1] + 1));
                for j in 0..=n[1] {
                    for i in 0..n[0] {
                        ay.push(a(&[(i + 1) as f64 * h[0], (j as f64 + 0.5) * h[1]]));
                    }
                }
                vec![ax, ay]
            }
        };
        Self::from_faces(mesh, per_axis)
    }

    /// Face values given directly, laid out as described on the type.
    pub fn from_faces(mesh: &Mesh, per_axis: Vec<Vec<f64>>) -> Result<Self> {
        let n = mesh.nodes_per_axis();
        let expected: Vec<usize> = match mesh.dim() {
            1 => vec![n[0] + 1],
            _ => vec![(n[0] + 1) * n[1], n[0] * (n[1] + 1)],
        };
        if per_axis.len() != expected.len() {
            return Err(Error::LengthMismatch {
                expected: expected.len(),
                got: per_axis.len(),
            });
        }
        for (v, &e) in per_axis.iter().zip(&expected) {
            if v.len() != e {
                return Err(Error::LengthMismatch {
                    expected: e,
                    got: v.len(),
                });
            }
        }
        let nu = per_axis
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(nu > 0.0) || per_axis.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "coefficients must be positive and finite (minimum {nu})"
            )));
        }
        Ok(Self { per_axis, nu })
    }

    /// Ellipticity constant: the smallest face value.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn faces(&self) -> &[Vec<f64>] {
        &self.per_axis
    }
}

/// Assembled symmetric M-matrix `L_h` in compressed-row form.
#[derive(Debug)]
pub struct EllipticOperator {
    mesh: Mesh,
    nu: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    eigen: OnceLock<Result<(f64, Vec<f64>)>>,
}

impl Clone for EllipticOperator {
    fn clone(&self) -> Self {
        let eigen = OnceLock::new();
        if let Some(v) = self.eigen.get() {
            let _ = eigen.set(v.clone());
        }
        Self {
            mesh: self.mesh.clone(),
            nu: self.nu,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.clone(),
            diag: self.diag.clone(),
            eigen,
        }
    }
}

/// Relative residual target for the conjugate-gradient solves.
pub const CG_TOLERANCE: f64 = 1e-12;
const EIGEN_MAX_ITERATIONS: usize = 10_000;
const EIGEN_TOLERANCE: f64 = 1e-12;

impl EllipticOperator {
    /// Conservative assembly: `(L_h u)_i = Σ_axis (a_+ (u_i - u_+) + a_- (u_i - u_-)) / h²`
    /// with zero ghost values outside the mesh.
    pub fn assemble(mesh: &Mesh, coeff: &CoefficientField) -> Result<Self> {
        // Validates shapes.
        let coeff = CoefficientField::from_faces(mesh, coeff.per_axis.clone())?;
        let n = mesh.nodes_per_axis();
        let h = mesh.spacing();
        let len = mesh.len();
        let mut row_ptr = Vec::with_capacity(len + 1);
        let mut cols = Vec::with_capacity(5 * len);
        let mut vals = Vec::with_capacity(5 * len);
        let mut diag = vec![0.0; len];
        row_ptr.push(0);
        for idx in 0..len {
            // (column, value) for the row, diagonal accumulated separately
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
            let mut d = 0.0;
            if mesh.dim() == 1 {
                let i = idx;
                let a = &coeff.per_axis[0];
                let inv_h2 = 1.0 / (h[0] * h[0]);
                let (am, ap) = (a[i] * inv_h2, a[i + 1] * inv_h2);
                d += am + ap;
                if i > 0 {
                    row.push((i - 1, -am));
                }
                if i + 1 < n[0] {
                    row.push((i + 1, -ap));
                }
            } else {
                let (i, j) = (idx % n[0], idx / n[0]);
                let (ax, ay) = (&coeff.per_axis[0], &coeff.per_axis[1]);
                let (ihx, ihy) = (1.0 / (h[0] * h[0]), 1.0 / (h[1] * h[1]));
                let west = ax[j * (n[0] + 1) + i] * ihx;
                let east = ax[j * (n[0] + 1) + i + 1] * ihx;
                let south = ay[j * n[0] + i] * ihy;
                let north = ay[(j + 1) * n[0] + i] * ihy;
                d += west + east + south + north;
                if j > 0 {
                    row.push((idx - n[0], -south));
                }
                if i > 0 {
                    row.push((idx - 1, -west));
                }
                if i + 1 < n[0] {
                    row.push((idx + 1, -east));
                }
                if j + 1 < n[1] {
                    row.push((idx + n[0], -north));
                }
            }
            row.push((idx, d));
            row.sort_by_key(|e| e.0);
            diag[idx] = d;
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            mesh: mesh.clone(),
            nu: coeff.nu,
            row_ptr,
            cols,
            vals,
            diag,
            eigen: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Nonzero entries `(row, col, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    /// `L_h u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u.len())?;
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * u[self.cols[k]];
            }
            *o = acc;
        }
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    /// Solves `(σ I + L_h) x = rhs`.
    pub fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Invalid(format!("shift {sigma} must be ≥ 0")));
        }
        self.solve_with_diagonal_shift(&vec![sigma; self.len()], rhs)
    }

    /// Solves `(diag(shift) + L_h) x = rhs`. In 1D the tridiagonal elimination
    /// reports a nonpositive pivot as [`Error::StepSize`]; in 2D the
    /// conjugate-gradient iteration reports loss of definiteness as
    /// [`Error::SolverBreakdown`].
    pub fn solve_with_diagonal_shift(&self, shift: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(shift.len())?;
        self.check_len(rhs.len())?;
        if self.mesh.dim() == 1 {
            self.thomas(shift, rhs)
        } else {
            self.conjugate_gradient(shift, rhs)
        }
    }

    fn thomas(&self, shift: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        // Off-diagonal (i, i+1) is the second stored entry of row i when i > 0.
        let upper = |i: usize| -> f64 {
            let start = self.row_ptr[i];
            let end = self.row_ptr[i + 1];
            (start..end)
                .find(|&k| self.cols[k] == i + 1)
                .map_or(0.0, |k| self.vals[k])
        };
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let lower = prev_upper; // symmetric
            let pivot = self.diag[i] + shift[i] - if i > 0 { lower * c_prime[i - 1] } else { 0.0 };
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::StepSize { pivot });
            }
            let up = if i + 1 < n { upper(i) } else { 0.0 };
            c_prime[i] = up / pivot;
            d_prime[i] = (rhs[i] - if i > 0 { lower * d_prime[i - 1] } else { 0.0 }) / pivot;
            prev_upper = up;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d_prime[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d_prime[i] - c_prime[i] * x[i + 1];
        }
        Ok(x)
    }

    fn conjugate_gradient(&self, shift: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let precond: Vec<f64> = self
            .diag
            .iter()
            .zip(shift)
            .map(|(d, s)| {
                let v = d + s;
                if v > 0.0 {
                    1.0 / v
                } else {
                    1.0
                }
            })
            .collect();
        let rhs_norm = norm(rhs);
        let mut x = vec![0.0; n];
        if rhs_norm == 0.0 {
            return Ok(x);
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&precond).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        let max_iter = 20 * n + 100;
        for it in 0..max_iter {
            self.apply_into(&p, &mut ap);
            for i in 0..n {
                ap[i] += shift[i] * p[i];
            }
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::SolverBreakdown {
                    iterations: it,
                    residual: norm(&r) / rhs_norm,
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let res = norm(&r) / rhs_norm;
            if res <= CG_TOLERANCE {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * precond[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::SolverBreakdown {
            iterations: max_iter,
            residual: norm(&r) / rhs_norm,
        })
    }

    /// Smallest eigenvalue `λ*` and its eigenvector `ψ ≥ 0` with
    /// `Σ ψ_i Π h = 1`, by inverse power iteration. Cached after the first call.
    pub fn principal_eigenpair(&self) -> Result<(f64, &[f64])> {
        match self.eigen.get_or_init(|| self.compute_eigenpair()) {
            Ok((lambda, psi)) => Ok((*lambda, psi.as_slice())),
            Err(e) => Err(e.clone()),
        }
    }

    fn compute_eigenpair(&self) -> Result<(f64, Vec<f64>)> {
        let n = self.len();
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut lx = vec![0.0; n];
        self.apply_into(&x, &mut lx);
        let mut rq = dot(&x, &lx);
        for _ in 0..EIGEN_MAX_ITERATIONS {
            let mut y = self.solve_shifted(0.0, &x)?;
            let ny = norm(&y);
            y.iter_mut().for_each(|v| *v /= ny);
            self.apply_into(&y, &mut lx);
            let rq_new = dot(&y, &lx);
            x = y;
            let change = (rq_new - rq).abs();
            rq = rq_new;
            if change <= EIGEN_TOLERANCE * rq.abs().max(1.0) {
                let sign = if x.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                let mass = sign * self.mesh.integrate(&x);
                let psi = x.iter().map(|v| sign * v / mass).collect();
                return Ok((rq, psi));
            }
        }
        Err(Error::NoConvergence {
            what: "inverse power iteration",
            iterations: EIGEN_MAX_ITERATIONS,
        })
    }

    /// `ν · λ1_h`, with `λ1_h` the principal eigenvalue of the unit-coefficient
    /// operator on the same mesh (closed form).
    pub fn rayleigh_lower_bound(&self) -> f64 {
        self.nu * dirichlet_laplacian_lambda1(&self.mesh)
    }
}

/// Principal eigenvalue of the discrete Dirichlet Laplacian:
/// `Σ_axis (4/h²) sin²(π h / (2 · extent))`.
pub fn dirichlet_laplacian_lambda1(mesh: &Mesh) -> f64 {
    mesh.spacing()
        .iter()
        .zip(mesh.extent())
        .map(|(&h, &e)| {
            let s = (PI * h / (2.0 * e)).sin();
            4.0 / (h * h) * s * s
        })
        .sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
