//! Outer maps ψ: ℝⁿ → ℝ with closed-form partials to order 3.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Truncated Taylor series `c0 + c1 ε + c2 ε² + c3 ε³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor3(pub [f64; 4]);

impl Taylor3 {
    pub fn constant(c: f64) -> Self {
        Taylor3([c, 0.0, 0.0, 0.0])
    }

    pub fn var(x: f64) -> Self {
        Taylor3([x, 1.0, 0.0, 0.0])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn add(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Taylor3([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }

    pub fn neg(self) -> Self {
        let a = self.0;
        Taylor3([-a[0], -a[1], -a[2], -a[3]])
    }

    pub fn mul(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Taylor3([
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[1] * b[1] + a[2] * b[0],
            a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0],
        ])
    }

    pub fn recip(self) -> Self {
        let a = self.0;
        let b0 = 1.0 / a[0];
        let b1 = -b0 * (a[1] * b0);
        let b2 = -b0 * (a[1] * b1 + a[2] * b0);
        let b3 = -b0 * (a[1] * b2 + a[2] * b1 + a[3] * b0);
        Taylor3([b0, b1, b2, b3])
    }

    /// Compose a scalar function with derivatives `f[0..4]` at `self.0[0]`.
    pub fn lift(self, f: [f64; 4]) -> Self {
        let a = self.0;
        Taylor3([
            f[0],
            f[1] * a[1],
            f[1] * a[2] + 0.5 * f[2] * a[1] * a[1],
            f[1] * a[3] + f[2] * a[1] * a[2] + f[3] / 6.0 * a[1] * a[1] * a[1],
        ])
    }

    pub fn exp(self) -> Self {
        let e = self.0[0].exp();
        self.lift([e; 4])
    }

    /// Derivatives `f^(k)` rather than Taylor coefficients.
    pub fn derivatives(self) -> [f64; 4] {
        let a = self.0;
        [a[0], a[1], 2.0 * a[2], 6.0 * a[3]]
    }
}

/// `exp(−1/z)` for z > 0, zero otherwise.
fn smooth_edge(z: Taylor3) -> Taylor3 {
    if z.0[0] <= 1.0 / 700.0 {
        Taylor3::zero()
    } else {
        z.recip().neg().exp()
    }
}

/// Smooth step on [0, 1] with all derivatives vanishing at both ends.
pub fn smooth_step(z: f64) -> [f64; 4] {
    if z <= 0.0 {
        return [0.0; 4];
    }
    if z >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let zt = Taylor3::var(z);
    let a = smooth_edge(zt);
    let b = smooth_edge(Taylor3::constant(1.0).add(zt.neg()));
    a.mul(a.add(b).recip()).derivatives()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "kebab-case")]
pub enum OuterMap {
    /// `Σ c_k y^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `exp(scale·y)`.
    Exp { scale: f64 },
    Tanh,
    /// 1 for |y| ≤ r0, 0 for |y| ≥ r1, smooth in between.
    BumpChi { r0: f64, r1: f64 },
    /// `Σ c_i y_i`.
    Linear { coeffs: Vec<f64> },
    /// `y0·y1`.
    Mul2,
    /// `y_index / Σ y`.
    Ratio { index: usize },
}

/// Value and partial derivatives; `d2[i*n+j]`, `d3[(i*n+j)*n+k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterJet {
    pub n: usize,
    pub v: f64,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl OuterJet {
    fn zeros(n: usize) -> Self {
        Self { n, v: 0.0, d1: vec![0.0; n], d2: vec![0.0; n * n], d3: vec![0.0; n * n * n] }
    }

    fn scalar(f: [f64; 4]) -> Self {
        Self { n: 1, v: f[0], d1: vec![f[1]], d2: vec![f[2]], d3: vec![f[3]] }
    }

    /// Partial derivative for a multi-index of length 0..=3.
    pub fn partial(&self, idx: &[usize]) -> f64 {
        let n = self.n;
        match idx {
            [] => self.v,
            [i] => self.d1[*i],
            [i, j] => self.d2[i * n + j],
            [i, j, k] => self.d3[(i * n + j) * n + k],
            _ => 0.0,
        }
    }
}

impl OuterMap {
    pub fn name(&self) -> &'static str {
        match self {
            OuterMap::Polynomial { .. } => "polynomial",
            OuterMap::Exp { .. } => "exp",
            OuterMap::Tanh => "tanh",
            OuterMap::BumpChi { .. } => "bump-chi",
            OuterMap::Linear { .. } => "linear",
            OuterMap::Mul2 => "mul2",
            OuterMap::Ratio { .. } => "ratio",
        }
    }

    /// Required number of arguments, if fixed.
    pub fn arity(&self) -> Option<usize> {
        match self {
            OuterMap::Polynomial { .. } | OuterMap::Exp { .. } | OuterMap::Tanh | OuterMap::BumpChi { .. } => Some(1),
            OuterMap::Linear { coeffs } => Some(coeffs.len()),
            OuterMap::Mul2 => Some(2),
            OuterMap::Ratio { .. } => None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(a) = self.arity() {
            if a != n {
                return Err(LabError::InvalidInput(format!(
                    "outer map {} takes {a} arguments, got {n}",
                    self.name()
                )));
            }
        }
        match self {
            OuterMap::BumpChi { r0, r1 } if !(*r0 >= 0.0 && r1 > r0) => {
                Err(LabError::InvalidInput("bump-chi needs 0 <= r0 < r1".into()))
            }
            OuterMap::Ratio { index } if *index >= n || n == 0 => {
                Err(LabError::InvalidInput("ratio index out of range".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.jet(y).v
    }

    pub fn jet(&self, y: &[f64]) -> OuterJet {
        let n = y.len();
        match self {
            OuterMap::Polynomial { coeffs } => {
                let x = y[0];
                let mut f = [0.0; 4];
                for (k, &c) in coeffs.iter().enumerate() {
                    for (d, slot) in f.iter_mut().enumerate() {
                        if k >= d {
                            let fall: f64 = (0..d).map(|j| (k - j) as f64).product();
                            *slot += c * fall * x.powi((k - d) as i32);
                        }
                    }
                }
                OuterJet::scalar(f)
            }
            OuterMap::Exp { scale } => {
                let e = (scale * y[0]).exp();
                OuterJet::scalar([e, scale * e, scale * scale * e, scale * scale * scale * e])
            }
            OuterMap::Tanh => {
                let t = y[0].tanh();
                let s = 1.0 - t * t;
                OuterJet::scalar([t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)])
            }
            OuterMap::BumpChi { r0, r1 } => {
                let a = y[0].abs();
                if a <= *r0 {
                    return OuterJet::scalar([1.0, 0.0, 0.0, 0.0]);
                }
                if a >= *r1 {
                    return OuterJet::scalar([0.0; 4]);
                }
                let w = r1 - r0;
                let s = smooth_step((r1 - a) / w);
                let a1 = -y[0].signum() / w;
                OuterJet::scalar([s[0], s[1] * a1, s[2] * a1 * a1, s[3] * a1 * a1 * a1])
            }
            OuterMap::Linear { coeffs } => {
                let mut j = OuterJet::zeros(n);
                j.v = coeffs.iter().zip(y).map(|(c, x)| c * x).sum();
                j.d1.copy_from_slice(coeffs);
                j
            }
            OuterMap::Mul2 => {
                let mut j = OuterJet::zeros(2);
                j.v = y[0] * y[1];
                j.d1 = vec![y[1], y[0]];
                j.d2 = vec![0.0, 1.0, 1.0, 0.0];
                j
            }
            OuterMap::Ratio { index } => {
                let i = *index;
                let s: f64 = y.iter().sum();
                let yi = y[i];
                let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
                let d = |a: usize| if a == i { 1.0 } else { 0.0 };
                let mut j = OuterJet::zeros(n);
                j.v = yi / s;
                for a in 0..n {
                    j.d1[a] = d(a) / s - yi / s2;
                    for b in 0..n {
                        j.d2[a * n + b] = -(d(a) + d(b)) / s2 + 2.0 * yi / s3;
                        for c in 0..n {
                            j.d3[(a * n + b) * n + c] =
                                2.0 * (d(a) + d(b) + d(c)) / s3 - 6.0 * yi / s4;
                        }
                    }
                }
                j
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(m: &OuterMap, y: &[f64]) {
        let n = y.len();
        let h = 1e-5;
        let j = m.jet(y);
        for a in 0..n {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[a] += h;
            ym[a] -= h;
            let (jp, jm) = (m.jet(&yp), m.jet(&ym));
            let fd1 = (jp.v - jm.v) / (2.0 * h);
            assert!((fd1 - j.d1[a]).abs() < 1e-6 * (1.0 + j.d1[a].abs()), "{m:?} d1");
            for b in 0..n {
                let fd2 = (jp.d1[b] - jm.d1[b]) / (2.0 * h);
                assert!((fd2 - j.d2[a * n + b]).abs() < 1e-5 * (1.0 + fd2.abs()), "{m:?} d2");
                for c in 0..n {
                    let fd3 = (jp.d2[b * n + c] - jm.d2[b * n + c]) / (2.0 * h);
                    let an = j.d3[(a * n + b) * n + c];
                    assert!((fd3 - an).abs() < 1e-4 * (1.0 + fd3.abs()), "{m:?} d3 {fd3} {an}");
                }
            }
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        fd_check(&OuterMap::Polynomial { coeffs: vec![0.5, -1.0, 2.0, 0.3, 0.1] }, &[0.7]);
        fd_check(&OuterMap::Exp { scale: -1.3 }, &[0.4]);
        fd_check(&OuterMap::Tanh, &[0.35]);
        fd_check(&OuterMap::BumpChi { r0: 1.0, r1: 2.0 }, &[1.4]);
        fd_check(&OuterMap::BumpChi { r0: 1.0, r1: 2.0 }, &[-1.7]);
        fd_check(&OuterMap::Linear { coeffs: vec![1.0, -2.0, 0.5] }, &[0.1, 0.2, 0.3]);
        fd_check(&OuterMap::Mul2, &[0.3, -1.1]);
        fd_check(&OuterMap::Ratio { index: 1 }, &[0.6, 0.9, 0.4]);
    }

    #[test]
    fn bump_chi_plateaus_are_exact() {
        let m = OuterMap::BumpChi { r0: 0.5, r1: 1.0 };
        let j = m.jet(&[0.3]);
        assert_eq!((j.v, j.d1[0], j.d2[0], j.d3[0]), (1.0, 0.0, 0.0, 0.0));
        let j = m.jet(&[-1.2]);
        assert_eq!((j.v, j.d1[0], j.d2[0], j.d3[0]), (0.0, 0.0, 0.0, 0.0));
        for k in 0..=200 {
            let v = m.value(&[k as f64 / 100.0]);
            assert!((0.0..=1.0).contains(&v));
        }
        let s = smooth_step(0.5);
        assert!((s[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(OuterMap::Exp { scale: 1.0 }.validate(2).is_err());
        assert!(OuterMap::BumpChi { r0: 2.0, r1: 1.0 }.validate(1).is_err());
        assert!(OuterMap::Ratio { index: 3 }.validate(2).is_err());
        assert!(OuterMap::Ratio { index: 1 }.validate(2).is_ok());
    }
}
