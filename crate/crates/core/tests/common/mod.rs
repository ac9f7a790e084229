#![allow(dead_code)]

use twofloat::TwoFloat;

pub type Dd = TwoFloat;

pub fn dd(x: f64) -> Dd {
    TwoFloat::from(x)
}

/// Extremal right-hand side written out by hand for the polynomial models,
/// `q̇ = F + uG`, `ṗ = −(∂F/∂q)ᵀ p`.
#[derive(Clone, Copy, Debug)]
pub enum Oracle {
    /// `F = (1 + a y − 3c y z + c z³, z, 0)`, `G = e3`.
    Tutorial { a: f64, c: f64 },
    /// `F = (1 + a z² + α₁ x y² + α₂ y z² + α₃ x z², b z, c z − u₀ − u_x x − u_y y)`, `G = e3`.
    Seminf { a: f64, b: f64, c: f64, u0: f64, ux: f64, uy: f64, al: [f64; 3] },
}

impl Oracle {
    pub fn rhs(&self, y: &[Dd; 6], u: f64) -> [Dd; 6] {
        let [x, yy, z, p1, p2, p3] = *y;
        let k = dd;
        match *self {
            Oracle::Tutorial { a, c } => {
                let f1 = k(1.0) + k(a) * yy - k(3.0 * c) * yy * z + k(c) * z * z * z;
                // ∂F1/∂y = a − 3cz, ∂F1/∂z = −3cy + 3cz²
                let d1y = k(a) - k(3.0 * c) * z;
                let d1z = k(3.0 * c) * (z * z - yy);
                [f1, z, k(u), k(0.0), -(p1 * d1y), -(p1 * d1z + p2)]
            }
            Oracle::Seminf { a, b, c, u0, ux, uy, al } => {
                let z2 = z * z;
                let f1 = k(1.0) + k(a) * z2 + k(al[0]) * x * yy * yy + k(al[1]) * yy * z2 + k(al[2]) * x * z2;
                let f3 = k(c) * z - k(u0) - k(ux) * x - k(uy) * yy + k(u);
                let d1x = k(al[0]) * yy * yy + k(al[2]) * z2;
                let d1y = k(2.0 * al[0]) * x * yy + k(al[1]) * z2;
                let d1z = k(2.0) * z * (k(a) + k(al[1]) * yy + k(al[2]) * x);
                [
                    f1,
                    k(b) * z,
                    f3,
                    -(p1 * d1x - p3 * k(ux)),
                    -(p1 * d1y - p3 * k(uy)),
                    -(p1 * d1z + p2 * k(b) + p3 * k(c)),
                ]
            }
        }
    }

    /// Classical RK4 with `n` steps in double-double arithmetic. Divisions go
    /// through exact reciprocals, since `TwoFloat / TwoFloat` is only
    /// f64-accurate for operands without a low part.
    pub fn flow(&self, y0: [f64; 6], u: f64, t: Dd, n: usize) -> [Dd; 6] {
        let h = t * TwoFloat::new_div(1.0, n as f64);
        let mut y: [Dd; 6] = y0.map(dd);
        let add = |y: &[Dd; 6], k: &[Dd; 6], s: Dd| -> [Dd; 6] { std::array::from_fn(|i| y[i] + k[i] * s) };
        let half = h * dd(0.5);
        let sixth = h * TwoFloat::new_div(1.0, 6.0);
        for _ in 0..n {
            let k1 = self.rhs(&y, u);
            let k2 = self.rhs(&add(&y, &k1, half), u);
            let k3 = self.rhs(&add(&y, &k2, half), u);
            let k4 = self.rhs(&add(&y, &k3, h), u);
            y = std::array::from_fn(|i| y[i] + (k1[i] + dd(2.0) * (k2[i] + k3[i]) + k4[i]) * sixth);
        }
        y
    }
}

/// Least-squares slope of `log e` against `log t`.
pub fn loglog_slope(ts: &[f64], es: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Dyadic times `2⁻⁷ … 2⁻¹³`, inside `[1e−4, 1e−2]` and exact in binary.
pub fn dyadic_times() -> Vec<f64> {
    (7..=13).map(|k| 2f64.powi(-k)).collect()
}

/// Central-difference Jacobian `J[i][j] = ∂f_i/∂q_j`.
pub fn fd_jac(f: &dyn Fn(&[f64; 3]) -> [f64; 3], q: &[f64; 3], h: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for j in 0..3 {
        let (mut a, mut b) = (*q, *q);
        a[j] += h;
        b[j] -= h;
        let (fa, fb) = (f(&a), f(&b));
        for i in 0..3 {
            m[i][j] = (fa[i] - fb[i]) / (2.0 * h);
        }
    }
    m
}

/// `(∂X/∂q)Y − (∂Y/∂q)X` from central differences.
pub fn fd_bracket(x: &dyn Fn(&[f64; 3]) -> [f64; 3], y: &dyn Fn(&[f64; 3]) -> [f64; 3], q: &[f64; 3], h: f64) -> [f64; 3] {
    let (jx, jy) = (fd_jac(x, q, h), fd_jac(y, q, h));
    let (xv, yv) = (x(q), y(q));
    std::array::from_fn(|i| (0..3).map(|j| jx[i][j] * yv[j] - jy[i][j] * xv[j]).sum())
}

pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / n.max(floor)
}

/// McKeithan parameters in the order `(α₂, α₃, α₄), (β₂, β₃, β₄), (δ₁, δ₂)`.
pub struct Mck {
    pub al: [f64; 3],
    pub be: [f64; 3],
    pub de: [f64; 2],
}

impl Mck {
    /// Reduced field `(ẋ, ẏ)` of the lifted system.
    pub fn f(&self, q: &[f64; 3]) -> [f64; 3] {
        let [x, y, v] = *q;
        let (d3, d4) = (self.de[0] + self.de[1], self.de[0] * self.de[1]);
        let p = |k: usize| v.powf(self.al[k]);
        let s = x + y;
        [
            -self.be[0] * x * p(0) - self.be[1] * x * p(1) - d3 * v * s + d4 * v + v * s * s,
            self.be[0] * x * p(0) - self.be[2] * y * p(2),
            0.0,
        ]
    }

    /// Closed form of `D″` for the McKeithan system.
    pub fn d_second_closed_form(&self, q: &[f64; 3]) -> f64 {
        let [x, y, v] = *q;
        let [a2, a3, a4] = self.al;
        let [b2, b3, b4] = self.be;
        let (d3, d4) = (self.de[0] + self.de[1], self.de[0] * self.de[1]);
        let tail = d3 * v * (x + y) - d4 * v - v * x * x - 2.0 * v * x * y - v * y * y;
        (b2 * x * v.powf(a2 - 1.0) - b4 * y * v.powf(a4 - 1.0))
            * (a2 * b2 * x * v.powf(a2) + a3 * b3 * x * v.powf(a3) + tail)
            - (a2 * b2 * x * v.powf(a2 - 1.0) - a4 * b4 * y * v.powf(a4 - 1.0))
                * (b2 * x * v.powf(a2) + b3 * x * v.powf(a3) + tail)
    }
}
