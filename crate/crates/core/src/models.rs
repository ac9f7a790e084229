//! Built-in control-affine models in ℝ³.

use serde::{Deserialize, Serialize};

use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::liealg::{ControlAffine, Target};

/// Tutorial semi-bridge model
///
/// ```text
/// ẋ = 1 + a y − 3c y z + c z³
/// ẏ = z
/// ż = u
/// ```
///
/// with target `x = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tutorial {
    pub a: f64,
    pub c: f64,
}

impl Tutorial {
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if a == 0.0 || c == 0.0 || !a.is_finite() || !c.is_finite() {
            return Err(Error::InvalidInput("tutorial model needs finite nonzero a and c".into()));
        }
        Ok(Self { a, c })
    }

    /// `|z|` at which the singular control saturates.
    pub fn z_sat(&self) -> f64 {
        (self.a / (6.0 * self.c)).abs()
    }
}

impl Default for Tutorial {
    fn default() -> Self {
        Self { a: 1.0, c: 1.0 }
    }
}

impl ControlAffine for Tutorial {
    fn drift<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        let [_, y, z] = *q;
        let a = S::from_f64(self.a);
        let c = S::from_f64(self.c);
        [
            S::one() + a * y - S::from_f64(3.0) * c * y * z + c * z * z * z,
            z,
            S::zero(),
        ]
    }

    fn control<S: Scalar>(&self, _q: &[S; 3]) -> [S; 3] {
        [S::zero(), S::zero(), S::one()]
    }

    fn target(&self) -> Target {
        Target::x_level(0.0)
    }

    fn name(&self) -> &str {
        "tutorial"
    }
}

/// Codimension-two semi-normal form
///
/// ```text
/// ẋ = 1 + a z² + α₁ x y² + α₂ y z² + α₃ x z²
/// ẏ = b z
/// ż = c z − u_s(0) − u_sx x − u_sy y + u
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiNormalForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub us0: f64,
    pub usx: f64,
    pub usy: f64,
    pub alpha: [f64; 3],
}

impl Default for SemiNormalForm {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            us0: 3.0,
            usx: 1.0,
            usy: 1.0,
            alpha: [1.0, 1.0, 1.0],
        }
    }
}

impl ControlAffine for SemiNormalForm {
    fn drift<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        let [x, y, z] = *q;
        let k = S::from_f64;
        let z2 = z * z;
        [
            S::one() + k(self.a) * z2 + k(self.alpha[0]) * x * y * y + k(self.alpha[1]) * y * z2
                + k(self.alpha[2]) * x * z2,
            k(self.b) * z,
            k(self.c) * z - k(self.us0) - k(self.usx) * x - k(self.usy) * y,
        ]
    }

    fn control<S: Scalar>(&self, _q: &[S; 3]) -> [S; 3] {
        [S::zero(), S::zero(), S::one()]
    }

    fn target(&self) -> Target {
        Target::x_level(0.0)
    }

    fn name(&self) -> &str {
        "seminf"
    }
}

/// Planar hyperbolic/parabolic unfolding `ẋ = 1 + a y²`, `ẏ = u − u_s(0)`,
/// embedded in ℝ³ with a passive third coordinate so the generic machinery
/// applies. Target `x = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicUnfolding {
    pub a: f64,
    pub us0: f64,
}

impl HyperbolicUnfolding {
    pub fn new(a: f64, us0: f64) -> Result<Self> {
        if a >= 0.0 || us0.abs() >= 1.0 {
            return Err(Error::InvalidInput("unfolding needs a < 0 and |u_s(0)| < 1".into()));
        }
        Ok(Self { a, us0 })
    }

    /// Singular feedback keeping `y ≡ 0`.
    pub fn singular_control(&self) -> f64 {
        self.us0
    }
}

impl ControlAffine for HyperbolicUnfolding {
    fn drift<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        let y = q[1];
        [
            S::one() + S::from_f64(self.a) * y * y,
            S::from_f64(-self.us0),
            S::zero(),
        ]
    }

    fn control<S: Scalar>(&self, _q: &[S; 3]) -> [S; 3] {
        [S::zero(), S::one(), S::zero()]
    }

    fn target(&self) -> Target {
        Target::x_level(0.0)
    }

    fn name(&self) -> &str {
        "unfolding"
    }
}

/// Goh-lifted McKeithan system in `q = (x, y, v)`:
///
/// ```text
/// ẋ = −β₂ x v^α₂ − β₃ x v^α₃ − δ₃ v (x + y) + δ₄ v + v (x + y)²
/// ẏ = β₂ x v^α₂ − β₄ y v^α₄
/// v̇ = u
/// ```
///
/// with `δ₃ = δ₁ + δ₂`, `δ₄ = δ₁ δ₂` and target `x = d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McKeithanSystem {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub delta: [f64; 2],
    pub d: f64,
}

impl McKeithanSystem {
    pub fn new(alpha: [f64; 3], beta: [f64; 3], delta: [f64; 2], d: f64) -> Result<Self> {
        if beta.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::InvalidInput("β_i must be positive".into()));
        }
        if delta.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidInput("δ1, δ2 must be positive".into()));
        }
        if alpha.iter().any(|x| !x.is_finite()) || !d.is_finite() {
            return Err(Error::InvalidInput("α_i and d must be finite".into()));
        }
        Ok(Self { alpha, beta, delta, d })
    }

    pub fn delta3(&self) -> f64 {
        self.delta[0] + self.delta[1]
    }

    pub fn delta4(&self) -> f64 {
        self.delta[0] * self.delta[1]
    }

    fn needs_positive_v(&self) -> bool {
        self.alpha.iter().any(|a| *a < 1.0 || a.fract() != 0.0)
    }
}

impl ControlAffine for McKeithanSystem {
    fn drift<S: Scalar>(&self, q: &[S; 3]) -> [S; 3] {
        let [x, y, v] = *q;
        let k = S::from_f64;
        let [a2, a3, a4] = self.alpha;
        let [b2, b3, b4] = self.beta;
        let s = x + y;
        let v2 = v.powf(a2);
        [
            -k(b2) * x * v2 - k(b3) * x * v.powf(a3) - k(self.delta3()) * v * s
                + k(self.delta4()) * v
                + v * s * s,
            k(b2) * x * v2 - k(b4) * y * v.powf(a4),
            S::zero(),
        ]
    }

    fn control<S: Scalar>(&self, _q: &[S; 3]) -> [S; 3] {
        [S::zero(), S::zero(), S::one()]
    }

    fn target(&self) -> Target {
        Target::x_level(self.d)
    }

    fn name(&self) -> &str {
        "mckeithan"
    }

    fn check_domain(&self, q: &[f64; 3]) -> Result<()> {
        if self.needs_positive_v() && !(q[2] > 0.0) {
            return Err(Error::Domain(format!("v = {} must be positive for the given exponents", q[2])));
        }
        Ok(())
    }
}
