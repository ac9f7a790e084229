//! Mass-action reaction networks: the complex graph, its Laplacian,
//! structural invariants, simulation and the Goh-lifted McKeithan system.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use petgraph::algo::{connected_components, tarjan_scc};
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::ad::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::models::McKeithanSystem;
use crate::ode::{integrate, OdeOptions, Trajectory};

pub const GAS_CONSTANT: f64 = 8.314;

/// Arrhenius rate law `k(T) = A exp(−E / (R T))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateLaw {
    pub a: f64,
    pub e: f64,
    pub r: f64,
}

impl RateLaw {
    pub fn new(a: f64, e: f64, r: f64) -> Result<Self> {
        if !(a > 0.0) || !(r > 0.0) || !(e >= 0.0) || !a.is_finite() || !e.is_finite() {
            return Err(Error::InvalidNetwork(format!(
                "rate law needs A > 0, E ≥ 0, R > 0 (got A = {a}, E = {e}, R = {r})"
            )));
        }
        Ok(Self { a, e, r })
    }

    /// Temperature-independent rate `k`.
    pub fn constant(k: f64) -> Result<Self> {
        Self::new(k, 0.0, GAS_CONSTANT)
    }

    pub fn at(&self, temperature: f64) -> Result<f64> {
        arrhenius(self, temperature)
    }
}

pub fn arrhenius(rate: &RateLaw, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    Ok(rate.a * (-rate.e / (rate.r * temperature)).exp())
}

/// Reaction between complexes, indices 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub source: usize,
    pub target: usize,
    pub rate: RateLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionNetwork {
    species: Vec<String>,
    /// `complexes[j][i]` is the coefficient of species `i` in complex `j`.
    complexes: Vec<Vec<u32>>,
    reactions: Vec<Reaction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deficiency {
    pub n: usize,
    pub l: usize,
    pub s: usize,
    pub delta: i64,
}

impl ReactionNetwork {
    pub fn new(species: Vec<String>, complexes: Vec<Vec<u32>>, reactions: Vec<Reaction>) -> Result<Self> {
        let m = species.len();
        if m == 0 {
            return Err(Error::InvalidNetwork("no species".into()));
        }
        for (j, y) in complexes.iter().enumerate() {
            if y.len() != m {
                return Err(Error::InvalidNetwork(format!(
                    "complex {} has {} entries, expected {m}",
                    j + 1,
                    y.len()
                )));
            }
        }
        let n = complexes.len();
        for (r, re) in reactions.iter().enumerate() {
            if re.source >= n || re.target >= n {
                return Err(Error::InvalidNetwork(format!("reaction {} refers to a missing complex", r + 1)));
            }
            if re.source == re.target {
                return Err(Error::InvalidNetwork(format!("reaction {} has equal source and target", r + 1)));
            }
        }
        Ok(Self {
            species,
            complexes,
            reactions,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn complexes(&self) -> &[Vec<u32>] {
        &self.complexes
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_complexes(&self) -> usize {
        self.complexes.len()
    }

    /// Complex matrix `Y` (species × complexes).
    pub fn complex_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_species(), self.n_complexes(), |i, j| self.complexes[j][i] as f64)
    }

    /// Laplacian `Ã = A − diag(column sums of A)` with `A[target][source] = k`.
    pub fn laplacian(&self, temperature: f64) -> Result<DMatrix<f64>> {
        let n = self.n_complexes();
        let mut a = DMatrix::zeros(n, n);
        for re in &self.reactions {
            let k = re.rate.at(temperature)?;
            a[(re.target, re.source)] += k;
            a[(re.source, re.source)] -= k;
        }
        Ok(a)
    }

    /// `ċ = Y Ã c^Y`.
    pub fn mass_action_rhs(&self, c: &[f64], temperature: f64) -> Result<Vec<f64>> {
        self.check_state(c)?;
        if let Some(i) = c.iter().position(|x| *x < 0.0) {
            return Err(Error::Domain(format!("negative concentration c[{i}] = {}", c[i])));
        }
        let rates = self.rate_constants(temperature)?;
        Ok(self.rhs_generic(c, &rates))
    }

    fn check_state(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.n_species() {
            return Err(Error::InvalidInput(format!(
                "state has {} entries, network has {} species",
                c.len(),
                self.n_species()
            )));
        }
        Ok(())
    }

    fn rate_constants(&self, temperature: f64) -> Result<Vec<f64>> {
        self.reactions.iter().map(|r| r.rate.at(temperature)).collect()
    }

    /// Right-hand side summed reaction by reaction; `rates[r]` belongs to
    /// `reactions[r]`.
    fn rhs_generic<S: Scalar>(&self, c: &[S], rates: &[f64]) -> Vec<S> {
        let m = self.n_species();
        let monomials: Vec<S> = self
            .complexes
            .iter()
            .map(|y| {
                y.iter()
                    .zip(c)
                    .fold(S::one(), |acc, (e, x)| if *e == 0 { acc } else { acc * x.powi(*e as i32) })
            })
            .collect();
        let mut out = vec![S::zero(); m];
        for (re, k) in self.reactions.iter().zip(rates) {
            let flux = S::from_f64(*k) * monomials[re.source];
            for i in 0..m {
                let net = self.complexes[re.target][i] as f64 - self.complexes[re.source][i] as f64;
                if net != 0.0 {
                    out[i] += S::from_f64(net) * flux;
                }
            }
        }
        out
    }

    fn rhs_jacobian(&self, c: &[f64], rates: &[f64]) -> DMatrix<f64> {
        let m = self.n_species();
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..m {
            let cd: Vec<Dual<f64>> = c
                .iter()
                .enumerate()
                .map(|(i, x)| Dual::new(*x, if i == j { 1.0 } else { 0.0 }))
                .collect();
            for (i, v) in self.rhs_generic(&cd, rates).iter().enumerate() {
                jac[(i, j)] = v.d;
            }
        }
        jac
    }

    /// Stoichiometric matrix with one column `y′ − y` per reaction.
    pub fn stoichiometric_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_species(), self.reactions.len(), |i, r| {
            let re = &self.reactions[r];
            self.complexes[re.target][i] as f64 - self.complexes[re.source][i] as f64
        })
    }

    fn graph(&self) -> DiGraph<(), ()> {
        let mut g = DiGraph::new();
        let nodes: Vec<_> = (0..self.n_complexes()).map(|_| g.add_node(())).collect();
        for re in &self.reactions {
            g.add_edge(nodes[re.source], nodes[re.target], ());
        }
        g
    }

    pub fn deficiency(&self) -> Deficiency {
        let n = self.n_complexes();
        let l = connected_components(&self.graph());
        let s = if self.reactions.is_empty() {
            0
        } else {
            self.stoichiometric_matrix().rank(1e-9)
        };
        Deficiency {
            n,
            l,
            s,
            delta: n as i64 - l as i64 - s as i64,
        }
    }

    /// Weak reversibility: every reaction lies inside one strongly connected
    /// component.
    pub fn strongly_connected(&self) -> bool {
        let g = self.graph();
        let mut comp = vec![0usize; self.n_complexes()];
        for (k, scc) in tarjan_scc(&g).iter().enumerate() {
            for node in scc {
                comp[node.index()] = k;
            }
        }
        self.reactions.iter().all(|r| comp[r.source] == comp[r.target])
    }

    /// Basis of the left kernel of the stoichiometric matrix, in reduced
    /// row-echelon form (one row per conservation law).
    pub fn conservation_basis(&self) -> Vec<Vec<f64>> {
        let m = self.n_species();
        if self.reactions.is_empty() {
            return (0..m)
                .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
        }
        let st = self.stoichiometric_matrix();
        let gram = &st * st.transpose();
        let eig = SymmetricEigen::new(gram);
        let scale = eig.eigenvalues.amax().max(1.0);
        let mut rows: Vec<DVector<f64>> = Vec::new();
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            if lam.abs() < 1e-10 * scale {
                rows.push(eig.eigenvectors.column(k).into_owned());
            }
        }
        if rows.is_empty() {
            return Vec::new();
        }
        let mut basis = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
        rref(&mut basis);
        basis
            .row_iter()
            .map(|r| r.iter().map(|x| snap(*x)).collect())
            .collect()
    }

    /// Adaptive simulation of the mass-action dynamics, sampled at
    /// `samples + 1` equally spaced times.
    pub fn simulate(&self, c0: &[f64], temperature: f64, t_end: f64, tol: f64, samples: usize) -> Result<Simulation> {
        self.check_state(c0)?;
        if let Some(i) = c0.iter().position(|x| *x < 0.0) {
            return Err(Error::Domain(format!("negative initial concentration c[{i}] = {}", c0[i])));
        }
        if !(t_end > 0.0) || !(tol > 0.0) {
            return Err(Error::InvalidInput("t_end and tol must be positive".into()));
        }
        let rates = self.rate_constants(temperature)?;
        let opts = OdeOptions::with_tol(tol, tol * 1e-2);
        let sol = integrate(
            |_, c, dc| dc.copy_from_slice(&self.rhs_generic(c, &rates)),
            0.0,
            c0,
            t_end,
            &opts,
            &mut [],
        )?;
        let traj = sol.trajectory;
        let mut times = Vec::with_capacity(samples + 1);
        let mut states = Vec::with_capacity(samples + 1);
        let mut clamped = 0usize;
        for k in 0..=samples {
            let t = t_end * k as f64 / samples.max(1) as f64;
            let mut c = traj.at(t);
            for x in c.iter_mut() {
                if *x < 0.0 {
                    if *x < -tol {
                        warn!("concentration {x:e} below −tol at t = {t}");
                    }
                    *x = 0.0;
                    clamped += 1;
                }
            }
            times.push(t);
            states.push(c);
        }
        if clamped > 0 {
            warn!("clamped {clamped} negative concentrations to zero");
        }
        Ok(Simulation {
            times,
            states,
            trajectory: traj,
        })
    }

    /// Equilibrium of the compatibility class of `c0`: simulate until the
    /// velocity is small, then Newton on the rate equations augmented with
    /// the conservation laws.
    pub fn equilibrium(&self, c0: &[f64], temperature: f64, tol: f64) -> Result<Vec<f64>> {
        let rates = self.rate_constants(temperature)?;
        let laws = self.conservation_basis();
        let totals: Vec<f64> = laws.iter().map(|w| dot(w, c0)).collect();
        let mut c = c0.to_vec();
        let mut horizon = 10.0;
        for _ in 0..12 {
            let sim = self.simulate(&c, temperature, horizon, 1e-10, 1)?;
            c = sim.states.last().cloned().unwrap_or(c);
            let v = self.rhs_generic(&c, &rates);
            if v.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-4 {
                break;
            }
            horizon *= 2.0;
        }
        let m = self.n_species();
        for _ in 0..50 {
            let f = self.rhs_generic(&c, &rates);
            let jac = self.rhs_jacobian(&c, &rates);
            let rows = m + laws.len();
            let mut a = DMatrix::zeros(rows, m);
            let mut b = DVector::zeros(rows);
            for i in 0..m {
                for j in 0..m {
                    a[(i, j)] = jac[(i, j)];
                }
                b[i] = -f[i];
            }
            for (k, w) in laws.iter().enumerate() {
                for j in 0..m {
                    a[(m + k, j)] = w[j];
                }
                b[m + k] = totals[k] - dot(w, &c);
            }
            let svd = a.svd(true, true);
            let step = svd
                .solve(&b, 1e-14)
                .map_err(|e| Error::CannotSolve(format!("equilibrium Newton step: {e}")))?;
            for j in 0..m {
                c[j] = (c[j] + step[j]).max(0.0);
            }
            if step.amax() < tol * 1e-2 {
                break;
            }
        }
        let res = self.rhs_generic(&c, &rates);
        let norm = res.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > tol.max(1e-10) {
            return Err(Error::CannotSolve(format!("equilibrium residual {norm:e}")));
        }
        Ok(c)
    }
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub trajectory: Trajectory,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rounds values within 1e-9 of an integer; stoichiometry is integral so
/// conservation laws usually are too.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

fn rref(m: &mut DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let mut lead = 0;
    for r in 0..rows {
        let mut piv = None;
        while lead < cols {
            let best = (r..rows).max_by(|&i, &j| m[(i, lead)].abs().total_cmp(&m[(j, lead)].abs()));
            if let Some(i) = best.filter(|&i| m[(i, lead)].abs() > 1e-10) {
                piv = Some(i);
                break;
            }
            lead += 1;
        }
        let Some(i) = piv else { return };
        m.swap_rows(i, r);
        let p = m[(r, lead)];
        for j in 0..cols {
            m[(r, j)] /= p;
        }
        for k in 0..rows {
            if k != r {
                let f = m[(k, lead)];
                for j in 0..cols {
                    m[(k, j)] -= f * m[(r, j)];
                }
            }
        }
        lead += 1;
    }
}

/// JSON network file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    species: Vec<String>,
    complexes: Vec<Vec<u32>>,
    reactions: Vec<ReactionEntry>,
    #[serde(rename = "R", default = "default_r")]
    r: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReactionEntry {
    from: usize,
    to: usize,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "E", default)]
    e: f64,
}

fn default_r() -> f64 {
    GAS_CONSTANT
}

/// Shortcut file for the lifted McKeithan system.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct McKeithanFile {
    #[allow(dead_code)]
    model: String,
    alpha: [f64; 3],
    beta: [f64; 3],
    delta: [f64; 2],
    d: f64,
}

/// Parsed network definition.
#[derive(Clone, Debug)]
pub enum NetworkSpec {
    Network(ReactionNetwork),
    McKeithan { params: McKeithanParams, d: f64 },
}

/// Parses a network or McKeithan shortcut JSON document.
pub fn parse_network(text: &str) -> Result<NetworkSpec> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("line {}: {e}", e.line())))?;
    let is_mck = value.get("model").and_then(|m| m.as_str()) == Some("mckeithan");
    if value.get("model").is_some() && !is_mck {
        return Err(Error::InvalidInput(format!("unknown model {}", value["model"])));
    }
    if is_mck {
        let f: McKeithanFile = serde_json::from_value(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let params = McKeithanParams::new(f.alpha, f.beta, f.delta)?;
        return Ok(NetworkSpec::McKeithan { params, d: f.d });
    }
    let f: NetworkFile = serde_json::from_value(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut reactions = Vec::with_capacity(f.reactions.len());
    for (k, r) in f.reactions.iter().enumerate() {
        if r.from == 0 || r.to == 0 {
            return Err(Error::InvalidNetwork(format!("reaction {}: complex indices are 1-based", k + 1)));
        }
        reactions.push(Reaction {
            source: r.from - 1,
            target: r.to - 1,
            rate: RateLaw::new(r.a, r.e, f.r)?,
        });
    }
    Ok(NetworkSpec::Network(ReactionNetwork::new(f.species, f.complexes, reactions)?))
}

/// McKeithan network `T + M → C1 → … → CN`, each `Ci → T + M`.
///
/// Species order is `(T, M, C1, …, CN)`, complexes `(T+M, C1, …, CN)`.
/// `k_off[i]` is the rate of `C(i+1) → T+M`, `k_p[i]` that of
/// `C(i+1) → C(i+2)`.
pub fn mckeithan_network(k_on: f64, k_off: &[f64], k_p: &[f64]) -> Result<ReactionNetwork> {
    let n = k_off.len();
    if k_p.len() + 1 != n.max(1) {
        return Err(Error::InvalidNetwork(format!(
            "{n} dissociation rates need {} progression rates, got {}",
            n.saturating_sub(1),
            k_p.len()
        )));
    }
    let mut species = vec!["T".to_string(), "M".to_string()];
    species.extend((1..=n).map(|i| format!("C{i}")));
    let m = species.len();
    let mut complexes = vec![{
        let mut y = vec![0; m];
        y[0] = 1;
        y[1] = 1;
        y
    }];
    for i in 0..n {
        let mut y = vec![0; m];
        y[2 + i] = 1;
        complexes.push(y);
    }
    let mut reactions = Vec::new();
    if n > 0 {
        reactions.push(Reaction {
            source: 0,
            target: 1,
            rate: RateLaw::constant(k_on)?,
        });
    }
    for (i, k) in k_off.iter().enumerate() {
        reactions.push(Reaction {
            source: i + 1,
            target: 0,
            rate: RateLaw::constant(*k)?,
        });
    }
    for (i, k) in k_p.iter().enumerate() {
        reactions.push(Reaction {
            source: i + 1,
            target: i + 2,
            rate: RateLaw::constant(*k)?,
        });
    }
    ReactionNetwork::new(species, complexes, reactions)
}

/// Parameters of the two-complex McKeithan scheme in the exponent form
/// `k_i = β_i v^α_i`, `v = k₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McKeithanParams {
    /// `(α₂, α₃, α₄)`
    pub alpha: [f64; 3],
    /// `(β₂, β₃, β₄)`
    pub beta: [f64; 3],
    /// `(δ₁, δ₂)`
    pub delta: [f64; 2],
}

impl McKeithanParams {
    pub fn new(alpha: [f64; 3], beta: [f64; 3], delta: [f64; 2]) -> Result<Self> {
        // Validation is shared with the lifted system.
        McKeithanSystem::new(alpha, beta, delta, 0.0)?;
        Ok(Self { alpha, beta, delta })
    }

    pub fn delta3(&self) -> f64 {
        self.delta[0] + self.delta[1]
    }

    pub fn delta4(&self) -> f64 {
        self.delta[0] * self.delta[1]
    }

    /// `(k₁, k₂, k₃, k₄)` at `v = k₁`.
    pub fn rates(&self, v: f64) -> [f64; 4] {
        [
            v,
            self.beta[0] * v.powf(self.alpha[0]),
            self.beta[1] * v.powf(self.alpha[1]),
            self.beta[2] * v.powf(self.alpha[2]),
        ]
    }

    /// Four-species network `(T, M, A, B)` at fixed `v`.
    pub fn network(&self, v: f64) -> Result<ReactionNetwork> {
        let [k1, k2, k3, k4] = self.rates(v);
        let mut net = mckeithan_network(k1, &[k3, k4], &[k2])?;
        net.species = ["T", "M", "A", "B"].iter().map(|s| s.to_string()).collect();
        Ok(net)
    }

    /// Full state `(T, M, A, B)` from reduced coordinates `(x, y) = (A, B)`.
    pub fn full_state(&self, x: f64, y: f64) -> [f64; 4] {
        [self.delta[0] - x - y, self.delta[1] - x - y, x, y]
    }
}

pub fn mckeithan_lift(params: &McKeithanParams, d: f64) -> Result<McKeithanSystem> {
    McKeithanSystem::new(params.alpha, params.beta, params.delta, d)
}

/// Arrhenius pairs `(A_i, E_i)`, `i = 1..4`, to exponents
/// `α_i = E_i / E_1`, `β_i = A_i / A_1^α_i` for `i = 2, 3, 4`.
pub fn arrhenius_to_exponents(rates: &[RateLaw; 4]) -> Result<([f64; 3], [f64; 3])> {
    let e1 = rates[0].e;
    if !(e1 > 0.0) {
        return Err(Error::Domain("E_1 must be positive to define the exponents".into()));
    }
    let a1 = rates[0].a;
    let mut alpha = [0.0; 3];
    let mut beta = [0.0; 3];
    for i in 0..3 {
        alpha[i] = rates[i + 1].e / e1;
        beta[i] = rates[i + 1].a / a1.powf(alpha[i]);
    }
    Ok((alpha, beta))
}
