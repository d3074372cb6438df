//! Exactly solvable operators `M = sum_k rho_k(z) d^k/dz^k` and their exact
//! eigen-structure. The operator preserves polynomial degree, so its matrix
//! in the monomial basis is upper triangular and eigenpolynomials follow
//! from back-substitution.

use crate::algebra::{poly_roots_refined, root_clusters, ComplexPoly};
use crate::dd::{Cdd, Dd};
use crate::linalg::CMatrix;
use crate::{c64, C64, Error, Result};
use serde::{Deserialize, Serialize};

/// Operator data: `rho[k-1]` is the coefficient polynomial of `d^k/dz^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ESOperator {
    m: usize,
    rho: Vec<ComplexPoly>,
    /// Cached coefficient of `z^{M-1}` in `rho_{M-1}`.
    rho_m1_m1: C64,
}

/// Zeros of the leading coefficient with multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurningPointSet {
    pub points: Vec<(C64, usize)>,
}

impl TurningPointSet {
    pub fn total_multiplicity(&self) -> usize {
        self.points.iter().map(|p| p.1).sum()
    }

    pub fn nearest_distance(&self, z: C64) -> f64 {
        self.points.iter().map(|p| (z - p.0).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Diameter of the point set (zero for a single point).
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max((a.0 - b.0).norm());
            }
        }
        d
    }

    pub fn centroid(&self) -> C64 {
        let mut acc = c64(0.0, 0.0);
        let mut n = 0usize;
        for &(z, mult) in &self.points {
            acc += z * mult as f64;
            n += mult;
        }
        acc / n as f64
    }
}

/// Per-condition validation report; violations are listed, never silently
/// accepted.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// deg rho_k <= k for every k.
    pub degree_bounds: bool,
    /// Some rho_l attains deg rho_l = l.
    pub attains_degree: bool,
    /// rho_M monic with deg rho_M = M.
    pub non_degenerate: bool,
    /// rho_M = (z - a)^M; accepted here, refused by the geometric layers.
    pub perfect_power_leading: bool,
    pub violations: Vec<String>,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        self.degree_bounds && self.attains_degree && self.non_degenerate
    }
}

/// One computed eigenpair.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSystem {
    pub n: usize,
    #[serde(with = "crate::serde_c64")]
    pub lambda: C64,
    /// Monic eigenpolynomial of degree n.
    pub q: ComplexPoly,
    /// `max |coeff(M q - lambda q)|`, absolute.
    pub residual: f64,
}

impl ESOperator {
    /// Builds the operator from `rho_1 ... rho_M` and validates it.
    pub fn new(rho: Vec<ComplexPoly>) -> Result<Self> {
        let m = rho.len();
        if m < 2 {
            return Err(Error::InvalidOperator("order must be at least 2".into()));
        }
        let rho_m1_m1 = rho[m - 2].coeff(m - 1);
        let op = ESOperator { m, rho, rho_m1_m1 };
        let diag = op.validate();
        if !diag.is_valid() {
            return Err(Error::InvalidOperator(diag.violations.join("; ")));
        }
        Ok(op)
    }

    pub fn order(&self) -> usize {
        self.m
    }

    /// Coefficient polynomial of `d^k/dz^k`, `1 <= k <= M`.
    pub fn rho(&self, k: usize) -> &ComplexPoly {
        &self.rho[k - 1]
    }

    pub fn leading(&self) -> &ComplexPoly {
        &self.rho[self.m - 1]
    }

    pub fn rho_m1_m1(&self) -> C64 {
        self.rho_m1_m1
    }

    pub fn validate(&self) -> Diagnostics {
        let mut violations = Vec::new();
        let mut degree_bounds = true;
        let mut attains_degree = false;
        for (i, p) in self.rho.iter().enumerate() {
            let k = i + 1;
            if let Some(d) = p.degree() {
                if d > k {
                    degree_bounds = false;
                    violations.push(format!("deg rho_{k} = {d} exceeds {k}"));
                }
                if d == k {
                    attains_degree = true;
                }
            }
        }
        if !attains_degree {
            violations.push("no coefficient attains deg rho_l = l".into());
        }
        let lead = &self.rho[self.m - 1];
        let non_degenerate = lead.degree() == Some(self.m) && lead.is_monic();
        if !non_degenerate {
            violations.push(format!("rho_{m} must be monic of degree {m}", m = self.m));
        }
        let perfect_power_leading = non_degenerate && self.is_perfect_power_leading();
        Diagnostics { degree_bounds, attains_degree, non_degenerate, perfect_power_leading, violations }
    }

    fn is_perfect_power_leading(&self) -> bool {
        // an m-fold root computed in f64 splits like eps^(1/m); the
        // detection radius must cover that spread
        match root_clusters(self.leading(), |z| 1e-4 * (1.0 + z.norm())) {
            Ok(cl) => cl.len() == 1 && cl[0].multiplicity == self.m,
            Err(_) => false,
        }
    }

    /// Zeros of `rho_M`, clustered into multiplicities; they always sum to M
    /// for a valid operator. The radius covers the eps^(1/m) splitting of
    /// numerically perturbed multiple roots up to m = 3.
    pub fn turning_points(&self) -> Result<TurningPointSet> {
        let clusters = root_clusters(self.leading(), |z| 3e-6 * (1.0 + z.norm()))?;
        let points: Vec<(C64, usize)> = clusters.into_iter().map(|c| (c.center, c.multiplicity)).collect();
        let set = TurningPointSet { points };
        if set.total_multiplicity() != self.m {
            return Err(Error::RootFinding(format!(
                "turning point multiplicities sum to {} instead of {}",
                set.total_multiplicity(),
                self.m
            )));
        }
        Ok(set)
    }

    /// Applies the operator to a polynomial.
    pub fn apply(&self, p: &ComplexPoly) -> ComplexPoly {
        let mut acc = ComplexPoly::zero();
        let mut dp = p.clone();
        for k in 1..=self.m {
            dp = dp.derivative();
            acc = &acc + &(&self.rho[k - 1] * &dp);
        }
        acc
    }

    /// Eigenvalue on the degree-n flag: the coefficient of `z^n` in `M z^n`,
    /// computed by applying the operator rather than assumed from a formula.
    pub fn eigenvalue(&self, n: usize) -> C64 {
        let zn = ComplexPoly::monomial(c64(1.0, 0.0), n);
        self.apply(&zn).coeff(n)
    }

    /// Matrix entry `A[i][j]`: coefficient of `z^i` in `M z^j`. Nonzero only
    /// for `j - M <= i <= j` (upper triangular, banded).
    pub fn matrix_entry(&self, i: usize, j: usize) -> C64 {
        if i > j || j - i > self.m {
            return c64(0.0, 0.0);
        }
        let d = j - i;
        let mut acc = c64(0.0, 0.0);
        for k in 1..=self.m {
            if k >= d && k <= j {
                let c = self.rho[k - 1].coeff(k - d);
                if c.norm() > 0.0 {
                    acc += c * falling_factorial(j, k);
                }
            }
        }
        acc
    }

    /// Dense matrix of the operator on polynomials of degree <= n.
    pub fn matrix_dense(&self, n: usize) -> CMatrix {
        let mut a = CMatrix::zeros(n + 1, n + 1);
        for j in 0..=n {
            let mzj = self.apply(&ComplexPoly::monomial(c64(1.0, 0.0), j));
            for i in 0..=n {
                a.set(i, j, mzj.coeff(i));
            }
        }
        a
    }

    /// Monic eigenpolynomial of degree n via back-substitution on the
    /// triangular system `(M - lambda_n) q = 0`.
    ///
    /// Fails when `lambda_n` collides with an earlier eigenvalue: the
    /// eigenpolynomial is not unique there and no pseudo-inverse is taken.
    pub fn eigenpolynomial(&self, n: usize) -> Result<EigenSystem> {
        let lambda_n = self.eigenvalue(n);
        for m in 0..n {
            let lm = self.eigenvalue(m);
            if (lm - lambda_n).norm() <= 1e-10 * (1.0 + lambda_n.norm()) {
                return Err(Error::EigenvalueCollision { n, m });
            }
        }
        let mut q = vec![c64(0.0, 0.0); n + 1];
        q[n] = c64(1.0, 0.0);
        for i in (0..n).rev() {
            let mut s = c64(0.0, 0.0);
            for j in i + 1..=(i + self.m).min(n) {
                let a = self.matrix_entry(i, j);
                if a.norm() > 0.0 {
                    s += a * q[j];
                }
            }
            let li = self.eigenvalue(i);
            q[i] = -s / (li - lambda_n);
        }
        let q = ComplexPoly::new(q);
        let res_poly = &self.apply(&q) - &q.scale(lambda_n);
        Ok(EigenSystem { n, lambda: lambda_n, q, residual: res_poly.norm_inf() })
    }

    /// Matrix entry in double-double precision (inputs are exact f64, the
    /// falling factorials are exact integers, so only the sum rounds).
    fn matrix_entry_dd(&self, i: usize, j: usize) -> Cdd {
        if i > j || j - i > self.m {
            return Cdd::ZERO;
        }
        let d = j - i;
        let mut acc = Cdd::ZERO;
        for k in 1..=self.m {
            if k >= d && k <= j {
                let c = self.rho[k - 1].coeff(k - d);
                if c.norm() > 0.0 {
                    let term = Cdd::from_c64(c).mul(Cdd { re: Dd::from_f64(falling_factorial(j, k)), im: Dd::ZERO });
                    acc = acc.add(term);
                }
            }
        }
        acc
    }

    /// Back-substitution carried in double-double precision. The f64
    /// coefficients of `eigenpolynomial` are accurate to ~1e-14 relative,
    /// which is not enough to place high-degree clustered roots; this path
    /// feeds `poly_roots_refined`.
    fn eigen_coeffs_dd(&self, n: usize) -> Result<Vec<Cdd>> {
        let lambda_n = self.eigenvalue(n);
        for m in 0..n {
            if (self.eigenvalue(m) - lambda_n).norm() <= 1e-10 * (1.0 + lambda_n.norm()) {
                return Err(Error::EigenvalueCollision { n, m });
            }
        }
        let lam_dd: Vec<Cdd> = (0..=n).map(|i| self.matrix_entry_dd(i, i)).collect();
        let mut q = vec![Cdd::ZERO; n + 1];
        q[n] = Cdd::from_f64(1.0);
        for i in (0..n).rev() {
            let mut s = Cdd::ZERO;
            for j in i + 1..=(i + self.m).min(n) {
                let a = self.matrix_entry_dd(i, j);
                if !a.is_zero() {
                    s = s.add(a.mul(q[j]));
                }
            }
            q[i] = s.neg().div(lam_dd[i].sub(lam_dd[n]));
        }
        Ok(q)
    }

    /// Roots of the degree-n eigenpolynomial, with repetition. Each point
    /// carries weight 1/n by convention; no measure type beyond the cloud.
    pub fn root_counting_measure(&self, n: usize) -> Result<Vec<C64>> {
        let coeffs = self.eigen_coeffs_dd(n)?;
        poly_roots_refined(&coeffs)
    }
}

fn falling_factorial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64;
    }
    acc
}

/// JSON wire form: `{"M": int, "rho": [[ [re,im], ... ], ...]}`, rho_1 first.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub rho: Vec<ComplexPoly>,
}

impl OperatorConfig {
    pub fn build(&self) -> Result<ESOperator> {
        if self.rho.len() != self.m {
            return Err(Error::Config(format!(
                "expected {} coefficient polynomials, got {}",
                self.m,
                self.rho.len()
            )));
        }
        ESOperator::new(self.rho.clone())
    }

    pub fn from_operator(op: &ESOperator) -> Self {
        OperatorConfig { m: op.order(), rho: (1..=op.order()).map(|k| op.rho(k).clone()).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::lu_decompose;

    fn op_z2_minus_1() -> ESOperator {
        ESOperator::new(vec![ComplexPoly::zero(), ComplexPoly::from_real(&[-1.0, 0.0, 1.0])]).unwrap()
    }

    fn op_cubic_unity() -> ESOperator {
        ESOperator::new(vec![
            ComplexPoly::zero(),
            ComplexPoly::zero(),
            ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap()
    }

    fn euler_cauchy(m: usize, a: &[f64]) -> ESOperator {
        let mut rho = Vec::new();
        for k in 1..=m {
            let c = if k == m { 1.0 } else { a[k - 1] };
            rho.push(ComplexPoly::monomial(c64(c, 0.0), k));
        }
        ESOperator::new(rho).unwrap()
    }

    #[test]
    fn validate_examples() {
        let d = op_z2_minus_1().validate();
        assert!(d.is_valid() && !d.perfect_power_leading);

        // rho_2 = z^3 violates the degree bound; the constructor rejects it
        let bad = ESOperator::new(vec![ComplexPoly::zero(), ComplexPoly::monomial(c64(1.0, 0.0), 3)]);
        assert!(bad.is_err());

        let ec = euler_cauchy(3, &[0.5, -1.0]);
        let d = ec.validate();
        assert!(d.is_valid() && d.perfect_power_leading);
    }

    #[test]
    fn eigenvalue_examples() {
        // rho_2 = z^2, rho_1 = z: lambda_n = n(n-1) + n = n^2
        let op = euler_cauchy(2, &[1.0]);
        for n in 0..8 {
            assert!((op.eigenvalue(n) - c64((n * n) as f64, 0.0)).norm() < 1e-12);
        }
        // z^2 d^2/dz^2 alone: lambda_n = n(n-1)
        let op = ESOperator::new(vec![ComplexPoly::zero(), ComplexPoly::monomial(c64(1.0, 0.0), 2)]).unwrap();
        for n in 0..10usize {
            let want = (n * n.saturating_sub(1)) as f64;
            assert!((op.eigenvalue(n) - c64(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenvalue_matches_dense_matrix_entry() {
        let rho1 = ComplexPoly::new(vec![c64(0.4, 0.1), c64(0.3, -0.2)]);
        let rho2 = ComplexPoly::new(vec![c64(0.1, 0.0), c64(0.0, 0.4), c64(-0.7, 0.2)]);
        let rho3 = ComplexPoly::from_real(&[-1.0, 0.0, 0.0, 1.0]);
        let op = ESOperator::new(vec![rho1, rho2, rho3]).unwrap();
        let n = 12;
        let dense = op.matrix_dense(n);
        assert!((op.eigenvalue(n) - dense.at(n, n)).norm() < 1e-10);
    }

    #[test]
    fn triangularity_exact() {
        let op = op_cubic_unity();
        let n = 15;
        let a = op.matrix_dense(n);
        for i in 0..=n {
            for j in 0..i {
                assert_eq!(a.at(i, j), c64(0.0, 0.0), "entry ({i},{j}) not exactly zero");
            }
        }
    }

    #[test]
    fn euler_cauchy_monomial_eigenpolynomials() {
        let op = euler_cauchy(3, &[0.5, -1.0]);
        for n in [0usize, 1, 5, 9] {
            let e = op.eigenpolynomial(n).unwrap();
            assert_eq!(e.q, ComplexPoly::monomial(c64(1.0, 0.0), n));
            assert_eq!(e.residual, 0.0);
        }
    }

    #[test]
    fn degree_zero_eigenpolynomial_is_one() {
        let e = op_cubic_unity().eigenpolynomial(0).unwrap();
        assert_eq!(e.q, ComplexPoly::one());
    }

    /// Dense-solver oracle: inverse iteration on the full matrix,
    /// independent of the triangular back-substitution path.
    fn dense_eigenvector_oracle(op: &ESOperator, n: usize) -> ComplexPoly {
        let lambda = op.eigenvalue(n);
        let dim = n + 1;
        let mut a = op.matrix_dense(n);
        let shift = lambda + c64(1e-10, 1e-10) * (1.0 + lambda.norm());
        for i in 0..dim {
            let v = a.at(i, i) - shift;
            a.set(i, i, v);
        }
        let lu = lu_decompose(&a).unwrap();
        let mut x: Vec<C64> = (0..dim).map(|k| c64(1.0 / (k as f64 + 1.0), 0.3)).collect();
        for _ in 0..3 {
            x = lu.solve(&x);
            let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for v in x.iter_mut() {
                *v /= norm;
            }
        }
        let lead = x[n];
        ComplexPoly::new(x.into_iter().map(|v| v / lead).collect())
    }

    #[test]
    fn back_substitution_matches_dense_oracle() {
        let op = op_cubic_unity();
        let n = 10;
        let e = op.eigenpolynomial(n).unwrap();
        let oracle = dense_eigenvector_oracle(&op, n);
        let diff = &e.q - &oracle;
        assert!(diff.norm_inf() < 1e-10, "coefficient gap {:.3e}", diff.norm_inf());
    }

    #[test]
    fn residual_relative_bound() {
        let op = op_cubic_unity();
        for n in [5usize, 20, 60] {
            let e = op.eigenpolynomial(n).unwrap();
            assert!(e.residual <= 1e-9 * e.q.norm_inf(), "n={n} residual {:.3e}", e.residual);
        }
    }

    #[test]
    fn root_measure_euler_cauchy_all_zero() {
        let op = euler_cauchy(2, &[1.0]);
        let roots = op.root_counting_measure(12).unwrap();
        assert_eq!(roots.len(), 12);
        for r in roots {
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn root_measure_inside_hull_cubic() {
        let op = op_cubic_unity();
        let roots = op.root_counting_measure(60).unwrap();
        assert_eq!(roots.len(), 60);
        let verts = [
            c64(1.0, 0.0),
            c64(-0.5, 3f64.sqrt() / 2.0),
            c64(-0.5, -3f64.sqrt() / 2.0),
        ];
        for r in roots {
            for i in 0..3 {
                let a = verts[i];
                let b = verts[(i + 1) % 3];
                let cross = ((b - a).conj() * (r - a)).im;
                assert!(cross >= -1e-3, "root {r} outside hull edge {i} by {cross:.2e}");
            }
        }
    }

    #[test]
    fn root_measure_on_segment_m2() {
        let op = op_z2_minus_1();
        let roots = op.root_counting_measure(40).unwrap();
        for r in roots {
            let x = r.re.clamp(-1.0, 1.0);
            let d = (r - c64(x, 0.0)).norm();
            assert!(d < 0.05, "root {r} at distance {d:.3e} from [-1,1]");
        }
    }

    #[test]
    fn turning_points_sum_to_m() {
        let tp = op_cubic_unity().turning_points().unwrap();
        assert_eq!(tp.points.len(), 3);
        assert_eq!(tp.total_multiplicity(), 3);
    }

    #[test]
    fn operator_config_round_trip() {
        let op = op_cubic_unity();
        let cfg = OperatorConfig::from_operator(&op);
        let s = serde_json::to_string(&cfg).unwrap();
        let back: OperatorConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back.build().unwrap(), op);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let s = r#"{"M": 2, "rho": [[], [[0.0,0.0],[0.0,0.0],[1.0,0.0]]], "extra": 1}"#;
        assert!(serde_json::from_str::<OperatorConfig>(s).is_err());
    }
}
