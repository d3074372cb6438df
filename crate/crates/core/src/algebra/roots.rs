use super::ComplexPoly;
use crate::dd::{horner_cdd, Cdd};
use crate::{c64, C64, Error, Result};

/// A cluster of nearby numerical roots interpreted as one multiple root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootCluster {
    pub center: C64,
    pub multiplicity: usize,
}

/// All roots of `p`, with repetition; multiple roots are detected by
/// clustering and reported as repeated copies of the cluster mean.
///
/// Companion-matrix eigenvalues with a Newton polish. A degree-0 input
/// returns the empty multiset.
pub fn poly_roots(p: &ComplexPoly) -> Result<Vec<C64>> {
    if p.is_zero() {
        return Err(Error::RootFinding("zero polynomial has no root multiset".into()));
    }
    let radius = |z: C64| 1e-8 * (1.0 + z.norm());
    let clusters = root_clusters(p, radius)?;
    let mut out = Vec::with_capacity(p.degree().unwrap_or(0));
    for c in clusters {
        for _ in 0..c.multiplicity {
            out.push(c.center);
        }
    }
    Ok(out)
}

/// Roots of `p` grouped into multiplicity clusters.
pub fn root_clusters(p: &ComplexPoly, radius: impl Fn(C64) -> f64) -> Result<Vec<RootCluster>> {
    root_clusters_dyn(p, &radius)
}

fn root_clusters_dyn(p: &ComplexPoly, radius: &dyn Fn(C64) -> f64) -> Result<Vec<RootCluster>> {
    let mut coeffs = p.coeffs().to_vec();
    // Exact zero roots deflate without iteration.
    let mut zeros = 0usize;
    while coeffs.first().map_or(false, |c| c.norm() == 0.0) {
        coeffs.remove(0);
        zeros += 1;
    }
    let mut raw: Vec<C64> = Vec::new();
    if coeffs.len() > 1 {
        // Exponent-support reduction: when p(z) = P(z^d) only the degree-n/d
        // polynomial P is solved and its roots are unfolded by d-th roots.
        // This sidesteps most of the monomial-basis conditioning loss for
        // the sparse eigenpolynomials of sparse operators.
        let d = support_gcd(&coeffs);
        if d > 1 {
            let folded: Vec<C64> = coeffs.iter().step_by(d).copied().collect();
            let p_folded = ComplexPoly::new(folded);
            let inner = root_clusters_dyn(&p_folded, &|z| 1e-13 * (1.0 + z.norm()))?;
            let mut out: Vec<C64> = Vec::new();
            for cl in inner {
                for _ in 0..cl.multiplicity {
                    let r = cl.center.norm().powf(1.0 / d as f64);
                    let th = cl.center.arg() / d as f64;
                    for j in 0..d {
                        out.push(C64::from_polar(
                            r,
                            th + 2.0 * std::f64::consts::PI * j as f64 / d as f64,
                        ));
                    }
                }
            }
            raw = out;
            let mut clusters = cluster_roots(&raw, &radius);
            if zeros > 0 {
                let zrad = radius(c64(0.0, 0.0));
                match clusters.iter_mut().find(|c| c.center.norm() <= zrad) {
                    Some(c) => c.multiplicity += zeros,
                    None => clusters.push(RootCluster { center: c64(0.0, 0.0), multiplicity: zeros }),
                }
            }
            clusters.sort_by(|a, b| {
                (a.center.re, a.center.im)
                    .partial_cmp(&(b.center.re, b.center.im))
                    .unwrap()
            });
            return Ok(clusters);
        }
        // Monic normalization.
        let lead = *coeffs.last().unwrap();
        for c in coeffs.iter_mut() {
            *c /= lead;
        }
        let n = coeffs.len() - 1;
        // Variable rescale z = s*t only as an overflow guard for extreme
        // coefficient magnitudes; the eigenvalue solver balances the matrix
        // itself and is more accurate without an extra scale.
        let max_mag = coeffs.iter().take(n).map(|c| c.norm()).fold(0.0, f64::max);
        let mut s = 1.0f64;
        if max_mag > 1e60 {
            for (k, c) in coeffs.iter().enumerate().take(n) {
                let m = c.norm();
                if m > 1.0 {
                    s = s.max(m.powf(1.0 / (n - k) as f64));
                }
            }
        }
        let mut scaled = vec![c64(0.0, 0.0); n];
        for k in 0..n {
            scaled[k] = if s == 1.0 { coeffs[k] } else { coeffs[k] / s.powi((n - k) as i32) };
        }
        let mut eig = companion_eigenvalues(&scaled)?;
        for e in eig.iter_mut() {
            *e *= s;
        }
        // Newton polish on the original (monic) polynomial.
        let monic = ComplexPoly::new(coeffs.clone());
        let dmonic = monic.derivative();
        for e in eig.iter_mut() {
            let mut z = *e;
            let mut best = (monic.eval(z).norm(), z);
            for _ in 0..8 {
                let f = monic.eval(z);
                let df = dmonic.eval(z);
                if df.norm() < 1e-300 {
                    break;
                }
                let step = f / df;
                if !step.re.is_finite() || !step.im.is_finite() {
                    break;
                }
                z -= step;
                let fz = monic.eval(z).norm();
                if fz < best.0 {
                    best = (fz, z);
                }
                if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                    break;
                }
            }
            *e = best.1;
        }
        raw = eig;
    }
    let mut clusters = cluster_roots(&raw, &radius);
    if zeros > 0 {
        let zrad = radius(c64(0.0, 0.0));
        match clusters.iter_mut().find(|c| c.center.norm() <= zrad) {
            Some(c) => c.multiplicity += zeros,
            None => clusters.push(RootCluster { center: c64(0.0, 0.0), multiplicity: zeros }),
        }
    }
    clusters.sort_by(|a, b| {
        (a.center.re, a.center.im)
            .partial_cmp(&(b.center.re, b.center.im))
            .unwrap()
    });
    Ok(clusters)
}

/// Roots of a polynomial whose coefficients are carried in double-double
/// precision, with repetition. Monomial-basis root extraction loses roughly
/// `log10(coeff spread)` digits on clustered roots; the extra coefficient
/// precision plus a Newton polish against the double-double Horner keeps
/// high-degree eigenpolynomial root clouds honest.
pub fn poly_roots_refined(coeffs_in: &[Cdd]) -> Result<Vec<C64>> {
    let mut coeffs = coeffs_in.to_vec();
    while coeffs.last().map_or(false, |c| c.is_zero()) {
        coeffs.pop();
    }
    if coeffs.is_empty() {
        return Err(Error::RootFinding("zero polynomial has no root multiset".into()));
    }
    let mut zeros = 0usize;
    while coeffs.first().map_or(false, |c| c.is_zero()) {
        coeffs.remove(0);
        zeros += 1;
    }
    let mut out: Vec<C64> = vec![c64(0.0, 0.0); zeros];
    if coeffs.len() > 1 {
        let mut d = 0usize;
        for (k, c) in coeffs.iter().enumerate() {
            if !c.is_zero() && k > 0 {
                d = gcd_usize(d, k);
            }
        }
        let d = d.max(1);
        let folded: Vec<Cdd> = coeffs.iter().step_by(d).copied().collect();
        let dfolded: Vec<Cdd> = folded
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.mul(Cdd::from_f64(k as f64)))
            .collect();
        // f64 companion eigenvalues seed the double-double Newton polish.
        let seed_poly = ComplexPoly::new(folded.iter().map(|c| c.to_c64()).collect());
        let seeds = poly_roots(&seed_poly)?;
        for s in seeds {
            let mut u = Cdd::from_c64(s);
            let mut best = (horner_cdd(&folded, u).norm(), u);
            for _ in 0..500 {
                let f = horner_cdd(&folded, u);
                let df = horner_cdd(&dfolded, u);
                if df.norm() == 0.0 {
                    break;
                }
                let mut step = f.div(df);
                // damp wild steps out of root clusters
                let cap = 0.25 * (1.0 + u.norm());
                if step.norm() > cap {
                    let sc = cap / step.norm();
                    step = step.mul(Cdd::from_f64(sc));
                }
                u = u.sub(step);
                let fu = horner_cdd(&folded, u).norm();
                if fu < best.0 {
                    best = (fu, u);
                }
                if step.norm() <= 1e-30 * (1.0 + u.norm()) {
                    break;
                }
            }
            let u = best.1.to_c64();
            let r = u.norm().powf(1.0 / d as f64);
            let th = u.arg() / d as f64;
            for j in 0..d {
                out.push(C64::from_polar(r, th + 2.0 * std::f64::consts::PI * j as f64 / d as f64));
            }
        }
    }
    Ok(out)
}

/// Gcd of the exponent gaps of the nonzero coefficients (1 for dense).
fn support_gcd(coeffs: &[C64]) -> usize {
    let mut g = 0usize;
    for (k, c) in coeffs.iter().enumerate() {
        if c.norm() > 0.0 && k > 0 {
            g = gcd_usize(g, k);
        }
    }
    g.max(1)
}

fn gcd_usize(a: usize, b: usize) -> usize {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Groups points lying within the clustering radius of each other
/// (transitively) and averages each group.
pub fn cluster_roots(points: &[C64], radius: &impl Fn(C64) -> f64) -> Vec<RootCluster> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            let r = radius(points[i]).max(radius(points[j]));
            if (points[i] - points[j]).norm() <= r {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<C64>> = std::collections::BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(points[i]);
    }
    groups
        .into_values()
        .map(|g| {
            let sum: C64 = g.iter().sum();
            RootCluster { center: sum / g.len() as f64, multiplicity: g.len() }
        })
        .collect()
}

/// Eigenvalues of the companion matrix of the monic polynomial
/// `t^n + a_{n-1} t^{n-1} + ... + a_0`, `a = low_coeffs`.
#[doc(hidden)]
pub fn companion_eigenvalues(low_coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = low_coeffs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![-low_coeffs[0]]);
    }
    let mut h = vec![c64(0.0, 0.0); n * n];
    for i in 0..n - 1 {
        h[(i + 1) * n + i] = c64(1.0, 0.0);
    }
    for i in 0..n {
        h[i * n + (n - 1)] = -low_coeffs[i];
    }
    balance(&mut h, n);
    hessenberg_qr(&mut h, n)
}

/// Parlett-Reinsch balancing by powers of two; preserves the eigenvalues
/// and the Hessenberg zero pattern.
fn balance(h: &mut [C64], n: usize) {
    let radix: f64 = 2.0;
    let sqrdx = radix * radix;
    for _ in 0..32 {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    r += h[i * n + j].norm();
                    c += h[j * n + i].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            while cc < r / radix {
                f *= radix;
                cc *= sqrdx;
            }
            while cc > r * radix {
                f /= radix;
                cc /= sqrdx;
            }
            if (cc + r) / f < 0.95 * s && f != 1.0 {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    h[i * n + j] *= g;
                }
                for j in 0..n {
                    h[j * n + i] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Shifted QR iteration on a complex upper-Hessenberg matrix.
fn hessenberg_qr(h: &mut [C64], n: usize) -> Result<Vec<C64>> {
    let mut eig = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut iter_this = 0usize;
    let mut total = 0usize;
    let max_total = 60 * n;
    loop {
        // Deflate converged trailing 1x1 blocks.
        while hi > 0 {
            let sub = h[hi * n + hi - 1].norm();
            let diag = h[(hi - 1) * n + hi - 1].norm() + h[hi * n + hi].norm();
            if sub <= f64::EPSILON * diag + 1e-300 {
                h[hi * n + hi - 1] = c64(0.0, 0.0);
                eig.push(h[hi * n + hi]);
                hi -= 1;
                iter_this = 0;
            } else {
                break;
            }
        }
        if hi == 0 {
            eig.push(h[0]);
            break;
        }
        // Find the start of the active block.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[lo * n + lo - 1].norm();
            let diag = h[(lo - 1) * n + lo - 1].norm() + h[lo * n + lo].norm();
            if sub <= f64::EPSILON * diag + 1e-300 {
                h[lo * n + lo - 1] = c64(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        total += 1;
        iter_this += 1;
        if total > max_total {
            return Err(Error::RootFinding(format!(
                "QR iteration did not converge after {max_total} sweeps"
            )));
        }
        // Wilkinson shift from the trailing 2x2, with an occasional
        // exceptional shift to break symmetry stalls.
        let a = h[(hi - 1) * n + hi - 1];
        let b = h[(hi - 1) * n + hi];
        let c = h[hi * n + hi - 1];
        let d = h[hi * n + hi];
        let mut mu = {
            let mean = (a + d) * 0.5;
            let disc = ((a - d) * (a - d) * 0.25 + b * c).sqrt();
            let e1 = mean + disc;
            let e2 = mean - disc;
            if (e1 - d).norm() <= (e2 - d).norm() {
                e1
            } else {
                e2
            }
        };
        if iter_this % 12 == 0 {
            mu = d + c64(0.7648, 0.3928) * c.norm();
        }
        // Bulge-chasing single-shift sweep.
        let mut x = h[lo * n + lo] - mu;
        let mut y = h[(lo + 1) * n + lo];
        for k in lo..hi {
            let (cr, s) = givens(x, y);
            // Left: rows k, k+1.
            let start = k.saturating_sub(1);
            for j in start..n {
                let p = h[k * n + j];
                let q = h[(k + 1) * n + j];
                h[k * n + j] = cr * p + s * q;
                h[(k + 1) * n + j] = -s.conj() * p + cr * q;
            }
            // Right: columns k, k+1.
            let stop = (k + 2).min(hi) + 1;
            for i in 0..stop {
                let p = h[i * n + k];
                let q = h[i * n + k + 1];
                h[i * n + k] = cr * p + s.conj() * q;
                h[i * n + k + 1] = -s * p + cr * q;
            }
            if k + 2 <= hi {
                x = h[(k + 1) * n + k];
                y = h[(k + 2) * n + k];
            }
        }
    }
    Ok(eig)
}

/// Unitary rotation parameters (c real, s complex) with
/// `[c s; -conj(s) c] * [f; g] = [r; 0]`.
fn givens(f: C64, g: C64) -> (f64, C64) {
    let fn_ = f.norm();
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, c64(0.0, 0.0));
    }
    if fn_ == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let r = (fn_ * fn_ + gn * gn).sqrt();
    let c = fn_ / r;
    let s = (f / fn_) * g.conj() / r;
    (c, s)
}
