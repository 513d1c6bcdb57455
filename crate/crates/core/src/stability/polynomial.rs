//! Monic real polynomials and the Hurwitz test.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix};

use super::StabilityError;

/// Eigenvalues of a real square matrix, in no particular order.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    f.eigenvalues::<faer::complex_native::c64>()
        .into_iter()
        .map(|z| Complex::new(z.re, z.im))
        .collect()
}

/// Default distance from the imaginary axis a root must keep to count as stable.
pub const HURWITZ_MARGIN: f64 = 1e-9;

/// Monic polynomial, coefficients highest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    coefficients: Vec<f64>,
}

impl RealPolynomial {
    pub fn new(coefficients: Vec<f64>) -> Result<Self, StabilityError> {
        if coefficients.first() != Some(&1.0) {
            return Err(StabilityError::NotMonic);
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(StabilityError::NonFinite);
        }
        Ok(Self { coefficients })
    }

    /// `s^n + tail[0] s^{n-1} + ... + tail[n-1]`.
    pub fn monic(tail: &[f64]) -> Result<Self, StabilityError> {
        let mut c = Vec::with_capacity(tail.len() + 1);
        c.push(1.0);
        c.extend_from_slice(tail);
        Self::new(c)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        self.coefficients
            .iter()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut c = vec![0.0; self.degree() + other.degree() + 1];
        for (i, a) in self.coefficients.iter().enumerate() {
            for (j, b) in other.coefficients.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self { coefficients: c }
    }

    /// Companion matrix whose characteristic polynomial is `self`.
    pub fn companion(&self) -> DMatrix<f64> {
        let n = self.degree();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(0, j)] = -self.coefficients[j + 1];
        }
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        m
    }

    pub fn roots(&self) -> Result<Vec<Complex<f64>>, StabilityError> {
        if self.degree() == 0 {
            return Err(StabilityError::DegenerateDegree);
        }
        Ok(eigenvalues(&self.companion()))
    }

    /// Written out as `s^3 + 3 s^2 + 3 s + 3`.
    pub fn to_text(&self) -> String {
        let n = self.degree();
        let mut out = String::new();
        for (i, &c) in self.coefficients.iter().enumerate() {
            let power = n - i;
            if c == 0.0 && i > 0 {
                continue;
            }
            let term = match (power, c.abs() == 1.0 && power > 0) {
                (0, _) => format!("{}", c.abs()),
                (p, true) => power_text(p),
                (p, false) => format!("{} {}", c.abs(), power_text(p)),
            };
            if i == 0 {
                out.push_str(&term);
            } else {
                out.push_str(if c < 0.0 { " - " } else { " + " });
                out.push_str(&term);
            }
        }
        out
    }
}

fn power_text(p: usize) -> String {
    if p == 1 {
        "s".into()
    } else {
        format!("s^{p}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HurwitzVerdict {
    pub stable: bool,
    pub roots: Vec<Complex<f64>>,
}

/// Stable iff every root has real part below `-margin`.
pub fn hurwitz(p: &RealPolynomial, margin: f64) -> Result<HurwitzVerdict, StabilityError> {
    let roots = p.roots()?;
    let stable = roots.iter().all(|z| z.re < -margin);
    Ok(HurwitzVerdict { stable, roots })
}

/// True iff two root multisets agree. Roots within `sqrt(tol) * max(1, |z|)`
/// of each other are clustered (single linkage over both sets); each cluster
/// must hold as many roots from `a` as from `b`, with means within
/// `tol * max(1, |mean|)`. Cluster means stay accurate when a repeated root
/// is split by rounding, individual roots do not.
pub fn spectra_match(a: &[Complex<f64>], b: &[Complex<f64>], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let all: Vec<(Complex<f64>, bool)> = a.iter().map(|z| (*z, true)).chain(b.iter().map(|z| (*z, false))).collect();
    let radius = tol.sqrt();
    let mut cluster: Vec<usize> = (0..all.len()).collect();
    fn root(c: &mut [usize], mut i: usize) -> usize {
        while c[i] != i {
            c[i] = c[c[i]];
            i = c[i];
        }
        i
    }
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let (zi, zj) = (all[i].0, all[j].0);
            if (zi - zj).norm() <= radius * zi.norm().max(zj.norm()).max(1.0) {
                let (ri, rj) = (root(&mut cluster, i), root(&mut cluster, j));
                cluster[ri] = rj;
            }
        }
    }
    let mut groups: BTreeMap<usize, ([Complex<f64>; 2], [usize; 2])> = BTreeMap::new();
    for (i, (z, from_a)) in all.iter().enumerate() {
        let side = usize::from(!from_a);
        let g = groups.entry(root(&mut cluster, i)).or_default();
        g.0[side] += z;
        g.1[side] += 1;
    }
    groups.values().all(|(sums, counts)| {
        if counts[0] != counts[1] {
            return false;
        }
        let k = counts[0] as f64;
        let (mean_a, mean_b) = (sums[0] / k, sums[1] / k);
        (mean_a - mean_b).norm() <= tol * mean_a.norm().max(1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(z: Complex<f64>, re: f64, im: f64) -> bool {
        (z.re - re).abs() < 1e-9 && (z.im - im).abs() < 1e-9
    }

    #[test]
    fn first_order() {
        let v = hurwitz(&RealPolynomial::monic(&[1.0]).unwrap(), HURWITZ_MARGIN).unwrap();
        assert!(v.stable);
        assert!(close(v.roots[0], -1.0, 0.0));
        let v = hurwitz(&RealPolynomial::monic(&[5.0]).unwrap(), HURWITZ_MARGIN).unwrap();
        assert!(v.stable);
    }

    #[test]
    fn saddle() {
        let v = hurwitz(&RealPolynomial::monic(&[0.0, -1.0]).unwrap(), HURWITZ_MARGIN).unwrap();
        assert!(!v.stable);
        let mut re: Vec<f64> = v.roots.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_routh_examples() {
        let p = RealPolynomial::monic(&[3.0, 3.0, 3.0]).unwrap();
        assert!(hurwitz(&p, HURWITZ_MARGIN).unwrap().stable);
        let p = RealPolynomial::monic(&[1.0, 1.0, 100.0]).unwrap();
        assert!(!hurwitz(&p, HURWITZ_MARGIN).unwrap().stable);
    }

    #[test]
    fn axis_roots_are_not_stable() {
        // s^2 + 1
        let p = RealPolynomial::monic(&[0.0, 1.0]).unwrap();
        assert!(!hurwitz(&p, HURWITZ_MARGIN).unwrap().stable);
    }

    #[test]
    fn degenerate_and_invalid() {
        let p = RealPolynomial::new(vec![1.0]).unwrap();
        assert_eq!(hurwitz(&p, HURWITZ_MARGIN), Err(StabilityError::DegenerateDegree));
        assert_eq!(RealPolynomial::new(vec![2.0, 1.0]), Err(StabilityError::NotMonic));
        assert_eq!(RealPolynomial::new(vec![]), Err(StabilityError::NotMonic));
        assert_eq!(RealPolynomial::monic(&[f64::NAN]), Err(StabilityError::NonFinite));
    }

    #[test]
    fn product_and_text() {
        let a = RealPolynomial::monic(&[1.0]).unwrap();
        let b = RealPolynomial::monic(&[-2.0]).unwrap();
        let p = a.mul(&b);
        assert_eq!(p.coefficients(), &[1.0, -1.0, -2.0]);
        assert_eq!(p.to_text(), "s^2 - s - 2");
        assert_eq!(RealPolynomial::monic(&[3.0, 0.0, 3.0]).unwrap().to_text(), "s^3 + 3 s^2 + 3");
    }

    #[test]
    fn companion_roots_evaluate_to_zero() {
        let p = RealPolynomial::monic(&[2.0, -3.0, 0.5, 7.0]).unwrap();
        for z in p.roots().unwrap() {
            assert!(p.eval(z).norm() < 1e-9);
        }
    }

    #[test]
    fn matching() {
        let a = [Complex::new(-1.0, 2.0), Complex::new(-1.0, -2.0)];
        let b = [Complex::new(-1.0, -2.0), Complex::new(-1.0, 2.0 + 1e-9)];
        assert!(spectra_match(&a, &b, 1e-6));
        assert!(!spectra_match(&a, &b[..1], 1e-6));
        assert!(!spectra_match(&a, &[a[0], a[0]], 1e-6));
        assert!(!spectra_match(&a, &[a[0], Complex::new(-1.0, -2.0 + 1e-5)], 1e-6));
    }

    #[test]
    fn defective_repeated_roots_match() {
        let p = RealPolynomial::monic(&[3.0, 3.0, 1.0]).unwrap();
        let big = p.companion().kronecker(&DMatrix::<f64>::identity(5, 5));
        let expected: Vec<_> = p.roots().unwrap().into_iter().flat_map(|z| [z; 5]).collect();
        assert!(spectra_match(&eigenvalues(&big), &expected, 1e-6));
        assert!(spectra_match(&eigenvalues(&big), &[Complex::new(-1.0, 0.0); 15], 1e-6));
    }
}
