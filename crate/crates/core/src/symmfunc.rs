//! Elementary symmetric functions on real vectors, Garding cone membership
//! and the Newton-Maclaurin inequalities.

use thiserror::Error;

/// Slack used by the inequality checks, relative to the size of both sides.
pub const INEQUALITY_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymmError {
    #[error("curvature vector must have at least one entry")]
    Empty,
    #[error("curvature vector entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("index {what}={value} out of range for n={n}")]
    Domain { what: &'static str, value: usize, n: usize },
    #[error("sigma_{l} vanishes; quotient sigma_{k}/sigma_{l} is singular")]
    SingularQuotient { k: usize, l: usize },
    #[error("vector is outside the Garding cone Gamma_{k}")]
    OutsideCone { k: usize },
}

/// A candidate vector of principal curvatures.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureVector(Vec<f64>);

impl CurvatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SymmError> {
        if values.is_empty() {
            return Err(SymmError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SymmError::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    /// The vector e = (1, ..., 1) of length `n`.
    pub fn ones(n: usize) -> Result<Self, SymmError> {
        Self::new(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> Result<Self, SymmError> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }
}

impl TryFrom<&[f64]> for CurvatureVector {
    type Error = SymmError;

    fn try_from(values: &[f64]) -> Result<Self, Self::Error> {
        Self::new(values.to_vec())
    }
}

fn check_index(what: &'static str, value: usize, n: usize) -> Result<(), SymmError> {
    if value > n {
        Err(SymmError::Domain { what, value, n })
    } else {
        Ok(())
    }
}

/// Coefficients σ_0..=σ_max_k of Π(1 + λ_i x), skipping entry `skip`.
fn sigma_table(values: &[f64], max_k: usize, skip: Option<usize>) -> Vec<f64> {
    let mut coeffs = vec![0.0; max_k + 1];
    coeffs[0] = 1.0;
    let mut seen = 0usize;
    for (i, &lam) in values.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        seen += 1;
        let top = seen.min(max_k);
        for j in (1..=top).rev() {
            coeffs[j] += lam * coeffs[j - 1];
        }
    }
    coeffs
}

/// All of σ_0(λ), ..., σ_n(λ).
pub fn sigma_all(lambda: &CurvatureVector) -> Vec<f64> {
    sigma_table(lambda.values(), lambda.len(), None)
}

/// σ_k(λ), the k-th elementary symmetric polynomial; σ_0 = 1.
///
/// Evaluated by expanding Π(1 + λ_i x) one factor at a time, which costs
/// O(n·k) and never forms individual subset products.
pub fn sigma(lambda: &CurvatureVector, k: usize) -> Result<f64, SymmError> {
    check_index("k", k, lambda.len())?;
    Ok(sigma_table(lambda.values(), k, None)[k])
}

/// σ_k(λ | i): σ_k of λ with entry `i` deleted.
pub fn sigma_without(lambda: &CurvatureVector, k: usize, i: usize) -> Result<f64, SymmError> {
    let n = lambda.len();
    if i >= n {
        return Err(SymmError::Domain { what: "i", value: i, n });
    }
    if k > n - 1 {
        return Ok(0.0);
    }
    Ok(sigma_table(lambda.values(), k, Some(i))[k])
}

/// ∂σ_k/∂λ_i = σ_{k-1}(λ | i) for every i.
pub fn sigma_gradient(lambda: &CurvatureVector, k: usize) -> Result<CurvatureVector, SymmError> {
    let n = lambda.len();
    if k == 0 || k > n {
        return Err(SymmError::Domain { what: "k", value: k, n });
    }
    let grad = (0..n)
        .map(|i| sigma_table(lambda.values(), k - 1, Some(i))[k - 1])
        .collect();
    CurvatureVector::new(grad)
}

/// Strict membership in the open Garding cone Γ_k = {σ_j > 0, 1 ≤ j ≤ k}.
pub fn in_gamma_cone(lambda: &CurvatureVector, k: usize) -> Result<bool, SymmError> {
    let n = lambda.len();
    if k == 0 || k > n {
        return Err(SymmError::Domain { what: "k", value: k, n });
    }
    let s = sigma_table(lambda.values(), k, None);
    Ok(s[1..=k].iter().all(|&v| v > 0.0))
}

/// Smallest j in 1..=k with σ_j(λ) ≤ 0, if any.
pub fn first_cone_violation(lambda: &CurvatureVector, k: usize) -> Result<Option<usize>, SymmError> {
    let n = lambda.len();
    if k == 0 || k > n {
        return Err(SymmError::Domain { what: "k", value: k, n });
    }
    let s = sigma_table(lambda.values(), k, None);
    Ok((1..=k).find(|&j| s[j] <= 0.0))
}

/// Both sides of k(n-l+1)·σ_{l-1}σ_k ≤ l(n-k+1)·σ_l σ_{k-1}.
pub fn newton_maclaurin_sides(lambda: &CurvatureVector, k: usize, l: usize) -> Result<(f64, f64), SymmError> {
    let n = lambda.len();
    check_index("k", k, n)?;
    if l == 0 || l >= k {
        return Err(SymmError::Domain { what: "l", value: l, n });
    }
    let s = sigma_all(lambda);
    let lhs = (k * (n - l + 1)) as f64 * s[l - 1] * s[k];
    let rhs = (l * (n - k + 1)) as f64 * s[l] * s[k - 1];
    Ok((lhs, rhs))
}

pub fn newton_maclaurin_holds(lambda: &CurvatureVector, k: usize, l: usize) -> Result<bool, SymmError> {
    let (lhs, rhs) = newton_maclaurin_sides(lambda, k, l)?;
    Ok(lhs <= rhs + INEQUALITY_SLACK * (lhs.abs() + rhs.abs()))
}

/// σ_k(λ) / σ_l(λ).
pub fn sigma_quotient(lambda: &CurvatureVector, k: usize, l: usize) -> Result<f64, SymmError> {
    let n = lambda.len();
    check_index("k", k, n)?;
    if l >= k {
        return Err(SymmError::Domain { what: "l", value: l, n });
    }
    let s = sigma_table(lambda.values(), k, None);
    if s[l] == 0.0 {
        return Err(SymmError::SingularQuotient { k, l });
    }
    Ok(s[k] / s[l])
}

/// Binomial coefficient as a float; exact for the small n used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// [(σ_k/C(n,k)) / (σ_l/C(n,l))]^{1/(k-l)} for λ ∈ Γ_k.
pub fn normalized_quotient_root(lambda: &CurvatureVector, k: usize, l: usize) -> Result<f64, SymmError> {
    let n = lambda.len();
    let q = sigma_quotient(lambda, k, l)? * binomial(n, l) / binomial(n, k);
    if q < 0.0 {
        return Err(SymmError::OutsideCone { k });
    }
    Ok(q.powf(1.0 / (k - l) as f64))
}

/// Maclaurin-type monotonicity of normalized quotients: the (k,l) root is
/// bounded by the (r,s) root whenever k ≥ r > s ≥ 0, l ≥ s, l < k, λ ∈ Γ_k.
pub fn quotient_monotonicity_holds(
    lambda: &CurvatureVector,
    (k, l): (usize, usize),
    (r, s): (usize, usize),
) -> Result<bool, SymmError> {
    let n = lambda.len();
    if !(k <= n && r <= k && s < r && s <= l && l < k) {
        return Err(SymmError::Domain {
            what: "k,l,r,s",
            value: k,
            n,
        });
    }
    if !in_gamma_cone(lambda, k)? {
        return Err(SymmError::OutsideCone { k });
    }
    let lhs = normalized_quotient_root(lambda, k, l)?;
    let rhs = normalized_quotient_root(lambda, r, s)?;
    Ok(lhs <= rhs + INEQUALITY_SLACK * (lhs.abs() + rhs.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: &[f64]) -> CurvatureVector {
        CurvatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let l = cv(&[1.0, 2.0, 3.0]);
        assert_eq!(sigma(&l, 0).unwrap(), 1.0);
        assert_eq!(sigma(&l, 2).unwrap(), 11.0);
        assert_eq!(sigma(&l, 3).unwrap(), 6.0);
        for n in 1..=9 {
            let e = CurvatureVector::ones(n).unwrap();
            for k in 0..=n {
                assert_eq!(sigma(&e, k).unwrap(), binomial(n, k));
            }
        }
    }

    #[test]
    fn sigma_rejects_large_k() {
        let l = cv(&[1.0, 2.0, 3.0]);
        assert!(matches!(sigma(&l, 4), Err(SymmError::Domain { .. })));
    }

    #[test]
    fn invalid_vectors() {
        assert_eq!(CurvatureVector::new(vec![]), Err(SymmError::Empty));
        assert!(matches!(
            CurvatureVector::new(vec![1.0, f64::NAN]),
            Err(SymmError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn gradient_examples() {
        let g = sigma_gradient(&cv(&[1.0, 2.0, 3.0]), 2).unwrap();
        assert_eq!(g.values()[0], 5.0);
        assert_eq!(g.values()[1], 4.0);
        assert_eq!(g.values()[2], 3.0);

        let c = 1.7;
        for n in 1..=6 {
            let l = cv(&vec![c; n]);
            for k in 1..=n {
                let expected = binomial(n - 1, k - 1) * c.powi(k as i32 - 1);
                for &gi in sigma_gradient(&l, k).unwrap().values() {
                    assert!((gi - expected).abs() <= 1e-12 * expected.abs().max(1.0));
                }
            }
        }
        assert!(sigma_gradient(&cv(&[1.0]), 0).is_err());
        assert!(sigma_gradient(&cv(&[1.0]), 2).is_err());
    }

    #[test]
    fn cone_examples() {
        assert!(in_gamma_cone(&cv(&[1.0, 1.0, 1.0]), 3).unwrap());
        // σ_2 = 0 exactly: the boundary is excluded
        assert!(!in_gamma_cone(&cv(&[2.0, 2.0, -1.0]), 2).unwrap());
        assert!(!in_gamma_cone(&cv(&[5.0, 1.0, -1.0]), 2).unwrap());
        assert!(in_gamma_cone(&cv(&[5.0, 1.0, -1.0]), 1).unwrap());
        assert_eq!(first_cone_violation(&cv(&[5.0, 1.0, -1.0]), 3).unwrap(), Some(2));
        assert!(in_gamma_cone(&cv(&[1.0]), 0).is_err());
    }

    #[test]
    fn newton_maclaurin_examples() {
        let e = cv(&[1.0, 1.0, 1.0]);
        assert_eq!(newton_maclaurin_sides(&e, 2, 1).unwrap(), (18.0, 18.0));
        assert!(newton_maclaurin_holds(&e, 2, 1).unwrap());
        assert!(newton_maclaurin_holds(&cv(&[1.0, 2.0, 3.0]), 2, 1).unwrap());
        // k=2,l=1 on (1,2,3): 2·3·1·11 = 66 ≤ 1·2·6·6 = 72
        assert_eq!(
            newton_maclaurin_sides(&cv(&[1.0, 2.0, 3.0]), 2, 1).unwrap(),
            (66.0, 72.0)
        );
        assert!(newton_maclaurin_holds(&e, 1, 1).is_err());
        assert!(newton_maclaurin_holds(&e, 4, 1).is_err());
    }

    #[test]
    fn newton_maclaurin_equality_at_equal_entries() {
        for n in 2..=7 {
            let l = cv(&vec![0.3; n]);
            for k in 2..=n {
                for j in 1..k {
                    let (lhs, rhs) = newton_maclaurin_sides(&l, k, j).unwrap();
                    assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs(), "n={n} k={k} l={j}");
                    assert!(newton_maclaurin_holds(&l, k, j).unwrap());
                }
            }
        }
    }

    #[test]
    fn quotient_examples() {
        assert_eq!(sigma_quotient(&cv(&[1.0, 1.0]), 2, 1).unwrap(), 0.5);
        let r = 3.0;
        let q = sigma_quotient(&cv(&[1.0 / r, 1.0 / r]), 2, 1).unwrap();
        assert!((q - 1.0 / (2.0 * r)).abs() < 1e-15);
        assert_eq!(
            sigma_quotient(&cv(&[1.0, -1.0]), 2, 1),
            Err(SymmError::SingularQuotient { k: 2, l: 1 })
        );
        assert!(quotient_monotonicity_holds(&cv(&[1.0, 2.0, 3.0]), (3, 1), (2, 0)).unwrap());
        assert!(quotient_monotonicity_holds(&cv(&[1.0, 2.0, 3.0]), (2, 1), (3, 1)).is_err());
    }
}
