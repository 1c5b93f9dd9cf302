//! Star-to-chain mapping of the bath.
//!
//! The chain matrix `T` (diagonal `Ω_j²`, off-diagonal `-D_j`) and the
//! orthogonal transform `O` satisfy `T = O · diag(ω²) · Oᵀ`, with the first
//! row of `O` fixed to `c / ‖c‖`. The production route is Lanczos with full
//! reorthogonalization; the characteristic-polynomial route in
//! [`transform_from_polynomials`] is kept as a small-N cross-check.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::bath::{validate_bath, IoBath, PhaseState};
use crate::error::IepError;

/// Lanczos stops when the residual norm drops below this fraction of `max ω²`.
pub const BREAKDOWN_TOLERANCE: f64 = 1e-12;

/// Largest bath handled by the polynomial oracle.
pub const POLYNOMIAL_ORACLE_LIMIT: usize = 12;

/// Magnitude above which the polynomial oracle gives up.
pub const POLYNOMIAL_BLOWUP: f64 = 1e12;

/// Chain parameters: `Ω_j²`, couplings `D_j > 0` and the tracer coupling `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainBath {
    pub omega_sq: Vec<f64>,
    pub couplings: Vec<f64>,
    pub system_coupling: f64,
}

impl ChainBath {
    pub fn len(&self) -> usize {
        self.omega_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_sq.is_empty()
    }

    /// Chain frequencies `Ω_j`.
    pub fn omega(&self) -> Vec<f64> {
        self.omega_sq.iter().map(|w| w.sqrt()).collect()
    }

    /// Dense tridiagonal matrix `T`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut t = DMatrix::zeros(n, n);
        for j in 0..n {
            t[(j, j)] = self.omega_sq[j];
        }
        for (j, d) in self.couplings.iter().enumerate() {
            t[(j, j + 1)] = -d;
            t[(j + 1, j)] = -d;
        }
        t
    }

    /// Same chain with the tracer coupling replaced.
    pub fn with_system_coupling(&self, d: f64) -> Self {
        Self {
            system_coupling: d,
            ..self.clone()
        }
    }
}

/// Orthogonal map `X = O q` from bath modes to chain modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTransform {
    pub o: DMatrix<f64>,
}

impl ChainTransform {
    pub fn dim(&self) -> usize {
        self.o.nrows()
    }

    /// `‖O Oᵀ - I‖_max`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim();
        let g = &self.o * self.o.transpose() - DMatrix::<f64>::identity(n, n);
        g.amax()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.o
            .row_iter()
            .map(|r| r.iter().cloned().collect())
            .collect()
    }
}

/// Initial data of the chain modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub x0: Vec<f64>,
    pub xdot0: Vec<f64>,
}

impl ChainState {
    pub fn zeros(n: usize) -> Self {
        Self {
            x0: vec![0.0; n],
            xdot0: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }
}

/// Solves the Jacobi inverse eigenvalue problem by Lanczos tridiagonalization
/// of `diag(ω²)` started from `c / ‖c‖`, reorthogonalizing against every
/// previous vector (twice) at each step.
pub fn solve_iep(bath: &IoBath) -> Result<(ChainBath, ChainTransform), IepError> {
    let report = validate_bath(bath);
    if !report.only_zero_couplings() {
        return Err(IepError::InvalidBath(report));
    }
    let n = bath.len();
    let d = bath.total_coupling();
    if d == 0.0 {
        return Err(IepError::ZeroCoupling);
    }
    let spectrum = DVector::from_vec(bath.omega_sq());
    let scale = spectrum.max();

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    basis.push(DVector::from_iterator(n, bath.c.iter().map(|c| c / d)));
    for j in 0..n - 1 {
        let v = &basis[j];
        let mut w = spectrum.component_mul(v);
        let alpha = w.dot(v);
        w.axpy(-alpha, v, 1.0);
        if j > 0 {
            let beta_prev = w.dot(&basis[j - 1]);
            w.axpy(-beta_prev, &basis[j - 1], 1.0);
        }
        for _ in 0..2 {
            for u in &basis {
                let proj = w.dot(u);
                w.axpy(-proj, u, 1.0);
            }
        }
        let beta = w.norm();
        if beta < BREAKDOWN_TOLERANCE * scale {
            return Err(IepError::Breakdown {
                step: j + 1,
                effective_len: j + 1,
            });
        }
        basis.push(w / beta);
    }

    // Alternate signs so that every off-diagonal of T is -D_j with D_j > 0.
    let mut o = DMatrix::zeros(n, n);
    for (j, v) in basis.iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        o.set_row(j, &(v * sign).transpose());
    }

    let omega_sq: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|k| spectrum[k] * o[(j, k)] * o[(j, k)]).sum())
        .collect();
    let couplings: Vec<f64> = (0..n.saturating_sub(1))
        .map(|j| {
            -(0..n)
                .map(|k| spectrum[k] * o[(j, k)] * o[(j + 1, k)])
                .sum::<f64>()
        })
        .collect();

    Ok((
        ChainBath {
            omega_sq,
            couplings,
            system_coupling: d,
        },
        ChainTransform { o },
    ))
}

/// `P_0(λ), …, P_N(λ)`: characteristic polynomials of the leading principal
/// minors of `T`, from `P_{j+1} = (Ω_{j+1}² - λ) P_j - D_j² P_{j-1}`.
pub fn charpoly_sequence(chain: &ChainBath, lambda: f64) -> Vec<f64> {
    let n = chain.len();
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    let mut prev = 0.0;
    for j in 0..n {
        let coupling_sq = if j == 0 {
            0.0
        } else {
            chain.couplings[j - 1].powi(2)
        };
        let next = (chain.omega_sq[j] - lambda) * p[j] - coupling_sq * prev;
        prev = p[j];
        p.push(next);
    }
    p
}

/// Number of eigenvalues of `T` strictly below `lambda` (Sturm count).
pub fn eigenvalues_below(chain: &ChainBath, lambda: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0_f64;
    for j in 0..chain.len() {
        let coupling_sq = if j == 0 {
            0.0
        } else {
            chain.couplings[j - 1].powi(2)
        };
        q = chain.omega_sq[j] - lambda - coupling_sq / q;
        if q == 0.0 {
            q = -f64::EPSILON * (chain.omega_sq[j].abs() + lambda.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues of `T` in ascending order by Sturm bisection.
pub fn chain_spectrum(chain: &ChainBath) -> Vec<f64> {
    let n = chain.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..n {
        let left = if j > 0 {
            chain.couplings[j - 1].abs()
        } else {
            0.0
        };
        let right = if j + 1 < n {
            chain.couplings[j].abs()
        } else {
            0.0
        };
        lo = lo.min(chain.omega_sq[j] - left - right);
        hi = hi.max(chain.omega_sq[j] + left + right);
    }
    let pad = 1e-12 * (lo.abs().max(hi.abs())).max(1.0);
    (lo, hi) = (lo - pad, hi + pad);
    (0..n)
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if eigenvalues_below(chain, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Builds `O` from the characteristic polynomials:
/// `O_{jk} = (c_k/D) · P_{j-1}(λ_k) / Π_{l<j} D_l`, rows renormalized.
///
/// The forward recurrence amplifies any offset between `λ_k` and a true
/// eigenvalue of `T` by many orders of magnitude, and `ω_k²` rounded to
/// `f64` is already such an offset. Each `λ_k` is therefore refined from
/// `ω_k²` by Newton's method on `P_N` and the recurrence is run in
/// double-double arithmetic.
pub fn transform_from_polynomials(
    bath: &IoBath,
    chain: &ChainBath,
) -> Result<ChainTransform, IepError> {
    let n = bath.len();
    if chain.len() != n {
        return Err(IepError::Dimension {
            expected: n,
            got: chain.len(),
        });
    }
    if n > POLYNOMIAL_ORACLE_LIMIT {
        return Err(IepError::Dimension {
            expected: POLYNOMIAL_ORACLE_LIMIT,
            got: n,
        });
    }
    let d = bath.total_coupling();
    if d == 0.0 {
        return Err(IepError::ZeroCoupling);
    }

    let mut inverse_products = Vec::with_capacity(n);
    let mut acc = TwoFloat::from(1.0);
    for j in 0..n {
        if j > 0 {
            acc /= chain.couplings[j - 1];
        }
        let magnitude = f64::from(acc).abs();
        if !magnitude.is_finite() || magnitude > POLYNOMIAL_BLOWUP {
            return Err(IepError::Unstable { row: j, magnitude });
        }
        inverse_products.push(acc);
    }

    let mut o = DMatrix::zeros(n, n);
    for (k, w) in bath.omega.iter().enumerate() {
        let lambda = refine_eigenvalue(chain, TwoFloat::new_mul(*w, *w));
        let (p, _) = charpoly_sequence_dd(chain, lambda);
        for j in 0..n {
            let magnitude = f64::from(p[j]).abs();
            if !magnitude.is_finite() || magnitude > POLYNOMIAL_BLOWUP {
                return Err(IepError::Unstable { row: j, magnitude });
            }
            o[(j, k)] = f64::from(p[j] * inverse_products[j] * (bath.c[k] / d));
        }
    }
    for j in 0..n {
        let norm = o.row(j).norm();
        if norm > 0.0 {
            o.row_mut(j).scale_mut(1.0 / norm);
        }
    }
    Ok(ChainTransform { o })
}

/// `P_0 … P_N` and their `λ`-derivatives in double-double arithmetic.
fn charpoly_sequence_dd(chain: &ChainBath, lambda: TwoFloat) -> (Vec<TwoFloat>, Vec<TwoFloat>) {
    let n = chain.len();
    let zero = TwoFloat::from(0.0);
    let mut p = vec![TwoFloat::from(1.0)];
    let mut dp = vec![zero];
    let (mut prev, mut dprev) = (zero, zero);
    for j in 0..n {
        let coupling_sq = if j == 0 {
            zero
        } else {
            TwoFloat::new_mul(chain.couplings[j - 1], chain.couplings[j - 1])
        };
        let shift = TwoFloat::from(chain.omega_sq[j]) - lambda;
        let next = shift * p[j] - coupling_sq * prev;
        let dnext = shift * dp[j] - p[j] - coupling_sq * dprev;
        prev = p[j];
        dprev = dp[j];
        p.push(next);
        dp.push(dnext);
    }
    (p, dp)
}

fn refine_eigenvalue(chain: &ChainBath, mut lambda: TwoFloat) -> TwoFloat {
    for _ in 0..4 {
        let (p, dp) = charpoly_sequence_dd(chain, lambda);
        let (value, slope) = (p[chain.len()], dp[chain.len()]);
        if f64::from(slope) == 0.0 {
            break;
        }
        let step = value / slope;
        if !f64::from(step).is_finite() {
            break;
        }
        lambda -= step;
    }
    lambda
}

/// `X(0) = O q(0)`, `Ẋ(0) = O q̇(0)`.
pub fn map_state(transform: &ChainTransform, phase: &PhaseState) -> Result<ChainState, IepError> {
    let n = transform.dim();
    for got in [phase.q0.len(), phase.qdot0.len()] {
        if got != n {
            return Err(IepError::Dimension { expected: n, got });
        }
    }
    let apply = |v: &[f64]| {
        (&transform.o * DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    };
    Ok(ChainState {
        x0: apply(&phase.q0),
        xdot0: apply(&phase.qdot0),
    })
}

/// Inverse of [`map_state`] on the bath part: `q = Oᵀ X`.
pub fn unmap_state(
    transform: &ChainTransform,
    state: &ChainState,
) -> Result<(Vec<f64>, Vec<f64>), IepError> {
    let n = transform.dim();
    for got in [state.x0.len(), state.xdot0.len()] {
        if got != n {
            return Err(IepError::Dimension { expected: n, got });
        }
    }
    let apply = |v: &[f64]| {
        (transform.o.transpose() * DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    };
    Ok((apply(&state.x0), apply(&state.xdot0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn golden_bath() -> IoBath {
        IoBath::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn two_mode_golden_chain() {
        let (chain, t) = solve_iep(&golden_bath()).unwrap();
        assert!((chain.system_coupling - SQRT_2).abs() < 1e-15);
        assert!((chain.omega_sq[0] - 2.5).abs() < 1e-14);
        assert!((chain.omega_sq[1] - 2.5).abs() < 1e-14);
        assert!((chain.couplings[0] - 1.5).abs() < 1e-14);
        let h = 1.0 / SQRT_2;
        let expected = DMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
        assert!((&t.o - expected).amax() < 1e-14);
    }

    #[test]
    fn single_mode_chain() {
        let bath = IoBath::new(vec![1.7], vec![0.3]).unwrap();
        let (chain, t) = solve_iep(&bath).unwrap();
        assert!((chain.system_coupling - 0.3).abs() < 1e-16);
        assert!((chain.omega_sq[0] - 1.7 * 1.7).abs() < 1e-15);
        assert!(chain.couplings.is_empty());
        assert_eq!(t.o, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn eigenvector_start_breaks_down() {
        let bath = IoBath::new(vec![1.0, 2.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(
            solve_iep(&bath),
            Err(IepError::Breakdown {
                step: 1,
                effective_len: 1
            })
        );
        let zero = IoBath::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(solve_iep(&zero), Err(IepError::ZeroCoupling));
        let dup = IoBath::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(solve_iep(&dup), Err(IepError::InvalidBath(_))));
    }

    #[test]
    fn charpoly_examples() {
        let (chain, _) = solve_iep(&golden_bath()).unwrap();
        let p = charpoly_sequence(&chain, 1.0);
        assert!(p[2].abs() < 1e-13, "{}", p[2]);
        let p0 = charpoly_sequence(&chain, 0.0);
        assert!((p0[2] - 4.0).abs() < 1e-13);
        assert_eq!(p0[0], 1.0);

        let single = ChainBath {
            omega_sq: vec![2.0],
            couplings: vec![],
            system_coupling: 1.0,
        };
        assert_eq!(charpoly_sequence(&single, 2.0), vec![1.0, 0.0]);
    }

    #[test]
    fn sturm_spectrum_recovers_bath() {
        let bath =
            IoBath::new(vec![0.4, 0.9, 1.3, 2.2, 2.9], vec![0.5, 0.1, 0.7, 0.3, 0.2]).unwrap();
        let (chain, _) = solve_iep(&bath).unwrap();
        let spectrum = chain_spectrum(&chain);
        for (got, w) in spectrum.iter().zip(&bath.omega) {
            assert!((got - w * w).abs() < 1e-12 * w * w, "{got} vs {}", w * w);
        }
        assert_eq!(eigenvalues_below(&chain, 1.0), 2);
    }

    #[test]
    fn polynomial_oracle_golden_rows() {
        let bath = golden_bath();
        let (chain, _) = solve_iep(&bath).unwrap();
        let t = transform_from_polynomials(&bath, &chain).unwrap();
        let h = 1.0 / SQRT_2;
        assert!((t.o[(0, 0)] - h).abs() < 1e-15 && (t.o[(0, 1)] - h).abs() < 1e-15);
        assert!((t.o[(1, 0)] - h).abs() < 1e-14 && (t.o[(1, 1)] + h).abs() < 1e-14);

        let single = IoBath::new(vec![2.0], vec![0.5]).unwrap();
        let (chain, _) = solve_iep(&single).unwrap();
        let t = transform_from_polynomials(&single, &chain).unwrap();
        assert_eq!(t.o, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn polynomial_oracle_handles_unequal_weights() {
        let bath = IoBath::new(vec![0.5, 1.1, 1.6, 2.4], vec![0.9, 0.2, 0.4, 0.6]).unwrap();
        let (chain, lanczos) = solve_iep(&bath).unwrap();
        let poly = transform_from_polynomials(&bath, &chain).unwrap();
        assert!((poly.o - lanczos.o).amax() < 1e-12);
    }

    #[test]
    fn map_state_examples() {
        let (_, t) = solve_iep(&golden_bath()).unwrap();
        let phase = PhaseState::new(0.0, 0.0, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let s = map_state(&t, &phase).unwrap();
        assert!((s.x0[0] - SQRT_2).abs() < 1e-15 && s.x0[1].abs() < 1e-15);
        assert_eq!(s.xdot0, vec![0.0, 0.0]);

        let col: Vec<f64> = t.o.row(1).iter().cloned().collect();
        let s = map_state(&t, &PhaseState::new(0.0, 0.0, col, vec![0.0; 2]).unwrap()).unwrap();
        assert!((s.x0[1] - 1.0).abs() < 1e-15 && s.x0[0].abs() < 1e-15);

        let short = PhaseState::new(0.0, 0.0, vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            map_state(&t, &short),
            Err(IepError::Dimension { .. })
        ));
    }
}
