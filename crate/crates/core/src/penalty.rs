//! Row-wise group penalties `ρ(B; λ) = Σⱼ ρ̃(‖Bⱼ‖₂; λ)` and the exact
//! minimizers of their one-row subproblems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const DEFAULT_MCP_GAMMA: f64 = 3.0;
pub const DEFAULT_SCAD_GAMMA: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenaltyKind {
    GroupLasso,
    GroupMcp,
    GroupScad,
    CappedL1,
}

impl PenaltyKind {
    pub fn is_convex(self) -> bool {
        matches!(self, PenaltyKind::GroupLasso)
    }

    /// Short label used in tables and on the command line.
    pub fn label(self) -> &'static str {
        match self {
            PenaltyKind::GroupLasso => "grLasso",
            PenaltyKind::GroupMcp => "grMCP",
            PenaltyKind::GroupScad => "grSCAD",
            PenaltyKind::CappedL1 => "cappedL1",
        }
    }
}

/// Penalty kind, level `λ ≥ 0`, and shape parameter.
///
/// `shape` is γ for MCP (> 1) and SCAD (> 2), the cap for capped-ℓ1 (> 0),
/// and unused for the group lasso.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    kind: PenaltyKind,
    lambda: f64,
    shape: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64, shape: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "penalty level must be finite and nonnegative, got {lambda}"
            )));
        }
        let ok = match kind {
            PenaltyKind::GroupLasso => true,
            PenaltyKind::GroupMcp => shape > 1.0,
            PenaltyKind::GroupScad => shape > 2.0,
            PenaltyKind::CappedL1 => shape > 0.0,
        };
        if !ok || !shape.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "shape {shape} invalid for {kind:?}"
            )));
        }
        Ok(Self { kind, lambda, shape })
    }

    /// Penalty with the conventional shape: γ = 3 for MCP, γ = 3.7 for
    /// SCAD, and a cap equal to `λ` for capped-ℓ1.
    pub fn with_default_shape(kind: PenaltyKind, lambda: f64) -> Result<Self> {
        let shape = match kind {
            PenaltyKind::GroupLasso => 1.0,
            PenaltyKind::GroupMcp => DEFAULT_MCP_GAMMA,
            PenaltyKind::GroupScad => DEFAULT_SCAD_GAMMA,
            PenaltyKind::CappedL1 => {
                if lambda > 0.0 {
                    lambda
                } else {
                    1.0
                }
            }
        };
        Self::new(kind, lambda, shape)
    }

    pub fn group_lasso(lambda: f64) -> Result<Self> {
        Self::new(PenaltyKind::GroupLasso, lambda, 1.0)
    }

    pub fn group_mcp(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::GroupMcp, lambda, gamma)
    }

    pub fn group_scad(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::GroupScad, lambda, gamma)
    }

    pub fn capped_l1(lambda: f64, cap: f64) -> Result<Self> {
        Self::new(PenaltyKind::CappedL1, lambda, cap)
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// Same kind and shape at another level. Capped-ℓ1 keeps its cap.
    pub fn at_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.kind, lambda, self.shape)
    }

    /// `ρ̃(t; λ)` for a row norm `t ≥ 0`.
    pub fn scalar(&self, t: f64) -> f64 {
        let (l, g) = (self.lambda, self.shape);
        match self.kind {
            PenaltyKind::GroupLasso => l * t,
            PenaltyKind::GroupMcp => {
                if t <= g * l {
                    l * t - t * t / (2.0 * g)
                } else {
                    g * l * l / 2.0
                }
            }
            PenaltyKind::GroupScad => {
                if t <= l {
                    l * t
                } else if t <= g * l {
                    (2.0 * g * l * t - t * t - l * l) / (2.0 * (g - 1.0))
                } else {
                    l * l * (g + 1.0) / 2.0
                }
            }
            PenaltyKind::CappedL1 => l * t.min(g),
        }
    }

    /// Subdifferential of `ρ̃` at `t > 0` as a closed interval.
    pub(crate) fn derivative_interval(&self, t: f64) -> (f64, f64) {
        let (l, g) = (self.lambda, self.shape);
        let d = match self.kind {
            PenaltyKind::GroupLasso => l,
            PenaltyKind::GroupMcp => (l - t / g).max(0.0),
            PenaltyKind::GroupScad => {
                if t <= l {
                    l
                } else {
                    ((g * l - t) / (g - 1.0)).max(0.0)
                }
            }
            PenaltyKind::CappedL1 => {
                if t < g {
                    l
                } else if t > g {
                    0.0
                } else {
                    return (0.0, l);
                }
            }
        };
        (d, d)
    }

    /// Right derivative of `ρ̃` at zero; radius of the subdifferential ball
    /// of the row penalty at a zero row.
    pub(crate) fn slope_at_zero(&self) -> f64 {
        match self.kind {
            PenaltyKind::CappedL1 if self.shape == 0.0 => 0.0,
            _ => self.lambda,
        }
    }

    /// Minimizer over `t ≥ 0` of `curvature/2 · (t − z)² + ρ̃(t)`.
    pub(crate) fn threshold_norm(&self, z: f64, curvature: f64) -> Result<f64> {
        let (l, g, c) = (self.lambda, self.shape, curvature);
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "row curvature must be positive, got {c}"
            )));
        }
        if l == 0.0 {
            return Ok(z);
        }
        let t = match self.kind {
            PenaltyKind::GroupLasso => (z - l / c).max(0.0),
            PenaltyKind::GroupMcp => {
                if c * g <= 1.0 {
                    return Err(Error::IllPosedSubproblem { curvature: c, gamma: g });
                }
                if c * z <= l {
                    0.0
                } else if z <= g * l {
                    (c * z - l) / (c - 1.0 / g)
                } else {
                    z
                }
            }
            PenaltyKind::GroupScad => {
                let mut cand = vec![0.0, (z - l / c).clamp(0.0, l), l, g * l, z.max(g * l)];
                let denom = c - 1.0 / (g - 1.0);
                if denom != 0.0 {
                    let t = (c * z - g * l / (g - 1.0)) / denom;
                    cand.push(t.clamp(l, g * l));
                }
                self.best_candidate(&cand, z, c)
            }
            PenaltyKind::CappedL1 => {
                let cand = [0.0, (z - l / c).clamp(0.0, g), z.max(g)];
                self.best_candidate(&cand, z, c)
            }
        };
        Ok(t)
    }

    fn best_candidate(&self, cand: &[f64], z: f64, c: f64) -> f64 {
        let f = |t: f64| 0.5 * c * (t - z) * (t - z) + self.scalar(t);
        cand.iter()
            .copied()
            .fold((f64::INFINITY, 0.0), |(best, arg), t| {
                let v = f(t);
                if v < best {
                    (v, t)
                } else {
                    (best, arg)
                }
            })
            .1
    }
}

/// `ρ(B; λ)`, computed from the row norms of `b`.
pub fn penalty_value(b: &DenseMatrix, spec: &PenaltySpec) -> f64 {
    b.row_norms().into_iter().map(|t| spec.scalar(t)).sum()
}

/// Exact minimizer of `curvature/2 · ‖b − v‖² + ρ̃(‖b‖)`.
///
/// The result is always a nonnegative multiple of `v`.
pub fn group_threshold(v: &[f64], curvature: f64, spec: &PenaltySpec) -> Result<Vec<f64>> {
    let z = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let t = spec.threshold_norm(z, curvature)?;
    if z == 0.0 || t == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let scale = t / z;
    Ok(v.iter().map(|x| x * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_objective(spec: &PenaltySpec, v: &[f64], b: &[f64], c: f64) -> f64 {
        let d2: f64 = v.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let t = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        0.5 * c * d2 + spec.scalar(t)
    }

    #[test]
    fn validates_shapes() {
        assert!(PenaltySpec::group_lasso(-1.0).is_err());
        assert!(PenaltySpec::group_mcp(1.0, 1.0).is_err());
        assert!(PenaltySpec::group_scad(1.0, 2.0).is_err());
        assert!(PenaltySpec::capped_l1(1.0, 0.0).is_err());
        assert!(PenaltySpec::group_mcp(1.0, 1.01).is_ok());
    }

    #[test]
    fn defaults() {
        let mcp = PenaltySpec::with_default_shape(PenaltyKind::GroupMcp, 0.5).unwrap();
        assert_eq!(mcp.shape(), 3.0);
        let scad = PenaltySpec::with_default_shape(PenaltyKind::GroupScad, 0.5).unwrap();
        assert_eq!(scad.shape(), 3.7);
        let cap = PenaltySpec::with_default_shape(PenaltyKind::CappedL1, 0.5).unwrap();
        assert_eq!(cap.shape(), 0.5);
    }

    #[test]
    fn zero_matrix_has_zero_penalty() {
        let b = DenseMatrix::zeros(3, 2);
        for kind in [
            PenaltyKind::GroupLasso,
            PenaltyKind::GroupMcp,
            PenaltyKind::GroupScad,
            PenaltyKind::CappedL1,
        ] {
            let spec = PenaltySpec::with_default_shape(kind, 1.3).unwrap();
            assert_eq!(penalty_value(&b, &spec), 0.0);
        }
    }

    #[test]
    fn group_lasso_value() {
        let b = DenseMatrix::from_row_major(2, 2, &[3.0, 4.0, 0.0, 0.0]).unwrap();
        let spec = PenaltySpec::group_lasso(2.0).unwrap();
        assert!((penalty_value(&b, &spec) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_mcp_matches_integrated_derivative() {
        let spec = PenaltySpec::group_mcp(1.0, 3.0).unwrap();
        // Midpoint rule on (λ − t/γ)₊ over [0, 5].
        let n = 1_000_000;
        let h = 5.0 / n as f64;
        let integral: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                (1.0 - t / 3.0).max(0.0) * h
            })
            .sum();
        assert!((integral - 1.5).abs() < 1e-9);
        assert!((spec.scalar(5.0) - integral).abs() < 1e-9);
    }

    #[test]
    fn lasso_threshold_kills_small_rows() {
        let spec = PenaltySpec::group_lasso(2.0).unwrap();
        let out = group_threshold(&[0.6, 0.8], 2.0, &spec).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
        let free = PenaltySpec::group_lasso(0.0).unwrap();
        assert_eq!(group_threshold(&[0.6, -0.8], 2.0, &free).unwrap(), vec![0.6, -0.8]);
        // ‖v‖ = 5, λ/c = 1 → shrink to norm 4.
        let out = group_threshold(&[3.0, 4.0], 1.0, &PenaltySpec::group_lasso(1.0).unwrap()).unwrap();
        assert!((out[0] - 2.4).abs() < 1e-12 && (out[1] - 3.2).abs() < 1e-12);
    }

    #[test]
    fn mcp_threshold_matches_grid_search() {
        let spec = PenaltySpec::group_mcp(1.0, 3.0).unwrap();
        let v = [2.0, 0.0];
        let out = group_threshold(&v, 1.0, &spec).unwrap();
        // Scalar oracle: grid over t = ‖b‖ in [0, 4] at resolution 1e-6.
        let f = |t: f64| 0.5 * (t - 2.0) * (t - 2.0) + spec.scalar(t);
        let (mut best_t, mut best_f) = (0.0, f(0.0));
        for i in 0..=4_000_000 {
            let t = i as f64 * 1e-6;
            let val = f(t);
            if val < best_f {
                best_f = val;
                best_t = t;
            }
        }
        assert!((out[0] - best_t).abs() < 2e-6, "{} vs {best_t}", out[0]);
        assert!((out[0] - 1.5).abs() < 1e-12);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn mcp_rejects_ill_posed_curvature() {
        let spec = PenaltySpec::group_mcp(1.0, 3.0).unwrap();
        let err = group_threshold(&[1.0], 0.3, &spec).unwrap_err();
        assert!(matches!(err, Error::IllPosedSubproblem { .. }));
    }

    #[test]
    fn scad_and_capped_match_grid_search() {
        let specs = [
            PenaltySpec::group_scad(1.0, 3.7).unwrap(),
            PenaltySpec::group_scad(0.7, 2.5).unwrap(),
            PenaltySpec::capped_l1(1.0, 0.8).unwrap(),
        ];
        for spec in specs {
            for &c in &[0.4, 1.0, 3.0] {
                for &z in &[0.1, 0.9, 1.4, 2.2, 3.0, 5.0] {
                    let t = spec.threshold_norm(z, c).unwrap();
                    let f = |t: f64| 0.5 * c * (t - z) * (t - z) + spec.scalar(t);
                    let grid_min = (0..=800_000)
                        .map(|i| f(i as f64 * 1e-5))
                        .fold(f64::INFINITY, f64::min);
                    assert!(f(t) <= grid_min + 1e-9, "{spec:?} c={c} z={z}");
                }
            }
        }
    }

    #[test]
    fn threshold_beats_random_perturbations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let specs = [
            PenaltySpec::group_lasso(0.8).unwrap(),
            PenaltySpec::group_mcp(0.8, 3.0).unwrap(),
            PenaltySpec::group_scad(0.8, 3.7).unwrap(),
            PenaltySpec::capped_l1(0.8, 0.8).unwrap(),
        ];
        for spec in specs {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let c = 1.7;
            let b = group_threshold(&v, c, &spec).unwrap();
            let f0 = row_objective(&spec, &v, &b, c);
            for _ in 0..1000 {
                let pert: Vec<f64> = b.iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
                assert!(f0 <= row_objective(&spec, &v, &pert, c) + 1e-12);
            }
        }
    }
}
