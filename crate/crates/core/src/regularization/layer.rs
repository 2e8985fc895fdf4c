//! The switching layer in the fast variable `v = y/ε`: the layer field,
//! critical manifolds, fold points and the first-order slow manifold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{OscillatorParams, Side, SwitchingModel};
use crate::roots::bisect;
use crate::sliding::SlidingBranch;

/// A point `(x, v)` of the regularized system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    pub x: f64,
    pub v: f64,
}

impl LayerState {
    pub fn new(x: f64, v: f64) -> Self {
        LayerState { x, v }
    }

    pub fn in_layer(&self) -> bool {
        self.v.abs() < 1.0
    }
}

/// The scalar equation `v' = −av − f(x, ψ(v))/ε` for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSystem {
    pub model: SwitchingModel,
    pub params: OscillatorParams,
}

impl LayerSystem {
    pub fn new(model: SwitchingModel, params: &OscillatorParams) -> Result<Self> {
        if !params.is_regularized() {
            return Err(Error::InvalidParameter(format!(
                "layer dynamics need ε > 0 (got ε = {})",
                params.epsilon
            )));
        }
        Ok(LayerSystem { model, params: params.clone() })
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    pub fn a(&self) -> f64 {
        self.params.a
    }

    /// `f(x, ψ(v))`.
    pub fn forcing(&self, x: f64, v: f64) -> f64 {
        self.params.frequencies.forcing_unchecked(self.model, x, self.params.psi.psi(v))
    }

    /// `dv/dx`.
    pub fn rhs(&self, x: f64, v: f64) -> f64 {
        -self.params.a * v - self.forcing(x, v) / self.params.epsilon
    }

    /// `∂(dv/dx)/∂v`; continuous across `|v| = 1` because `ψ'(±1) = 0`.
    pub fn jacobian(&self, x: f64, v: f64) -> f64 {
        let psi = &self.params.psi;
        let dpsi = psi.psi_prime(v);
        if dpsi == 0.0 {
            return -self.params.a;
        }
        let df = self.params.frequencies.forcing_dlambda(self.model, x, psi.psi(v));
        -self.params.a - df * dpsi / self.params.epsilon
    }
}

/// `(dx, dv)` of the regularized system.
pub fn layer_field(model: SwitchingModel, params: &OscillatorParams, state: LayerState) -> Result<(f64, f64)> {
    let sys = LayerSystem::new(model, params)?;
    Ok((1.0, sys.rhs(state.x, state.v)))
}

/// Critical manifold `v₀(x) = ψ⁻¹(λ(x))` of a sliding branch.
pub fn critical_branch(branch: &SlidingBranch, x: f64, params: &OscillatorParams) -> Result<f64> {
    params.require_standard("the critical manifold")?;
    let lambda = branch.lambda(x)?;
    params.psi.inverse(lambda)
}

/// `v₀'(x) = λ'(x)/ψ'(v₀)`.
pub fn critical_branch_slope(branch: &SlidingBranch, x: f64, params: &OscillatorParams) -> Result<f64> {
    let v0 = critical_branch(branch, x, params)?;
    let dpsi = params.psi.psi_prime(v0);
    if dpsi <= 0.0 {
        return Err(Error::Domain(format!("critical manifold is vertical at x = {x}")));
    }
    Ok(branch.dlambda(x) / dpsi)
}

/// `ε·(dv/dx)` on the boundary `v = ±1`: `−aε(±1) − sin(πω±x)`.
pub fn boundary_equation(side: Side, x: f64, params: &OscillatorParams) -> f64 {
    let s = side.sign();
    -params.a * params.epsilon * s - params.frequencies.get(side).sin_pi(x)
}

/// Fold point `x^±_{ε,n}` where the layer field is tangent to `v = ±1`.
pub fn fold_points(side: Side, n: i64, params: &OscillatorParams) -> Result<f64> {
    let ae = params.a * params.epsilon;
    if ae >= 1.0 {
        return Err(Error::InvalidParameter(format!("fold points need aε < 1 (got {ae})")));
    }
    let w = params.omega(side);
    let base = n as f64 / w;
    let sign = if n.rem_euclid(2) == 1 { 1.0 } else { -1.0 };
    let offset = sign * ae.asin() / (PI * w);
    Ok(match side {
        Side::Plus => base + offset,
        Side::Minus => base - offset,
    })
}

/// Fold point located by bisection of [`boundary_equation`] within a
/// quarter-period of `n/ω`. Used as an independent check of the closed form.
pub fn fold_point_by_bisection(side: Side, n: i64, params: &OscillatorParams) -> Result<f64> {
    let w = params.omega(side);
    let centre = n as f64 / w;
    let half = 0.25 / w;
    let g = |x: f64| boundary_equation(side, x, params);
    Ok(bisect(g, centre - half, centre + half, 1e-15)?.root)
}

/// Slow manifold to first order in `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlowManifoldPoint {
    pub v0: f64,
    pub v1: f64,
    /// `v₀ + ε v₁`.
    pub v: f64,
}

/// Minimum `ψ'(v₀)` accepted by the expansion; below it a fold is too close.
pub const FOLD_GUARD: f64 = 0.1;

/// `v = v₀ + ε v₁` with `v₁ = −(v₀' + a v₀)/(∂f/∂λ · ψ'(v₀))`.
///
/// For nonlinear branch `2n` this is `v₁ = −2(v₀' + a v₀)/(πx ψ'(v₀))`.
pub fn slow_manifold_expansion(branch: &SlidingBranch, x: f64, params: &OscillatorParams) -> Result<SlowManifoldPoint> {
    let v0 = critical_branch(branch, x, params)?;
    let dpsi = params.psi.psi_prime(v0);
    if dpsi < FOLD_GUARD {
        return Err(Error::Domain(format!(
            "x = {x} too close to a fold of branch {} (ψ'(v₀) = {dpsi:.3e})",
            branch.id()
        )));
    }
    let dv0 = branch.dlambda(x) / dpsi;
    let df = params.frequencies.forcing_dlambda(branch.model, x, params.psi.psi(v0));
    let v1 = -(dv0 + params.a * v0) / (df * dpsi);
    Ok(SlowManifoldPoint { v0, v1, v: v0 + params.epsilon * v1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Frequencies;
    use crate::sliding::nonlinear_branches;
    use proptest::prelude::*;

    fn params(a: f64, eps: f64) -> OscillatorParams {
        OscillatorParams::new(a).unwrap().with_epsilon(eps).unwrap()
    }

    #[test]
    fn layer_field_requires_epsilon() {
        let p = OscillatorParams::new(0.1).unwrap();
        assert!(layer_field(SwitchingModel::Linear, &p, LayerState::new(0.3, 0.0)).is_err());
    }

    #[test]
    fn layer_field_examples() {
        let p = params(0.01, 0.0025);
        let (dx, dv) = layer_field(SwitchingModel::Nonlinear, &p, LayerState::new(2.0, 0.0)).unwrap();
        assert_eq!(dx, 1.0);
        assert!(dv.abs() < 1e-10);
        // generic point: core forcing scaled by 1/ε
        let (x, v) = (0.37, 0.4);
        let lam = p.psi.psi(v);
        for model in [SwitchingModel::Linear, SwitchingModel::Nonlinear] {
            let f = crate::model::forcing(model, x, lam).unwrap();
            let (_, dv) = layer_field(model, &p, LayerState::new(x, v)).unwrap();
            assert!((dv - (-0.01 * v - f / 0.0025)).abs() < 1e-9);
        }
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let p = params(0.3, 0.01);
        for model in [SwitchingModel::Linear, SwitchingModel::Nonlinear] {
            let sys = LayerSystem::new(model, &p).unwrap();
            for &(x, v) in &[(0.3, 0.2), (3.1, -0.7), (17.4, 0.55)] {
                let h = 1e-6;
                let fd = (sys.rhs(x, v + h) - sys.rhs(x, v - h)) / (2.0 * h);
                assert!((fd - sys.jacobian(x, v)).abs() < 1e-5 * fd.abs().max(1.0));
            }
            assert_eq!(sys.jacobian(1.0, 1.5), -0.3);
        }
    }

    #[test]
    fn critical_branch_examples() {
        let p = params(0.01, 0.0025);
        let lin = SlidingBranch::linear(0);
        assert!(critical_branch(&lin, 1.0, &p).unwrap().abs() < 1e-13);
        let n2 = SlidingBranch::nonlinear(2).unwrap();
        assert!(critical_branch(&n2, 2.0, &p).unwrap().abs() < 1e-13);
        let n1 = SlidingBranch::nonlinear(1).unwrap();
        assert!(critical_branch(&n1, 1.0, &p).unwrap().abs() < 1e-13);
        // ψ(v) = 0.5 at x = 0.8: v³ − 3v + 1 = 0
        let v = critical_branch(&n1, 0.8, &p).unwrap();
        let oracle = bisect(|v| 0.5 * v * (3.0 - v * v) - 0.5, -1.0, 1.0, 1e-15).unwrap().root;
        assert!((v - oracle).abs() < 1e-13);
        assert!(critical_branch(&n1, 2.5, &p).is_err());
    }

    #[test]
    fn critical_branches_are_nullclines() {
        let p = params(0.01, 0.001);
        let mut worst: f64 = 0.0;
        for b in nonlinear_branches((0.7, 40.0)).iter().chain(crate::sliding::linear_branches((0.0, 40.0)).iter()) {
            for i in 1..200 {
                let x = b.domain.0 + b.width() * i as f64 / 200.0;
                let v0 = critical_branch(b, x, &p).unwrap();
                let r = Frequencies::STANDARD.forcing_unchecked(b.model, x, p.psi.psi(v0));
                worst = worst.max(r.abs());
            }
        }
        assert!(worst < 1e-12, "worst residual {worst:e}");
    }

    #[test]
    fn normal_hyperbolicity_sign_follows_branch_stability() {
        let p = params(0.01, 0.001);
        for b in nonlinear_branches((0.7, 30.0)).iter().chain(crate::sliding::linear_branches((0.0, 20.0)).iter()) {
            let sys = LayerSystem::new(b.model, &p).unwrap();
            let x = b.domain.0 + 0.5 * b.width();
            let v0 = critical_branch(b, x, &p).unwrap();
            let attracting = sys.jacobian(x, v0) < 0.0;
            assert_eq!(attracting, b.stability == crate::sliding::Stability::Attracting, "{}", b.id());
        }
    }

    #[test]
    fn fold_points_at_zero_epsilon() {
        let p = OscillatorParams::new(0.5).unwrap();
        assert_eq!(fold_points(Side::Plus, 5, &p).unwrap(), 10.0 / 3.0);
        assert_eq!(fold_points(Side::Minus, 3, &p).unwrap(), 6.0);
    }

    #[test]
    fn fold_points_match_boundary_roots() {
        for ae in [1e-5, 1e-3] {
            let p = params(0.01, ae / 0.01);
            for side in [Side::Plus, Side::Minus] {
                for n in 0..12 {
                    let closed = fold_points(side, n, &p).unwrap();
                    let root = fold_point_by_bisection(side, n, &p).unwrap();
                    assert!((closed - root).abs() < 1e-12, "{side} n={n}: {closed} vs {root}");
                }
            }
        }
        let p = params(0.01, 0.0025);
        let x = fold_points(Side::Minus, 2, &p).unwrap();
        assert!(x > 4.0 && boundary_equation(Side::Minus, x, &p).abs() < 1e-15);
    }

    #[test]
    fn fold_offsets_alternate() {
        let p = params(1.0, 1e-3);
        let d1 = fold_points(Side::Plus, 1, &p).unwrap() - 2.0 / 3.0;
        let d2 = fold_points(Side::Plus, 2, &p).unwrap() - 4.0 / 3.0;
        assert!(d1 > 0.0 && d2 < 0.0);
    }

    #[test]
    fn slow_manifold_correction_is_order_one_over_n() {
        let p = params(0.01, 1e-3);
        let mut scaled = Vec::new();
        for n in 2..=20 {
            let b = SlidingBranch::nonlinear(2 * n).unwrap();
            let s = slow_manifold_expansion(&b, 2.0 * n as f64, &p).unwrap();
            scaled.push(s.v1.abs() * n as f64);
        }
        // bounded by its n = 2 value: |v₁| ≤ C/n (at the centre it even decays like 1/n²)
        assert!(scaled.iter().all(|&s| s <= scaled[0] * (1.0 + 1e-12)), "{scaled:?}");
        assert!(scaled.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn slow_manifold_at_zero_damping() {
        // a → 0 at x = 2n: v₀ = 0, v₁ = −2 v₀'/(πx ψ'(0)) with v₀' = λ'/ψ'(0)
        let p = params(1e-12, 1e-3);
        let n = 5;
        let b = SlidingBranch::nonlinear(2 * n).unwrap();
        let x = 2.0 * n as f64;
        let s = slow_manifold_expansion(&b, x, &p).unwrap();
        assert!(s.v0.abs() < 1e-13);
        let dv0 = (-2.0 * (2 * n) as f64 / (x * x)) / 1.5;
        assert!((s.v1 - (-2.0 * dv0 / (PI * x * 1.5))).abs() < 1e-12);
        assert!(s.v1 > 0.0);
        assert!(slow_manifold_expansion(&b, 19.99, &p).is_err());
    }

    proptest! {
        #[test]
        fn slow_manifold_residual_is_second_order(n in 3i64..20, t in 0.3f64..0.7) {
            // substituting v₀ + εv₁ leaves an O(ε²)·(1/ε) = O(ε) residual in the layer field
            let b = SlidingBranch::nonlinear(2 * n).unwrap();
            let x = b.domain.0 + t * b.width();
            let mut r = Vec::new();
            for eps in [1e-3, 1e-4] {
                let p = params(0.01, eps);
                let sys = LayerSystem::new(SwitchingModel::Nonlinear, &p).unwrap();
                let s = slow_manifold_expansion(&b, x, &p).unwrap();
                let h = 1e-5;
                let dvdx = (slow_manifold_expansion(&b, x + h, &p).unwrap().v
                    - slow_manifold_expansion(&b, x - h, &p).unwrap().v) / (2.0 * h);
                r.push((dvdx - sys.rhs(x, s.v)).abs());
            }
            prop_assert!(r[1] < 0.3 * r[0] + 1e-6, "{:?}", r);
        }
    }
}
