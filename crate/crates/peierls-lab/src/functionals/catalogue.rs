//! Named constructions: bump functionals, partitions of unity and the domain-dependent
//! support example.

use super::{Domain, Functional, OuterMap};
use crate::error::{LabError, Result};
use crate::fields::{FieldConfig, TestFunction};
use crate::geometry::GridSpacetime;

/// `φ ↦ χ(R⁻²‖φ − φ₀‖²_{2,k,f})` with `χ = 1` on `[0,1]` and `0` beyond 2.
#[derive(Debug, Clone)]
pub struct BumpFunctional {
    pub functional: Functional,
    pub seminorm_sq: Functional,
    pub radius: f64,
}

impl BumpFunctional {
    pub fn new(f: TestFunction, k: usize, phi0: FieldConfig, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(LabError::InvalidInput(format!("bump radius must be positive, got {radius}")));
        }
        let seminorm_sq = Functional::sobolev_sq(f, k, Some(phi0))?;
        let functional = Functional::compose(OuterMap::BumpChi { r0: 1.0, r1: 2.0 }, vec![seminorm_sq.scale(radius.powi(-2))])?;
        Ok(Self { functional, seminorm_sq, radius })
    }

    /// Seminorm radius beyond which the bump vanishes.
    pub fn outer_radius(&self) -> f64 {
        self.radius * 2f64.sqrt()
    }

    pub fn seminorm(&self, phi: &FieldConfig) -> Result<f64> {
        Ok(self.seminorm_sq.value(phi)?.sqrt())
    }
}

/// `χ_i = F_i / Σ_j F_j`, defined where the bumps cover.
pub fn partition_of_unity(bumps: &[Functional]) -> Result<Vec<Functional>> {
    (0..bumps.len()).map(|i| Functional::compose(OuterMap::Ratio { index: i }, bumps.to_vec())).collect()
}

/// `G_R(φ) = exp(1 − χ_R(∫fφ dμ_g))` with `χ_R = 1` on `[0,R]` and `0` beyond `2R`.
pub fn exp_cutoff_example(st: &GridSpacetime, f: &TestFunction, r: f64) -> Result<Functional> {
    if !(r > 0.0) {
        return Err(LabError::InvalidInput(format!("cutoff radius must be positive, got {r}")));
    }
    let g = Functional::linear(st, f)?;
    let chi = Functional::compose(OuterMap::BumpChi { r0: r, r1: 2.0 * r }, vec![g])?;
    Ok(Functional::compose(OuterMap::Exp { scale: -1.0 }, vec![chi])?.scale(std::f64::consts::E))
}

/// `{φ : sup_{supp f} |φ| < R′}`.
pub fn sup_ball(f: &TestFunction, r_prime: f64) -> Domain {
    Domain::SupBall { set: f.support(), radius: r_prime }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{spacetime_support, ProbePlan};
    use crate::geometry::Lattice;

    #[test]
    fn bump_is_one_at_centre_and_zero_outside() {
        let lat = Lattice::new(10, 10, 0.1, 0.1).unwrap();
        let phi0 = FieldConfig::from_fn(lat, |t, x| (t + x).sin());
        let b = BumpFunctional::new(TestFunction::bump(lat, 5, 5, 3.0), 1, phi0.clone(), 0.5).unwrap();
        assert_eq!(b.functional.value(&phi0).unwrap(), 1.0);
        let far = phi0.add(&FieldConfig::constant(lat, 50.0));
        assert!(b.seminorm(&far).unwrap() >= b.outer_radius());
        assert_eq!(b.functional.value(&far).unwrap(), 0.0);
    }

    #[test]
    fn exp_cutoff_support_depends_on_domain() {
        let lat = Lattice::new(12, 12, 0.1, 0.1).unwrap();
        let st = GridSpacetime::minkowski(lat);
        let f = TestFunction::bump(lat, 6, 6, 2.5).normalized(&st).unwrap();
        let g = exp_cutoff_example(&st, &f, 1.0).unwrap();
        let plan = ProbePlan::new(3);
        let small = spacetime_support(&g.with_domain(sup_ball(&f, 1.0)), lat, &plan).unwrap();
        assert!(small.support.is_empty());
        let large = spacetime_support(&g.with_domain(sup_ball(&f, 1.8)), lat, &plan).unwrap();
        assert_eq!(large.support, f.support());
    }
}
