use crate::error::{check_dim, Error, Result};
use crate::feasible_set::{FeasibleRegion, MEMBERSHIP_TOL};
use crate::objectives::FiniteSumObjective;
use crate::vector;

/// Frank-Wolfe duality gap `max_{v ∈ C} ⟨∇f(x), x − v⟩` with the exact
/// gradient. Nonnegative for feasible `x`; bounds the primal gap when `f` is
/// convex.
pub fn duality_gap(obj: &FiniteSumObjective, region: &FeasibleRegion, x: &[f64]) -> Result<f64> {
    check_dim(obj.n(), x.len())?;
    check_dim(region.dim(), x.len())?;
    if !region.contains(x, MEMBERSHIP_TOL)? {
        return Err(Error::Infeasible);
    }
    let g = obj.full_gradient(x)?;
    Ok(gap_for_gradient(region, &g, x))
}

/// Gap for a precomputed gradient. Rounding below zero is clamped away.
pub(crate) fn gap_for_gradient(region: &FeasibleRegion, g: &[f64], x: &[f64]) -> f64 {
    let mut v = vec![0.0; x.len()];
    region.lmo_into(g, &mut v);
    let gap: f64 = g.iter().zip(x).zip(&v).map(|((gi, xi), vi)| gi * (xi - vi)).sum();
    gap.max(0.0)
}

/// `⟨g, x − v⟩` without clamping, for callers that test the sign.
pub fn raw_gap(region: &FeasibleRegion, g: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(region.dim(), g.len())?;
    check_dim(region.dim(), x.len())?;
    let v = region.lmo(g)?;
    Ok(vector::dot(g, &vector::sub(x, &v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{Dataset, Loss};

    #[test]
    fn half_squared_norm_on_box() {
        // (1/2)Σ⟨e_i, x⟩² = ½‖x‖²
        let data = Dataset::dense(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let obj = FiniteSumObjective::new(Loss::SquaredError, data).unwrap();
        let region = FeasibleRegion::linf_ball(2, 1.0).unwrap();
        let x = [1.0, 1.0];
        let g = obj.full_gradient(&x).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
        assert!((duality_gap(&obj, &region, &x).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_has_zero_gap() {
        let data = Dataset::dense(vec![vec![1.0, 2.0]], vec![0.0]).unwrap();
        let obj = FiniteSumObjective::new(Loss::SquaredError, data).unwrap();
        let region = FeasibleRegion::l1_ball(2, 1.0).unwrap();
        assert_eq!(duality_gap(&obj, &region, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn infeasible_point_is_rejected() {
        let data = Dataset::dense(vec![vec![1.0, 2.0]], vec![0.0]).unwrap();
        let obj = FiniteSumObjective::new(Loss::SquaredError, data).unwrap();
        let region = FeasibleRegion::l1_ball(2, 1.0).unwrap();
        assert!(matches!(
            duality_gap(&obj, &region, &[1.0, 1.0]),
            Err(Error::Infeasible)
        ));
    }
}
