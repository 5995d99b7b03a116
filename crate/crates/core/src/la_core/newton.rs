use nalgebra::DVector;

use super::{LaError, SparseLu, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    /// Stop when ||F(x)|| <= rel_tol ||F(x0)||.
    pub rel_tol: f64,
    /// Also stop when ||F(x)|| <= abs_tol (guards x0 already near a root).
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Step halvings tried when the residual norm does not decrease.
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-6, abs_tol: 0.0, max_iter: 30, max_halvings: 8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual norms, starting with ||F(x0)||.
    pub residuals: Vec<f64>,
    pub halvings: usize,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&0.0)
    }
}

/// Damped Newton iteration. `step(x, r)` returns the correction `d` solving
/// `J(x) d = r`; the update is `x - lambda d` with `lambda` halved while the
/// residual norm does not decrease.
pub fn newton_solve_with<R, S>(
    mut residual: R,
    mut step: S,
    x0: DVector<f64>,
    settings: &NewtonSettings,
) -> Result<(DVector<f64>, NewtonReport), LaError>
where
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>, LaError>,
    S: FnMut(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>, LaError>,
{
    assert!(settings.rel_tol > 0.0, "Newton tolerance must be positive");
    let mut x = x0;
    let mut r = residual(&x)?;
    let r0 = r.norm();
    let target = (settings.rel_tol * r0).max(settings.abs_tol);
    let mut report = NewtonReport { iterations: 0, residuals: vec![r0], halvings: 0 };
    let mut norm = r0;
    while norm > target || !norm.is_finite() {
        if report.iterations == settings.max_iter {
            return Err(LaError::NotConverged { iterations: report.iterations, residual: norm / r0 });
        }
        let d = step(&x, &r)?;
        let mut lambda = 1.0;
        let mut trial = &x - &d;
        let mut r_trial = residual(&trial)?;
        let mut halvings = 0;
        while !(r_trial.norm() < norm) && halvings < settings.max_halvings {
            lambda *= 0.5;
            halvings += 1;
            trial = &x - lambda * &d;
            r_trial = residual(&trial)?;
        }
        report.halvings += halvings;
        x = trial;
        r = r_trial;
        norm = r.norm();
        report.iterations += 1;
        report.residuals.push(norm);
    }
    Ok((x, report))
}

/// Newton with a sparse Jacobian; the symbolic LU analysis is reused across
/// iterations.
pub fn newton_solve<R, J>(
    residual: R,
    mut jacobian: J,
    x0: DVector<f64>,
    settings: &NewtonSettings,
) -> Result<(DVector<f64>, NewtonReport), LaError>
where
    R: FnMut(&DVector<f64>) -> Result<DVector<f64>, LaError>,
    J: FnMut(&DVector<f64>) -> Result<SparseMatrix, LaError>,
{
    let mut lu: Option<SparseLu> = None;
    let step = |x: &DVector<f64>, r: &DVector<f64>| {
        let j = jacobian(x)?;
        match lu.as_mut() {
            Some(f) => f.refactorize(&j)?,
            None => lu = Some(SparseLu::factorize(&j)?),
        }
        lu.as_ref().expect("factorized").solve(r)
    };
    newton_solve_with(residual, step, x0, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn linear_residual_converges_in_one_step() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let sa = SparseMatrix::from_dense(&a);
        let (x, rep) =
            newton_solve(|x| Ok(&a * x - &b), |_| Ok(sa.clone()), DVector::zeros(2), &NewtonSettings::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((&a * x - b).norm() < 1e-14);
    }

    #[test]
    fn scalar_square_root() {
        let (x, rep) = newton_solve(
            |x| Ok(DVector::from_element(1, x[0] * x[0] - 4.0)),
            |x| Ok(SparseMatrix::from_dense(&DMatrix::from_element(1, 1, 2.0 * x[0]))),
            DVector::from_element(1, 3.0),
            &NewtonSettings { rel_tol: 1e-12, ..Default::default() },
        )
        .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10);
        assert!(rep.iterations <= 6);
    }

    #[test]
    fn damping_rescues_overshooting_steps() {
        // arctan: undamped Newton diverges from x0 = 3
        let settings = NewtonSettings { rel_tol: 1e-10, ..Default::default() };
        let (x, rep) = newton_solve_with(
            |x| Ok(x.map(f64::atan)),
            |x, r| Ok(r.component_mul(&x.map(|v| 1.0 + v * v))),
            DVector::from_element(1, 3.0),
            &settings,
        )
        .unwrap();
        assert!(x[0].abs() < 1e-9);
        assert!(rep.halvings > 0);
    }

    #[test]
    fn non_convergence_is_reported() {
        let settings = NewtonSettings { max_iter: 3, max_halvings: 0, ..Default::default() };
        // x^2 + 1 has no real root
        let r = newton_solve_with(
            |x| Ok(x.map(|v| v * v + 1.0)),
            |x, r| Ok(r.component_div(&x.map(|v| 2.0 * v))),
            DVector::from_element(1, 0.5),
            &settings,
        );
        assert!(matches!(r, Err(LaError::NotConverged { iterations: 3, .. })));
    }
}
