use nalgebra::{DMatrix, DVector};

use crate::dist::std_normal;
use crate::error::{invalid, shape, Result};
use crate::rng::RngHandle;

/// `β_0 ~ N(m0, P0)` (a zero `P0` pins the start), `β_t = β_{t-1} + N(0, diag(w))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RwRegressionPrior {
    pub m0: Vec<f64>,
    pub p0_diag: Vec<f64>,
    pub w_diag: Vec<f64>,
}

/// Draw `N(mean, cov)`; a covariance that fails Cholesky from rounding is
/// repaired by clipping negative eigenvalues.
pub(crate) fn mvn_draw(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut RngHandle) -> DVector<f64> {
    let n = mean.len();
    let sym = (cov + cov.transpose()) * 0.5;
    let z = DVector::from_fn(n, |_, _| std_normal(rng));
    if let Some(ch) = sym.clone().cholesky() {
        return mean + ch.l() * z;
    }
    let eig = sym.symmetric_eigen();
    let scale = DVector::from_fn(n, |i, _| eig.eigenvalues[i].max(0.0).sqrt());
    mean + &eig.eigenvectors * z.component_mul(&scale)
}

/// Joint draw of `β_1..β_T` for `r_t = x_t' β_t + N(0, v_t)`. `x` holds the
/// T regressor rows of length J.
pub fn ffbs_rw_regression(
    r: &[f64],
    x: &[Vec<f64>],
    obs_var: &[f64],
    prior: &RwRegressionPrior,
    rng: &mut RngHandle,
) -> Result<Vec<Vec<f64>>> {
    let t_len = r.len();
    let j = prior.m0.len();
    if x.len() != t_len || obs_var.len() != t_len {
        return Err(shape("responses, regressors and variances differ in length"));
    }
    if x.iter().any(|row| row.len() != j) || prior.p0_diag.len() != j || prior.w_diag.len() != j {
        return Err(shape(format!("regressor rows and prior must have dimension {j}")));
    }
    if obs_var.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("observation variances must be positive"));
    }
    if prior.w_diag.iter().chain(&prior.p0_diag).any(|v| !(*v >= 0.0)) {
        return Err(invalid("state variances must be nonnegative"));
    }
    if t_len == 0 {
        return Ok(vec![]);
    }
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(&prior.w_diag));
    let mut ms: Vec<DVector<f64>> = Vec::with_capacity(t_len);
    let mut cs: Vec<DMatrix<f64>> = Vec::with_capacity(t_len);
    let mut m = DVector::from_column_slice(&prior.m0);
    let mut c = DMatrix::from_diagonal(&DVector::from_column_slice(&prior.p0_diag));
    for t in 0..t_len {
        let rp = &c + &w;
        let xt = DVector::from_column_slice(&x[t]);
        let rx = &rp * &xt;
        let q = xt.dot(&rx) + obs_var[t];
        let k = rx / q;
        let e = r[t] - xt.dot(&m);
        m += &k * e;
        c = &rp - &k * k.transpose() * q;
        ms.push(m.clone());
        cs.push(c.clone());
    }
    let mut out = vec![Vec::new(); t_len];
    let mut b = mvn_draw(&ms[t_len - 1], &cs[t_len - 1], rng);
    out[t_len - 1] = b.as_slice().to_vec();
    for t in (0..t_len - 1).rev() {
        let rp = &cs[t] + &w;
        let (mean, var) = match rp.clone().cholesky() {
            Some(ch) => {
                // gain = C_t (C_t + W)^{-1}
                let gain = ch.solve(&cs[t]).transpose();
                let mean = &ms[t] + &gain * (&b - &ms[t]);
                let var = &cs[t] - &gain * &cs[t];
                (mean, var)
            }
            // singular C_t + W only if both vanish: the state equals the next one
            None => (b.clone(), DMatrix::zeros(j, j)),
        };
        b = mvn_draw(&mean, &var, rng);
        out[t] = b.as_slice().to_vec();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::tests::rts_smoother;
    use crate::statespace::ScalarStateModel;

    // With J = 1 and unit regressors the model is the local level; compare
    // the draw moments with the scalar smoother oracle.
    #[test]
    fn scalar_case_matches_smoother() {
        let y: Vec<f64> = (0..15).map(|i| (i as f64 * 0.4).cos()).collect();
        let v: Vec<f64> = vec![0.5; 15];
        let prior = RwRegressionPrior { m0: vec![0.0], p0_diag: vec![0.0], w_diag: vec![0.1] };
        // β_0 = 0 pinned means β_1 ~ N(0, w)
        let model = ScalarStateModel { a: 0.0, phi: 1.0, q: 0.1, m0: 0.0, v0: 0.1 };
        let (xs, ps) = rts_smoother(&y, &v, &model);
        let x = vec![vec![1.0]; 15];
        let mut rng = RngHandle::new(51, 0);
        let n = 10_000;
        let mut sum = vec![0.0; 15];
        for _ in 0..n {
            let d = ffbs_rw_regression(&y, &x, &v, &prior, &mut rng).unwrap();
            for t in 0..15 {
                sum[t] += d[t][0];
            }
        }
        for t in 0..15 {
            let m = sum[t] / n as f64;
            assert!((m - xs[t]).abs() < 3.5 * (ps[t] / n as f64).sqrt(), "t={t} {m} vs {}", xs[t]);
        }
    }

    // Zero state noise and a pinned start make every β_t equal the start.
    #[test]
    fn zero_noise_pins_path() {
        let prior = RwRegressionPrior { m0: vec![0.3, -0.2], p0_diag: vec![0.0; 2], w_diag: vec![0.0; 2] };
        let x: Vec<Vec<f64>> = (0..10).map(|t| vec![1.0, t as f64]).collect();
        let r = vec![1.0; 10];
        let mut rng = RngHandle::new(52, 0);
        let d = ffbs_rw_regression(&r, &x, &[1.0; 10], &prior, &mut rng).unwrap();
        for row in d {
            assert!((row[0] - 0.3).abs() < 1e-9 && (row[1] + 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let prior = RwRegressionPrior { m0: vec![0.0; 2], p0_diag: vec![0.0; 2], w_diag: vec![0.1; 2] };
        let mut rng = RngHandle::new(0, 0);
        assert!(ffbs_rw_regression(&[1.0], &[vec![1.0]], &[1.0], &prior, &mut rng).is_err());
    }
}
