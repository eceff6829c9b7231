use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::bessel::bessel_k;
use crate::error::{Error, Result};

/// Intrinsic dimension of the lumen surface.
pub const SURFACE_DIM: f64 = 2.0;

/// Matérn field parameters. `kappa = sqrt(8 nu) / corr_len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub sigma2: f64,
    pub nu: f64,
    pub corr_len: f64,
}

impl MaternParams {
    pub fn new(sigma2: f64, nu: f64, corr_len: f64) -> Result<Self> {
        let p = Self { sigma2, nu, corr_len };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.nu > 0.0 && self.corr_len > 0.0)
            || !(self.sigma2.is_finite() && self.nu.is_finite() && self.corr_len.is_finite())
        {
            return Err(Error::Argument(format!(
                "Matérn parameters must be positive and finite (sigma2 = {}, nu = {}, corr_len = {})",
                self.sigma2, self.nu, self.corr_len
            )));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        (8.0 * self.nu).sqrt() / self.corr_len
    }

    /// SPDE exponent `nu + d/2`; only integer values have a sparse
    /// precision construction.
    pub fn alpha(&self) -> Result<u32> {
        let a = self.nu + SURFACE_DIM / 2.0;
        let r = a.round();
        if (a - r).abs() > 1e-12 || r < 1.0 {
            return Err(Error::Unsupported(format!(
                "fractional SPDE exponent alpha = nu + 1 = {a}; only integer alpha is supported"
            )));
        }
        Ok(r as u32)
    }

    /// Marginal variance of the continuous SPDE solution with unit white noise.
    pub fn raw_spde_variance(&self) -> f64 {
        let d2 = SURFACE_DIM / 2.0;
        gamma(self.nu)
            / (gamma(self.nu + d2) * (4.0 * std::f64::consts::PI).powf(d2) * self.kappa().powf(2.0 * self.nu))
    }
}

/// Matérn correlation `r(h) / sigma2`, equal to 1 at `h = 0`.
pub fn matern_correlation(p: &MaternParams, h: f64) -> f64 {
    assert!(h >= 0.0, "distance must be non-negative");
    let x = p.kappa() * h;
    if x == 0.0 {
        return 1.0;
    }
    let log_pref = (1.0 - p.nu) * std::f64::consts::LN_2 - statrs::function::gamma::ln_gamma(p.nu);
    let k = bessel_k(p.nu, x);
    if k == 0.0 {
        return 0.0;
    }
    (log_pref + p.nu * x.ln() + k.ln()).exp().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_at_origin() {
        for nu in [0.5, 1.0, 2.0, 3.3] {
            let p = MaternParams::new(1.0, nu, 2.0).unwrap();
            assert_eq!(matern_correlation(&p, 0.0), 1.0);
            assert!((matern_correlation(&p, 1e-9) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn exponential_for_half() {
        let p = MaternParams::new(3.0, 0.5, 1.7).unwrap();
        for i in 0..100 {
            let h = i as f64 * 0.1;
            let exact = (-p.kappa() * h).exp();
            assert!((matern_correlation(&p, h) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn value_at_correlation_length() {
        // Independently: nu = 1/2 gives exp(-sqrt(4)) = exp(-2); the other
        // two are SciPy evaluations of the closed form.
        let cases = [(0.5, (-2.0f64).exp()), (1.0, 0.1396674740152931), (2.0, 0.1392114042358979)];
        for (nu, want) in cases {
            let p = MaternParams::new(1.0, nu, 3.7).unwrap();
            let got = matern_correlation(&p, 3.7);
            assert!((got - want).abs() < 1e-10, "nu = {nu}: {got} vs {want}");
        }
    }

    #[test]
    fn monotone_decreasing() {
        let p = MaternParams::new(1.0, 1.0, 3.7).unwrap();
        let mut prev = 1.0;
        for i in 1..300 {
            let r = matern_correlation(&p, i as f64 * 0.05);
            assert!(r < prev && r > 0.0);
            prev = r;
        }
    }

    #[test]
    fn alpha_rules() {
        assert_eq!(MaternParams::new(1.0, 1.0, 1.0).unwrap().alpha().unwrap(), 2);
        assert_eq!(MaternParams::new(1.0, 2.0, 1.0).unwrap().alpha().unwrap(), 3);
        assert!(MaternParams::new(1.0, 0.5, 1.0).unwrap().alpha().is_err());
        assert!(MaternParams::new(0.0, 1.0, 1.0).is_err());
        assert!(MaternParams::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn raw_variance_nu_one() {
        let p = MaternParams::new(1.0, 1.0, 3.7).unwrap();
        let k = p.kappa();
        let want = 1.0 / (4.0 * std::f64::consts::PI * k * k);
        assert!((p.raw_spde_variance() - want).abs() < 1e-14 * want.max(1.0));
    }
}
