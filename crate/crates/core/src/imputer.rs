//! Proper normal-regression imputation of one incomplete variable `y` from
//! a fully observed auxiliary `x`.
//!
//! Each imputation first draws regression parameters from their posterior
//! given the complete cases (scaled inverse chi-square for the residual
//! variance, then a bivariate normal for the coefficients) and then fills
//! every missing `y` with a draw from the resulting predictive distribution.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::pool::ImputationResult;

#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteBivariate {
    x: Vec<f64>,
    y: Vec<Option<f64>>,
    n_obs: usize,
}

impl IncompleteBivariate {
    pub fn new(x: Vec<f64>, y: Vec<Option<f64>>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!("x has {} values but y has {}", x.len(), y.len())));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite data value".into()));
        }
        let n_obs = y.iter().filter(|v| v.is_some()).count();
        if n_obs < 4 {
            return Err(Error::InsufficientCompleteCases(n_obs));
        }
        Ok(IncompleteBivariate { x, y, n_obs })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[Option<f64>] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_missing(&self) -> usize {
        self.n() - self.n_obs
    }

    /// Least-squares fit of `y` on `x` over the complete cases.
    pub fn fit(&self) -> Result<LeastSquaresFit> {
        LeastSquaresFit::from_data(self)
    }
}

/// Complete-case regression summary that the posterior is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeastSquaresFit {
    pub beta0: f64,
    pub beta1: f64,
    /// Residual variance with divisor `n_obs - 2`.
    pub s2: f64,
    pub n_obs: usize,
    // (XᵀX)⁻¹ for the design [1, x]
    xtx_inv: [[f64; 2]; 2],
}

impl LeastSquaresFit {
    fn from_data(data: &IncompleteBivariate) -> Result<Self> {
        let obs = || data.x.iter().zip(&data.y).filter_map(|(&x, y)| y.map(|y| (x, y)));
        let n = data.n_obs as f64;
        let (sx, sy) = obs().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let (sxx, sxy) = obs().fold((0.0, 0.0), |(a, b), (x, y)| {
            let dx = x - mx;
            (a + dx * dx, b + dx * (y - my))
        });
        if !(sxx > 0.0) {
            return Err(Error::SingularDesign);
        }
        let beta1 = sxy / sxx;
        let beta0 = my - beta1 * mx;
        let rss: f64 = obs().map(|(x, y)| (y - beta0 - beta1 * x).powi(2)).sum();
        let s2 = rss / (n - 2.0);
        // inverse of [[n, Σx], [Σx, Σx²]] written through the centred sums
        let xtx_inv = [[1.0 / n + mx * mx / sxx, -mx / sxx], [-mx / sxx, 1.0 / sxx]];
        Ok(LeastSquaresFit { beta0, beta1, s2, n_obs: data.n_obs, xtx_inv })
    }

    /// Posterior draw of `(beta0, beta1, sigma)` under the usual
    /// non-informative prior.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PosteriorDraw {
        let dof = (self.n_obs - 2) as f64;
        let chi2: f64 = ChiSquared::new(dof).expect("n_obs >= 4").sample(rng);
        let sigma2 = dof * self.s2 / chi2;
        let sigma = sigma2.sqrt();
        // Cholesky factor of sigma²·(XᵀX)⁻¹
        let [[a, b], [_, d]] = self.xtx_inv;
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (d - l21 * l21).max(0.0).sqrt();
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        PosteriorDraw {
            beta0: self.beta0 + sigma * l11 * z1,
            beta1: self.beta1 + sigma * (l21 * z1 + l22 * z2),
            sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorDraw {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletedDataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `true` where `y` was imputed.
    pub imputed: Vec<bool>,
}

pub fn fit_and_draw<R: Rng + ?Sized>(data: &IncompleteBivariate, rng: &mut R) -> Result<PosteriorDraw> {
    Ok(data.fit()?.draw(rng))
}

pub fn impute_once<R: Rng + ?Sized>(data: &IncompleteBivariate, draw: &PosteriorDraw, rng: &mut R) -> CompletedDataset {
    let mut y = Vec::with_capacity(data.n());
    let mut imputed = Vec::with_capacity(data.n());
    for (&x, obs) in data.x.iter().zip(&data.y) {
        match obs {
            Some(v) => {
                y.push(*v);
                imputed.push(false);
            }
            None => {
                let z: f64 = StandardNormal.sample(rng);
                y.push(draw.beta0 + draw.beta1 * x + draw.sigma * z);
                imputed.push(true);
            }
        }
    }
    CompletedDataset { x: data.x.clone(), y, imputed }
}

/// `m` independently imputed copies of `data`.
pub fn impute_m<R: Rng + ?Sized>(data: &IncompleteBivariate, m: usize, rng: &mut R) -> Result<Vec<CompletedDataset>> {
    if m < 2 {
        return Err(Error::InsufficientImputations(m));
    }
    let fit = data.fit()?;
    Ok((0..m)
        .map(|_| {
            let draw = fit.draw(rng);
            impute_once(data, &draw, rng)
        })
        .collect())
}

/// Sample mean of `y` and its squared standard error.
pub fn analyze_mean(completed: &CompletedDataset) -> Result<ImputationResult> {
    mean_and_variance(&completed.y)
}

fn mean_and_variance(y: &[f64]) -> Result<ImputationResult> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let ss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(ImputationResult { estimate: mean, within_variance: ss / (nf - 1.0) / nf })
}

/// `m` analyses of the mean, one per imputation. Draws the same random
/// numbers in the same order as [`impute_m`] followed by [`analyze_mean`].
pub fn impute_and_analyze<R: Rng + ?Sized>(data: &IncompleteBivariate, m: usize, rng: &mut R) -> Result<Vec<ImputationResult>> {
    if m < 2 {
        return Err(Error::InsufficientImputations(m));
    }
    let fit = data.fit()?;
    let mut y = Vec::with_capacity(data.n());
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let draw = fit.draw(rng);
        y.clear();
        for (&x, obs) in data.x.iter().zip(&data.y) {
            y.push(match obs {
                Some(v) => *v,
                None => {
                    let z: f64 = StandardNormal.sample(rng);
                    draw.beta0 + draw.beta1 * x + draw.sigma * z
                }
            });
        }
        out.push(mean_and_variance(&y)?);
    }
    Ok(out)
}
