use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// One draw from `Dirichlet(alpha)`: independent `Gamma(alpha_y, 1)`
/// variates normalized by their sum.
pub fn dirichlet_sample<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(Error::InvalidArgument("empty concentration vector".into()));
    }
    let gammas = alpha
        .iter()
        .map(|&a| {
            if a > 0.0 && a.is_finite() {
                Gamma::new(a, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))
            } else {
                Err(Error::InvalidArgument(format!("concentration {a} is not positive")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    loop {
        let mut draw: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let sum: f64 = draw.iter().sum();
        // All-zero draws only happen when every shape is tiny.
        if sum > 0.0 {
            draw.iter_mut().for_each(|d| *d /= sum);
            return Ok(draw);
        }
    }
}
