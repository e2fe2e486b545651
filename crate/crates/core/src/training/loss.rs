use crate::error::{Error, Result};

/// Squared error between output rates and targets, summed over output
/// neurons and averaged over the batch.
pub fn loss(rates: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if rates.len() != targets.len() {
        return Err(Error::Shape(format!("{} rate rows for {} targets", rates.len(), targets.len())));
    }
    if rates.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    let mut total = 0.0;
    for (r, t) in rates.iter().zip(targets) {
        if r.len() != t.len() {
            return Err(Error::Shape(format!("{} rates against {} targets", r.len(), t.len())));
        }
        total += r.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / rates.len() as f64)
}

pub fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    v
}
