#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; NaN for fewer than two values.
    pub se: f64,
    pub n: usize,
}

pub fn mean_and_se(values: &[f64]) -> MeanSe {
    let n = values.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n < 2 {
        f64::NAN
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    MeanSe { mean, se, n }
}
