/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Mean and i.i.d. standard error.
pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { mean: f64::NAN, stderr: f64::NAN, count: 0 };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Summary { mean, stderr: (var / n as f64).sqrt(), count: n }
}

/// Mean with a batch-means standard error, robust to serial correlation.
/// Falls back to [`summarize`] when there are fewer samples than batches.
pub fn batch_means(xs: &[f64], batches: usize) -> Summary {
    let n = xs.len();
    if batches < 2 || n < 2 * batches {
        return summarize(xs);
    }
    let size = n / batches;
    let means: Vec<f64> =
        (0..batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let s = summarize(&means);
    Summary { mean: xs.iter().sum::<f64>() / n as f64, stderr: s.stderr, count: n }
}

/// `|a - b| ≤ k·√(se_a² + se_b²) + budget`; exact equality always passes.
pub fn agree(a: &Summary, b: &Summary, k: f64, budget: f64) -> bool {
    let d = (a.mean - b.mean).abs();
    d == 0.0 || d <= k * a.stderr.hypot(b.stderr) + budget
}
