pub const RUNS_A: [f64; 10] = [0.80, 0.81, 0.79, 0.82, 0.80, 0.83, 0.81, 0.80, 0.82, 0.81];
pub const RUNS_B: [f64; 10] = [0.79, 0.80, 0.79, 0.80, 0.79, 0.81, 0.80, 0.80, 0.80, 0.79];

/// Computational formula: d̄ / (s_d / √n) with s_d from Σd and Σd².
pub fn textbook_t(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sum: f64 = d.iter().sum();
    let sum_sq: f64 = d.iter().map(|x| x * x).sum();
    let sd = ((sum_sq - sum * sum / n) / (n - 1.0)).sqrt();
    (sum / n) / (sd / n.sqrt())
}

/// Student t density; Γ ratios by recursion from Γ(1) = 1 and Γ(1/2) = √π.
pub fn t_density(x: f64, df: usize) -> f64 {
    fn gamma_half(k: usize) -> f64 {
        // Γ(k/2)
        if k == 1 {
            std::f64::consts::PI.sqrt()
        } else if k == 2 {
            1.0
        } else {
            (k as f64 / 2.0 - 1.0) * gamma_half(k - 2)
        }
    }
    let v = df as f64;
    gamma_half(df + 1) / ((v * std::f64::consts::PI).sqrt() * gamma_half(df)) * (1.0 + x * x / v).powf(-(v + 1.0) / 2.0)
}

/// Two-tailed p by Simpson's rule over [0, |t|].
pub fn two_tailed_p(t: f64, df: usize) -> f64 {
    let n = 200_000;
    let h = t.abs() / n as f64;
    let mut s = t_density(0.0, df) + t_density(t.abs(), df);
    for i in 1..n {
        s += t_density(i as f64 * h, df) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}
