//! Exact exponential convolution of piecewise-linear signals.
//!
//! For a decay rate `μ ≥ 0` and a signal `c(s)` linear between nodes,
//! `∫ e^{−μ(t−s)} c(s) ds` is integrated in closed form on each interval and
//! accumulated with the recursion `I ← e^{−μΔ} I + w₀ c_j + w₁ c_{j+1}`.

/// Below this `z = μΔ` the weights come from their Taylor series.
const SERIES_THRESHOLD: f64 = 1.0;
const SERIES_TERMS: usize = 20;

/// Weights `(w₀, w₁)` such that
/// `∫_0^Δ e^{−μ(Δ−τ)} (c₀(1 − τ/Δ) + c₁ τ/Δ) dτ = w₀ c₀ + w₁ c₁`.
pub fn etd_weights(mu: f64, delta: f64) -> (f64, f64) {
    let z = mu * delta;
    if z < SERIES_THRESHOLD {
        // (1 − e^{−z})/z = Σ (−z)^n/(n+1)!,  (z − 1 + e^{−z})/z² = Σ (−z)^n/(n+2)!
        let mut total = 0.0;
        let mut end = 0.0;
        let mut term = 1.0; // (−z)^n / n!
        for n in 0..SERIES_TERMS {
            total += term / (n + 1) as f64;
            end += term / ((n + 1) * (n + 2)) as f64;
            term *= -z / (n + 1) as f64;
        }
        (delta * (total - end), delta * end)
    } else {
        let e = (-z).exp();
        let total = (1.0 - e) / z;
        let end = (z - 1.0 + e) / (z * z);
        (delta * (total - end), delta * end)
    }
}

/// A scalar signal, linear between strictly increasing nodes starting at
/// `s = 0` and held at its last value afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear<'a> {
    pub times: &'a [f64],
    pub values: &'a [f64],
}

impl PiecewiseLinear<'_> {
    pub fn at(&self, s: f64) -> f64 {
        let (times, values) = (self.times, self.values);
        if s <= times[0] {
            return values[0];
        }
        match times.iter().position(|&ti| ti >= s) {
            None => values[values.len() - 1],
            Some(j) => {
                let (t0, t1) = (times[j - 1], times[j]);
                let u = (s - t0) / (t1 - t0);
                values[j - 1] + u * (values[j] - values[j - 1])
            }
        }
    }
}

/// `∫_0^t e^{−μ(t−s)} c(s) ds`.
pub fn convolve(signal: &PiecewiseLinear<'_>, mu: f64, t: f64) -> f64 {
    let (times, values) = (signal.times, signal.values);
    let mut acc = 0.0;
    let mut s0 = times[0];
    let mut c0 = values[0];
    for (&s1, &c1) in times.iter().zip(values).skip(1) {
        if s1 >= t {
            break;
        }
        let delta = s1 - s0;
        let (w0, w1) = etd_weights(mu, delta);
        acc = (-mu * delta).exp() * acc + w0 * c0 + w1 * c1;
        s0 = s1;
        c0 = c1;
    }
    if t > s0 {
        let delta = t - s0;
        let c1 = signal.at(t);
        let (w0, w1) = etd_weights(mu, delta);
        acc = (-mu * delta).exp() * acc + w0 * c0 + w1 * c1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson with many panels; independent of the closed form.
    fn simpson(signal: &PiecewiseLinear<'_>, mu: f64, t: f64) -> f64 {
        let n = 200_000;
        let h = t / n as f64;
        let f = |s: f64| (-mu * (t - s)).exp() * signal.at(s);
        let mut sum = f(0.0) + f(t);
        for i in 1..n {
            sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    }

    #[test]
    fn weights_continuous_across_series_switch() {
        let below = etd_weights(SERIES_THRESHOLD.next_down(), 1.0);
        let above = etd_weights(SERIES_THRESHOLD, 1.0);
        assert!((below.0 - above.0).abs() < 1e-14, "{below:?} {above:?}");
        assert!((below.1 - above.1).abs() < 1e-14);
        assert_eq!(etd_weights(0.0, 2.0), (1.0, 1.0));
    }

    #[test]
    fn constant_signal_closed_form() {
        let times = [0.0, 0.3, 1.0];
        let values = [2.0, 2.0, 2.0];
        let sig = PiecewiseLinear { times: &times, values: &values };
        for &mu in &[0.0f64, 1e-6, 0.5, 19.67, 2e4] {
            for &t in &[0.1f64, 0.3, 0.75, 3.0] {
                let expected = if mu == 0.0 { 2.0 * t } else { -2.0 * (-mu * t).exp_m1() / mu };
                let got = convolve(&sig, mu, t);
                assert!((got - expected).abs() <= 1e-14 * expected.abs().max(1.0), "mu={mu} t={t}");
            }
        }
    }

    #[test]
    fn ramp_matches_simpson() {
        let times = [0.0, 0.05, 0.2, 0.5];
        let values = [0.0, 1.0, -0.5, 0.25];
        let sig = PiecewiseLinear { times: &times, values: &values };
        for &mu in &[0.0, 0.3, 20.0, 400.0] {
            for &t in &[0.03, 0.2, 0.41, 0.9] {
                let got = convolve(&sig, mu, t);
                let oracle = simpson(&sig, mu, t);
                assert!((got - oracle).abs() < 1e-9, "mu={mu} t={t}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn zero_time_is_empty() {
        let times = [0.0, 1.0];
        let values = [1.0, 1.0];
        assert_eq!(convolve(&PiecewiseLinear { times: &times, values: &values }, 3.0, 0.0), 0.0);
    }
}
