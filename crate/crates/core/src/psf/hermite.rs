//! Hermite–Gauss mixtures ψ(x) = exp(−x²/4σ²)·p(x) with polynomial p.

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// p′ − x·p/(2σ²): the polynomial factor of the derivative of exp(−x²/4σ²)·p.
    fn envelope_derivative(&self, sigma: f64) -> Poly {
        let mut out = vec![0.0; self.0.len() + 1];
        for (k, c) in self.derivative().0.into_iter().enumerate() {
            out[k] += c;
        }
        let s = 1.0 / (2.0 * sigma * sigma);
        for (k, &c) in self.0.iter().enumerate() {
            out[k + 1] -= s * c;
        }
        Poly(out)
    }
}

/// Physicists' Hermite polynomial H_n(s) coefficients in s.
fn hermite(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0];
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (i, &c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= 2.0 * k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// A finite sum Σ c_n HG_n(x; σ) of orthonormal Hermite–Gauss modes.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteGauss {
    sigma: f64,
    modes: Vec<(u32, f64)>,
    amp: Poly,
    d1: Poly,
    d2: Poly,
}

impl HermiteGauss {
    pub(crate) fn new(sigma: f64, modes: &[(u32, f64)]) -> Self {
        let degree = modes.iter().map(|m| m.0 as usize).max().unwrap_or(0);
        let mut coeffs = vec![0.0; degree + 1];
        let base = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
        let scale = 1.0 / (std::f64::consts::SQRT_2 * sigma);
        for &(n, w) in modes {
            let n = n as usize;
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let norm = base / (2f64.powi(n as i32) * fact).sqrt();
            for (k, c) in hermite(n).into_iter().enumerate() {
                coeffs[k] += w * norm * c * scale.powi(k as i32);
            }
        }
        let amp = Poly(coeffs);
        let d1 = amp.envelope_derivative(sigma);
        let d2 = d1.envelope_derivative(sigma);
        Self {
            sigma,
            modes: modes.to_vec(),
            amp,
            d1,
            d2,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Mode weights `(n, c_n)`.
    pub fn modes(&self) -> &[(u32, f64)] {
        &self.modes
    }

    pub(crate) fn eval(&self, x: f64) -> (f64, f64, f64) {
        let e = (-x * x / (4.0 * self.sigma * self.sigma)).exp();
        (e * self.amp.eval(x), e * self.d1.eval(x), e * self.d2.eval(x))
    }
}
