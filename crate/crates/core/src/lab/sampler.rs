//! Inverse-CDF sampling from the photon density
//! Λ(x) = ½(1−ε)I1(x−X1) + ½(1+ε)I2(x−X2).

use crate::error::{Error, Result};
use crate::psf::Psf;
use crate::qcrb::SourceScene;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Intensity and its first two derivatives at `y`.
pub(crate) fn intensity_derivs(psf: &Psf, y: f64) -> (f64, f64, f64) {
    if let Some(s) = psf.gaussian_sigma() {
        let s2 = s * s;
        let i = psf.intensity(y);
        (i, -y / s2 * i, (y * y / (s2 * s2) - 1.0 / s2) * i)
    } else {
        let (a, b, c) = psf.eval(y);
        (a * a, 2.0 * a * b, 2.0 * (b * b + a * c))
    }
}

/// Photon density of a scene.
pub fn photon_density(psf1: &Psf, psf2: &Psf, scene: &SourceScene, x: f64) -> f64 {
    let e = scene.eps();
    0.5 * (1.0 - e) * psf1.intensity(x - scene.x1()) + 0.5 * (1.0 + e) * psf2.intensity(x - scene.x2())
}

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Tabulated CDF with cubic Hermite interpolation between nodes.
#[derive(Debug, Clone)]
pub struct PhotonSampler {
    origin: f64,
    spacing: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl PhotonSampler {
    /// Tabulates the CDF at 400 nodes per PSF width over both supports.
    pub fn new(psf1: &Psf, psf2: &Psf, scene: &SourceScene) -> Result<Self> {
        let (l1, h1) = psf1.support();
        let (l2, h2) = psf2.support();
        let lo = (scene.x1() + l1).min(scene.x2() + l2);
        let hi = (scene.x1() + h1).max(scene.x2() + h2);
        let spacing = psf1.width().min(psf2.width()) / 400.0;
        let cells = ((hi - lo) / spacing).ceil() as usize;
        if cells > 20_000_000 {
            return Err(Error::Domain("photon density support is too wide to tabulate".into()));
        }
        let dens = |x: f64| photon_density(psf1, psf2, scene, x);
        let mut cdf = Vec::with_capacity(cells + 1);
        let mut pdf = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        pdf.push(dens(lo));
        for j in 0..cells {
            let a = lo + j as f64 * spacing;
            let mid = a + 0.5 * spacing;
            let cell: f64 = GL4.iter().map(|&(t, w)| w * dens(mid + 0.5 * spacing * t)).sum();
            acc += 0.5 * spacing * cell;
            cdf.push(acc);
            pdf.push(dens(a + spacing));
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::Domain("photon density does not integrate to a positive value".into()));
        }
        for (c, p) in cdf.iter_mut().zip(pdf.iter_mut()) {
            *c /= acc;
            *p /= acc;
        }
        Ok(Self {
            origin: lo,
            spacing,
            cdf,
            pdf,
        })
    }

    /// x with F(x) = u.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len() - 1;
        let j = match self.cdf.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(j) => return self.origin + j as f64 * self.spacing,
            Err(j) => j.clamp(1, n) - 1,
        };
        let (c0, c1) = (self.cdf[j], self.cdf[j + 1]);
        let (m0, m1) = (self.pdf[j] * self.spacing, self.pdf[j + 1] * self.spacing);
        let herm = |t: f64| {
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * c0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * c1 + (t3 - t2) * m1
        };
        let dherm = |t: f64| {
            let t2 = t * t;
            (6.0 * t2 - 6.0 * t) * c0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * c1 + (3.0 * t2 - 2.0 * t) * m1
        };
        let (mut a, mut b) = (0.0, 1.0);
        let mut t = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
        for _ in 0..30 {
            let f = herm(t) - u;
            if f > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let df = dherm(t);
            let mut next = if df > 0.0 { t - f / df } else { 0.5 * (a + b) };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - t).abs() < 1e-14 {
                t = next;
                break;
            }
            t = next;
        }
        self.origin + (j as f64 + t) * self.spacing
    }

    /// Draws `n` photons.
    pub fn draw(&self, rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.gen::<f64>())).collect()
    }
}

/// Photon positions drawn from a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonSample {
    pub positions: Vec<f64>,
    pub scene: SourceScene,
    pub seed: u64,
    pub stream: u64,
}

/// RNG for substream `stream` of `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n_photons` i.i.d. positions; reproducible for a given seed.
pub fn sample_photons(psf1: &Psf, psf2: &Psf, scene: &SourceScene, n_photons: usize, seed: u64) -> Result<PhotonSample> {
    if n_photons == 0 {
        return Err(Error::Domain("at least one photon is required".into()));
    }
    let sampler = PhotonSampler::new(psf1, psf2, scene)?;
    Ok(PhotonSample {
        positions: sampler.draw(&mut trial_rng(seed, 0), n_photons),
        scene: *scene,
        seed,
        stream: 0,
    })
}
