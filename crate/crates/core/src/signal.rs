//! Ground-truth line-spectral signals, Gaussian measurement ensembles, the
//! quadratic measurement map and its lifted linear form.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::packing::pack;
use crate::linalg::{Complex64, ComplexVector, HermitianMatrix};

/// The manifold vector `a(f) = (1, e^{j2πf}, ..., e^{j2π(N−1)f})`.
pub fn atom(f: f64, n: usize) -> ComplexVector {
    ComplexVector::new((0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * f * k as f64)).collect())
}

/// `min(|f − g|, 1 − |f − g|)` for frequencies on the unit circle.
pub fn wrapped_distance(f: f64, g: f64) -> f64 {
    let d = (f - g).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Smallest pairwise wrapped distance; `+∞` for fewer than two frequencies.
pub fn min_separation(freqs: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &f) in freqs.iter().enumerate() {
        for &g in &freqs[i + 1..] {
            best = best.min(wrapped_distance(f, g));
        }
    }
    best
}

/// Deterministic RNG for one named stream of one trial.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub frequencies: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    pub x: ComplexVector,
}

impl GroundTruth {
    pub fn new(n: usize, frequencies: Vec<f64>, coefficients: Vec<Complex64>) -> Result<Self> {
        if frequencies.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                what: "coefficient count",
                expected: frequencies.len(),
                found: coefficients.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter("signal length must be positive".into()));
        }
        if min_separation(&frequencies) == 0.0 {
            return Err(Error::InvalidParameter("frequencies must be pairwise distinct".into()));
        }
        let frequencies: Vec<f64> = frequencies.iter().map(|f| f.rem_euclid(1.0)).collect();
        let mut x = ComplexVector::zeros(n);
        for (&f, &s) in frequencies.iter().zip(&coefficients) {
            x = x.add(&atom(f, n).scale(s));
        }
        Ok(Self {
            frequencies,
            coefficients,
            x,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn l(&self) -> usize {
        self.frequencies.len()
    }

    /// `T(u) = Σ |s_l| a(f_l) a(f_l)^H · Σ|s_l|`: the Toeplitz point that
    /// certifies feasibility of the ground truth in the lifted programs.
    pub fn toeplitz_certificate(&self) -> crate::linalg::ToeplitzParam {
        let total: f64 = self.coefficients.iter().map(|s| s.norm()).sum();
        let n = self.n();
        let u: Vec<Complex64> = (0..n)
            .map(|k| {
                self.frequencies
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(&f, s)| total * s.norm() * Complex64::from_polar(1.0, -2.0 * PI * f * k as f64))
                    .sum()
            })
            .collect();
        crate::linalg::ToeplitzParam::new(ComplexVector::new(u)).expect("real zero lag")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub n: usize,
    pub l: usize,
    /// Minimum pairwise wrapped frequency distance.
    pub separation_floor: f64,
    /// Coefficient magnitudes are uniform on this interval; phases uniform.
    pub magnitude_min: f64,
    pub magnitude_max: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            n: 8,
            l: 2,
            separation_floor: 0.125,
            magnitude_min: 0.5,
            magnitude_max: 1.5,
        }
    }
}

impl TruthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.l == 0 {
            return Err(Error::InvalidParameter("N and L must be positive".into()));
        }
        if self.l >= 2 && self.separation_floor > 1.0 / self.l as f64 {
            return Err(Error::InvalidParameter(format!(
                "separation floor {} is infeasible for {} frequencies on the unit circle (max {})",
                self.separation_floor,
                self.l,
                1.0 / self.l as f64
            )));
        }
        if !(self.magnitude_min > 0.0 && self.magnitude_max >= self.magnitude_min) {
            return Err(Error::InvalidParameter("coefficient magnitude range must be positive and ordered".into()));
        }
        Ok(())
    }
}

const MAX_FREQUENCY_DRAWS: usize = 1_000_000;

pub fn sample_truth<R: Rng>(cfg: &TruthConfig, rng: &mut R) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut freqs = Vec::with_capacity(cfg.l);
    let mut draws = 0;
    loop {
        freqs.clear();
        freqs.extend((0..cfg.l).map(|_| rng.gen::<f64>()));
        if cfg.l < 2 || min_separation(&freqs) >= cfg.separation_floor {
            break;
        }
        draws += 1;
        if draws >= MAX_FREQUENCY_DRAWS {
            return Err(Error::InvalidParameter(format!(
                "could not draw {} frequencies {} apart",
                cfg.l, cfg.separation_floor
            )));
        }
    }
    let coefficients = (0..cfg.l)
        .map(|_| {
            let mag = if cfg.magnitude_max > cfg.magnitude_min {
                rng.gen_range(cfg.magnitude_min..cfg.magnitude_max)
            } else {
                cfg.magnitude_min
            };
            Complex64::from_polar(mag, 2.0 * PI * rng.gen::<f64>())
        })
        .collect();
    GroundTruth::new(cfg.n, freqs, coefficients)
}

/// Sampling vectors `z_1..z_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementEnsemble {
    vectors: Vec<ComplexVector>,
    seed: u64,
}

impl MeasurementEnsemble {
    pub fn new(vectors: Vec<ComplexVector>, seed: u64) -> Result<Self> {
        let n = vectors.first().map_or(0, |v| v.len());
        if n == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one non-empty vector".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                what: "sampling vector length",
                expected: n,
                found: v.len(),
            });
        }
        Ok(Self { vectors, seed })
    }

    /// Circularly-symmetric complex Gaussian entries: independent real and
    /// imaginary parts of variance 1/2.
    pub fn gaussian(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter("ensemble dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
        let vectors = (0..m)
            .map(|_| {
                ComplexVector::new(
                    (0..n)
                        .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                        .collect(),
                )
            })
            .collect();
        Self::new(vectors, seed)
    }

    pub fn n(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vectors(&self) -> &[ComplexVector] {
        &self.vectors
    }
}

/// `y_m = |⟨z_m, x⟩|² + e_m`, `e_m ~ N(0, σ²)`, clamped at zero. The RNG is
/// only consumed when `noise_variance > 0`.
pub fn measure<R: Rng>(
    x: &ComplexVector,
    ens: &MeasurementEnsemble,
    noise_variance: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if x.len() != ens.n() {
        return Err(Error::DimensionMismatch {
            what: "signal length",
            expected: ens.n(),
            found: x.len(),
        });
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidParameter("noise variance must be nonnegative".into()));
    }
    let clean = ens.vectors().iter().map(|z| z.inner(x).norm_sqr());
    if noise_variance == 0.0 {
        return Ok(clean.collect());
    }
    let normal = Normal::new(0.0, noise_variance.sqrt()).expect("valid sigma");
    Ok(clean.map(|y| (y + normal.sample(rng)).max(0.0)).collect())
}

/// Noise variance that gives the requested SNR, `‖y‖² / (M σ²)`, in dB.
pub fn noise_variance_for_snr(clean: &[f64], snr_db: f64) -> f64 {
    let power: f64 = clean.iter().map(|y| y * y).sum::<f64>() / clean.len().max(1) as f64;
    power / 10f64.powf(snr_db / 10.0)
}

/// The lifted measurement operator `L(X)_m = z_m^H X z_m` and its adjoint.
#[derive(Clone, Debug)]
pub struct LiftOperator {
    lifts: Vec<HermitianMatrix>,
}

pub fn lift_operator(ens: &MeasurementEnsemble) -> LiftOperator {
    LiftOperator {
        lifts: ens.vectors().iter().map(ComplexVector::outer).collect(),
    }
}

impl LiftOperator {
    pub fn n(&self) -> usize {
        self.lifts[0].dim()
    }

    pub fn m(&self) -> usize {
        self.lifts.len()
    }

    pub fn apply(&self, x: &HermitianMatrix) -> Vec<f64> {
        self.lifts.iter().map(|zz| zz.inner(x)).collect()
    }

    /// `Σ_m q_m z_m z_m^H`.
    pub fn adjoint(&self, q: &[f64]) -> HermitianMatrix {
        assert_eq!(q.len(), self.m(), "adjoint: length mismatch");
        let mut acc = HermitianMatrix::zeros(self.n());
        for (zz, &qm) in self.lifts.iter().zip(q) {
            acc = acc.add(&zz.scale(qm));
        }
        acc
    }

    /// Row `m` in packed Hermitian coordinates: `L(X)_m = row · pack(X)`.
    pub fn packed_rows(&self) -> Vec<Vec<f64>> {
        self.lifts.iter().map(pack).collect()
    }
}
