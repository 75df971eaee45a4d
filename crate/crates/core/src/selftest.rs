//! Quick invariant suites behind the `selftest` subcommand.

use std::time::Instant;

use rand::Rng;

use crate::error::Result;
use crate::formulations::{atomic_norm, bordered, solve_phaselift, PhaseRetrievalInstance};
use crate::linalg::{toeplitz_adjoint, toeplitz_embed, Complex64, ComplexVector, HermitianMatrix, ToeplitzParam};
use crate::sdp::{solve, Block, ProblemBuilder, SolveStatus, SolverOptions};
use crate::signal::{atom, measure, trial_rng, wrapped_distance, MeasurementEnsemble};
use crate::spectral::{align_phase, retrieve_signal, vandermonde_decompose, DEFAULT_RANK_TOL};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn random_vector<R: Rng>(n: usize, rng: &mut R) -> ComplexVector {
    ComplexVector::new((0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
}

fn lifting_identity() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 0..100 {
        let mut rng = trial_rng(k, 11);
        let x = random_vector(8, &mut rng);
        let ens = MeasurementEnsemble::gaussian(8, 16, k)?;
        let xx = x.outer();
        for z in ens.vectors() {
            worst = worst.max((z.inner(&x).norm_sqr() - xx.quad_form(z)).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max |⟨z,x⟩|² − z^H X z| = {worst:.2e}")))
}

fn schur_equivalence() -> Result<(bool, String)> {
    let mut disagreements = 0;
    for k in 0..100 {
        let mut rng = trial_rng(k, 12);
        let n = 6;
        let mut u = random_vector(n, &mut rng).as_slice().to_vec();
        u[0] = Complex64::new(2.0 * n as f64, 0.0);
        let t = toeplitz_embed(&ToeplitzParam::new(ComplexVector::new(u))?);
        let x = random_vector(n, &mut rng);
        let v: f64 = rng.gen_range(0.05..3.0);
        let block = bordered(v, &x, &t).min_eigenvalue()? >= -1e-9;
        let schur = t.scale(v).sub(&x.outer()).min_eigenvalue()? >= -1e-9;
        disagreements += usize::from(block != schur);
    }
    Ok((disagreements == 0, format!("{disagreements} disagreements in 100 instances")))
}

fn toeplitz_adjointness() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 0..50 {
        let mut rng = trial_rng(k, 13);
        let mut u = random_vector(5, &mut rng).as_slice().to_vec();
        u[0].im = 0.0;
        let u = ToeplitzParam::new(ComplexVector::new(u))?;
        let m = HermitianMatrix::from_upper(5, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        worst = worst.max((toeplitz_embed(&u).inner(&m) - u.inner(&toeplitz_adjoint(&m))).abs());
    }
    Ok((worst <= 1e-12, format!("max |⟨T(u),M⟩ − ⟨u,T*(M)⟩| = {worst:.2e}")))
}

fn vandermonde_round_trip() -> Result<(bool, String)> {
    let n = 12;
    let mut worst_f = 0.0f64;
    let mut worst_d = 0.0f64;
    for k in 0..50 {
        let mut rng = trial_rng(k, 14);
        let f0: f64 = rng.gen();
        let freqs = [f0, (f0 + rng.gen_range(2.0 / n as f64..0.5)).rem_euclid(1.0)];
        let powers = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
        let u: Vec<Complex64> = (0..n)
            .map(|i| {
                freqs
                    .iter()
                    .zip(&powers)
                    .map(|(&f, &d)| d * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * i as f64))
                    .sum()
            })
            .collect();
        let est = vandermonde_decompose(&ToeplitzParam::new(ComplexVector::new(u))?, DEFAULT_RANK_TOL, None)?;
        if est.model_order() != 2 {
            return Ok((false, format!("instance {k}: model order {}", est.model_order())));
        }
        for (&f, &d) in freqs.iter().zip(&powers) {
            let (i, dist) = est
                .frequencies
                .iter()
                .enumerate()
                .map(|(i, &g)| (i, wrapped_distance(f, g)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("two estimates");
            worst_f = worst_f.max(dist);
            worst_d = worst_d.max((est.powers[i] - d).abs());
        }
    }
    Ok((worst_f <= 1e-6 && worst_d <= 1e-4, format!("max freq error {worst_f:.2e}, max power error {worst_d:.2e}")))
}

fn canned_sdp() -> Result<(bool, String)> {
    // min trace(X), X ⪰ 0 (2×2), X(1,1) = 1  →  1
    let mut b = ProblemBuilder::new();
    let x = b.add_block(Block::psd(2));
    b.add_objective(x, 1.0);
    b.add_objective(x + 1, 1.0);
    b.add_equality(vec![(x, 1.0)], 1.0);
    let sol = solve(&b.build()?, &SolverOptions::default(), None)?;
    let ok = sol.status == SolveStatus::Solved && (sol.objective - 1.0).abs() <= 2e-5;
    Ok((ok, format!("objective {:.8}, status {}", sol.objective, sol.status)))
}

fn atomic_norm_single_atom() -> Result<(bool, String)> {
    let s = Complex64::from_polar(1.3, -0.7);
    let val = atomic_norm(&atom(0.27, 8).scale(s), &SolverOptions::default())?;
    Ok(((val - s.norm()).abs() <= 1e-4, format!("‖s a(f)‖_A = {val:.6} vs |s| = {:.6}", s.norm())))
}

fn phaselift_small() -> Result<(bool, String)> {
    let mut rng = trial_rng(5, 15);
    let x = random_vector(4, &mut rng);
    let ens = MeasurementEnsemble::gaussian(4, 24, 77)?;
    let y = measure(&x, &ens, 0.0, &mut rng)?;
    let sol = solve_phaselift(&PhaseRetrievalInstance::new(ens, y)?, &SolverOptions::default())?;
    let err = align_phase(&retrieve_signal(&sol.x_hat)?, &x)?.1;
    Ok((err <= 1e-3, format!("relative error {err:.2e}")))
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 7] = [
    ("lifting identity", lifting_identity),
    ("schur equivalence", schur_equivalence),
    ("toeplitz adjoint", toeplitz_adjointness),
    ("vandermonde round trip", vandermonde_round_trip),
    ("canned sdp", canned_sdp),
    ("atomic norm of one atom", atomic_norm_single_atom),
    ("phaselift N=4 M=24", phaselift_small),
];

pub fn run_all() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let start = Instant::now();
            let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckOutcome {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
