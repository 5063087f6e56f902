//! Synthetic corpora drawn from planted controlled linear systems.
//!
//! A planted system has a transition matrix `A` and a control matrix `B` with
//! prescribed nonzero spectra. Sessions follow `y_{t+1} = A y_t + B x_t + e_t`
//! and are emitted as alternating therapist (`x_t`) and client (`y_t`) turns,
//! so they pass through exactly the same loading and windowing path as real
//! transcripts.

use std::ops::RangeInclusive;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Session, Speaker, Subscores, TalkTurn, SUBSCORE_MAX};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};

/// Two eigenvalues closer than this (relative) count as conjugates.
const CONJUGATE_TOL: f64 = 1e-12;

/// How the therapist input `x_t` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Excitation {
    /// i.i.d. unit Gaussian entries.
    Gaussian,
    /// `x_t = 0`: the client evolves autonomously.
    Off,
}

#[derive(Debug, Clone)]
pub struct PlantedSystem {
    pub a_star: DMatrix<f64>,
    pub b_star: DMatrix<f64>,
    pub noise_sigma: f64,
    pub label: u8,
    pub excitation: Excitation,
    eigenvalues_t: Vec<Complex<f64>>,
    eigenvalues_c: Vec<Complex<f64>>,
}

impl PlantedSystem {
    pub fn dim(&self) -> usize {
        self.a_star.nrows()
    }

    /// The requested nonzero spectrum of `A`, as given.
    pub fn eigenvalues_t(&self) -> &[Complex<f64>] {
        &self.eigenvalues_t
    }

    /// The requested nonzero spectrum of `B`, as given.
    pub fn eigenvalues_c(&self) -> &[Complex<f64>] {
        &self.eigenvalues_c
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues_t.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = label;
        self
    }

    pub fn with_excitation(mut self, excitation: Excitation) -> Self {
        self.excitation = excitation;
        self
    }

    pub fn describe(&self) -> SystemManifest {
        let pairs = |v: &[Complex<f64>]| v.iter().map(|z| [z.re, z.im]).collect();
        SystemManifest {
            label: self.label,
            dim: self.dim(),
            eigenvalues_t: pairs(&self.eigenvalues_t),
            eigenvalues_c: pairs(&self.eigenvalues_c),
            spectral_radius: self.spectral_radius(),
            noise_sigma: self.noise_sigma,
            excitation: self.excitation,
        }
    }
}

/// Builds `A` and `B` of size `d x d` whose nonzero spectra are exactly the
/// given lists. Noise defaults to 0, label to 0 and excitation to Gaussian.
pub fn make_planted_system(
    d: usize,
    eigenvalues_t: &[Complex<f64>],
    eigenvalues_c: &[Complex<f64>],
    seed: u64,
) -> Result<PlantedSystem> {
    let a_star = planted_matrix(d, eigenvalues_t, seed, 0)?;
    let b_star = planted_matrix(d, eigenvalues_c, seed, 1)?;
    let system = PlantedSystem {
        a_star,
        b_star,
        noise_sigma: 0.0,
        label: 0,
        excitation: Excitation::Gaussian,
        eigenvalues_t: eigenvalues_t.to_vec(),
        eigenvalues_c: eigenvalues_c.to_vec(),
    };
    if system.spectral_radius() > 1.0 {
        log::warn!(
            "planted transition spectrum has radius {:.4} > 1; trajectories will grow",
            system.spectral_radius()
        );
    }
    Ok(system)
}

/// `Q C Q^T` for the real canonical form `C` of `spectrum` and a Haar-random
/// orthogonal `Q`.
fn planted_matrix(d: usize, spectrum: &[Complex<f64>], seed: u64, stream: u64) -> Result<DMatrix<f64>> {
    if spectrum.len() > d {
        return Err(Error::Validation(format!(
            "{} eigenvalues requested for dimension {d}",
            spectrum.len()
        )));
    }
    if spectrum.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Validation("eigenvalues must be finite".into()));
    }
    let canonical = canonical_form(d, spectrum)?;
    let q = haar_orthogonal(d, derive_seed(seed, &[stream]));
    Ok(&q * canonical * q.transpose())
}

/// Block-diagonal real matrix with the given spectrum: real eigenvalues on
/// the diagonal, `[[a, b], [-b, a]]` for each pair `a +- bi`, zeros elsewhere.
fn canonical_form(d: usize, spectrum: &[Complex<f64>]) -> Result<DMatrix<f64>> {
    let mut used = vec![false; spectrum.len()];
    let mut blocks = Vec::new();
    for i in 0..spectrum.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = spectrum[i];
        if z.im == 0.0 {
            blocks.push((z.re, None));
            continue;
        }
        let tol = CONJUGATE_TOL * z.norm().max(1.0);
        let partner = (i + 1..spectrum.len()).find(|&j| !used[j] && (spectrum[j] - z.conj()).norm() <= tol);
        match partner {
            Some(j) => {
                used[j] = true;
                blocks.push((z.re, Some(z.im.abs())));
            }
            None => {
                return Err(Error::Validation(format!(
                    "eigenvalue {}{:+}i has no conjugate partner",
                    z.re, z.im
                )))
            }
        }
    }
    let mut c = DMatrix::zeros(d, d);
    let mut k = 0;
    for (re, im) in blocks {
        c[(k, k)] = re;
        if let Some(im) = im {
            c[(k, k + 1)] = im;
            c[(k + 1, k)] = -im;
            c[(k + 1, k + 1)] = re;
            k += 2;
        } else {
            k += 1;
        }
    }
    Ok(c)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, &[]);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Raw trajectory: `len` therapist inputs and `len` client states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

/// Runs the recursion from a given initial client state.
pub fn simulate_from(system: &PlantedSystem, y0: DVector<f64>, len: usize, rng: &mut impl Rng) -> Result<Trajectory> {
    let d = system.dim();
    if y0.len() != d {
        return Err(Error::DimensionMismatch {
            location: "initial state".into(),
            expected: d,
            found: y0.len(),
        });
    }
    let mut x = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    let mut state = y0;
    for t in 0..len {
        let input = match system.excitation {
            Excitation::Gaussian => DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)),
            Excitation::Off => DVector::zeros(d),
        };
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Generation { t });
        }
        let mut next = &system.a_star * &state + &system.b_star * &input;
        if system.noise_sigma > 0.0 {
            for v in next.iter_mut() {
                *v += system.noise_sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        x.push(input);
        y.push(state);
        state = next;
    }
    Ok(Trajectory { x, y })
}

/// One session of `len` exchanges. Sub-scores are all 6 for a label-1 system
/// and all 0 otherwise.
pub fn simulate_session(system: &PlantedSystem, len: usize, seed: u64) -> Result<Session> {
    if len < 2 {
        return Err(Error::Precondition(format!("session length {len} < 2")));
    }
    let mut rng = rng_for(seed, &[]);
    let d = system.dim();
    let y0 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let traj = simulate_from(system, y0, len, &mut rng)?;
    let mut turns = Vec::with_capacity(2 * len);
    for (x, y) in traj.x.into_iter().zip(traj.y) {
        turns.push(TalkTurn::new(Speaker::Therapist, x.as_slice().to_vec()));
        turns.push(TalkTurn::new(Speaker::Client, y.as_slice().to_vec()));
    }
    let score = if system.label == 1 { SUBSCORE_MAX } else { 0 };
    Ok(Session {
        session_id: "synthetic".into(),
        client_id: "synthetic".into(),
        turns,
        subscores: Subscores::uniform(score),
    })
}

/// Session `i` gets label `i % 2` (simulated by `system1` when 1, `system0`
/// otherwise) and client `i % n_clients`. The systems' own label fields are
/// ignored, so passing the same system twice yields a null corpus.
pub fn make_labeled_corpus(
    system0: &PlantedSystem,
    system1: &PlantedSystem,
    n_sessions: usize,
    n_clients: usize,
    length_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<Vec<Session>> {
    if n_sessions == 0 || n_clients == 0 || n_clients > n_sessions {
        return Err(Error::Validation(format!(
            "need 1 <= n_clients <= n_sessions, got {n_clients} clients for {n_sessions} sessions"
        )));
    }
    if length_range.is_empty() || *length_range.start() < 2 {
        return Err(Error::Validation(format!(
            "session length range {length_range:?} must be non-empty with lengths >= 2"
        )));
    }
    if system0.dim() != system1.dim() {
        return Err(Error::DimensionMismatch {
            location: "planted systems".into(),
            expected: system0.dim(),
            found: system1.dim(),
        });
    }
    let systems = [system0.clone().with_label(0), system1.clone().with_label(1)];
    (0..n_sessions)
        .into_par_iter()
        .map(|i| {
            let len = rng_for(seed, &[i as u64, 0]).random_range(length_range.clone());
            let mut session = simulate_session(&systems[i % 2], len, derive_seed(seed, &[i as u64, 1]))?;
            session.session_id = format!("s{i:04}");
            session.client_id = format!("c{:04}", i % n_clients);
            Ok(session)
        })
        .collect()
}

/// Settings for the standard two-class corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub dim: usize,
    pub n_sessions: usize,
    pub n_clients: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub noise_sigma: f64,
    /// `[re, im]` pairs.
    pub eigenvalues_t_high: Vec<[f64; 2]>,
    pub eigenvalues_t_low: Vec<[f64; 2]>,
    pub eigenvalues_c: Vec<[f64; 2]>,
    /// Use the high-label dynamics for both labels.
    pub null: bool,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            dim: 1,
            n_sessions: 40,
            n_clients: 20,
            min_len: 12,
            max_len: 24,
            noise_sigma: 0.1,
            eigenvalues_t_high: vec![[0.9, 0.0]],
            eigenvalues_t_low: vec![[0.2, 0.0]],
            eigenvalues_c: vec![[0.5, 0.0]],
            null: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemManifest {
    pub label: u8,
    pub dim: usize,
    pub eigenvalues_t: Vec<[f64; 2]>,
    pub eigenvalues_c: Vec<[f64; 2]>,
    pub spectral_radius: f64,
    pub noise_sigma: f64,
    pub excitation: Excitation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: CorpusConfig,
    pub systems: Vec<SystemManifest>,
}

fn complex_list(pairs: &[[f64; 2]]) -> Vec<Complex<f64>> {
    pairs.iter().map(|&[re, im]| Complex::new(re, im)).collect()
}

/// The two planted systems (label 0, label 1) described by `config`.
pub fn corpus_systems(config: &CorpusConfig) -> Result<[PlantedSystem; 2]> {
    let c = complex_list(&config.eigenvalues_c);
    let high = make_planted_system(config.dim, &complex_list(&config.eigenvalues_t_high), &c, derive_seed(config.seed, &[1]))?
        .with_noise(config.noise_sigma)
        .with_label(1);
    let low = if config.null {
        high.clone().with_label(0)
    } else {
        make_planted_system(config.dim, &complex_list(&config.eigenvalues_t_low), &c, derive_seed(config.seed, &[0]))?
            .with_noise(config.noise_sigma)
    };
    Ok([low, high])
}

pub fn generate_corpus(config: &CorpusConfig) -> Result<(Vec<Session>, CorpusManifest)> {
    if config.min_len > config.max_len {
        return Err(Error::Validation(format!(
            "min_len {} exceeds max_len {}",
            config.min_len, config.max_len
        )));
    }
    let [low, high] = corpus_systems(config)?;
    let sessions = make_labeled_corpus(
        &low,
        &high,
        config.n_sessions,
        config.n_clients,
        config.min_len..=config.max_len,
        derive_seed(config.seed, &[2]),
    )?;
    let manifest = CorpusManifest {
        config: config.clone(),
        systems: vec![low.describe(), high.describe()],
    };
    Ok((sessions, manifest))
}
