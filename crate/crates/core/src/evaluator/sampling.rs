use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{BoundCircuit, Clifford};
use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliString};
use crate::state::apply_clifford;
use crate::tableau::DEFAULT_STATEVECTOR_CAP;

use super::prepare_state;

/// Sample mean of a ±1-valued observable with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(shots)`.
    pub std_error: f64,
    pub shots: u64,
    pub seed: u64,
}

impl ShotEstimate {
    pub(crate) fn from_outcomes(sum: f64, sum_sq: f64, shots: u64, seed: u64) -> Self {
        let n = shots as f64;
        let mean = sum / n;
        let var = if shots > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        ShotEstimate {
            mean,
            std_error: (var / n).sqrt(),
            shots,
            seed,
        }
    }
}

/// Index sampler over a discrete distribution by inverse CDF.
pub(crate) struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    pub(crate) fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Sampler { cdf }
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cdf.last().expect("non-empty distribution");
        let u = rng.random::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Emulated device measurement of one Pauli string: rotate each support
/// qubit into the eigenbasis of its letter, draw bitstrings from `|ψ|²` and
/// average the signed support parity.
pub fn measure_pauli_sampled(c: &BoundCircuit, p: &PauliString, shots: u64, seed: u64) -> Result<ShotEstimate> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    if p.n_qubits() != c.n_qubits {
        return Err(Error::Dimension(format!(
            "{}-qubit observable for a {}-qubit circuit",
            p.n_qubits(),
            c.n_qubits
        )));
    }
    let sign = p
        .phase()
        .sign()
        .ok_or_else(|| Error::InvalidArgument("observable must be Hermitian".into()))?;
    let mut amps = prepare_state(c, DEFAULT_STATEVECTOR_CAP)?.into_amplitudes();
    for q in p.support() {
        match p.letter(q) {
            Letter::X => apply_clifford(&mut amps, &Clifford::H(q)),
            Letter::Y => {
                apply_clifford(&mut amps, &Clifford::Sdg(q));
                apply_clifford(&mut amps, &Clifford::H(q));
            }
            _ => {}
        }
    }
    let probs: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let sampler = Sampler::new(&probs);
    let support = p.support_mask() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..shots {
        let idx = sampler.sample(&mut rng);
        let v = if (idx & support).count_ones() & 1 == 1 { -sign } else { sign };
        sum += v;
        sum_sq += v * v;
    }
    Ok(ShotEstimate::from_outcomes(sum, sum_sq, shots, seed))
}
