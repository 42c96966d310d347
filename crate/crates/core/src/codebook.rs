//! Beamforming codebooks: oversampled DFT construction, generalized Lloyd design and
//! PMI selection by exhaustive effective-gain search.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::seq::index::sample as sample_indices;

use crate::artifact::{self, float_line};
use crate::error::{Error, Result};
use crate::estimation::{ChannelEstimate, LmmseFilter};
use crate::numerics::{
    canonicalize_phase, principal_eigenvector, vec_norm, Complex64, ComplexMatrix, RngStream,
    DEFAULT_TOL,
};

const FILE_TAG: &str = "mimofb-codebook";
const FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Dft,
    Lloyd,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Dft => "dft",
            Provenance::Lloyd => "lloyd",
        })
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dft" => Ok(Provenance::Dft),
            "lloyd" => Ok(Provenance::Lloyd),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

/// `2^bits` unit-norm beamformers in `C^{n_tx}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n_tx: usize,
    bits: usize,
    words: Vec<Vec<Complex64>>,
    provenance: Provenance,
}

impl Codebook {
    /// Validates the word count and unit norms.
    pub fn new(
        n_tx: usize,
        bits: usize,
        words: Vec<Vec<Complex64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(Error::invalid("bits", format!("{bits} is outside 1..=24")));
        }
        if words.len() != 1 << bits {
            return Err(Error::shape("Codebook::new", 1usize << bits, words.len()));
        }
        for w in &words {
            if w.len() != n_tx {
                return Err(Error::shape("Codebook::new", n_tx, w.len()));
            }
            let norm = vec_norm(w);
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(
                    "words",
                    format!("codeword norm {norm} is not 1"),
                ));
            }
        }
        Ok(Self {
            n_tx,
            bits,
            words,
            provenance,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> &[Complex64] {
        &self.words[i]
    }

    pub fn words(&self) -> &[Vec<Complex64>] {
        &self.words
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn to_text(&self) -> String {
        let mut body = format!(
            "{FILE_TAG} {FILE_VERSION}\nn_tx {}\nbits {}\nprovenance {}\n",
            self.n_tx, self.bits, self.provenance
        );
        for w in &self.words {
            body.push_str(&float_line(w.iter().flat_map(|z| [z.re, z.im])));
        }
        artifact::seal(body)
    }

    pub fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut r = artifact::unseal(path, text)?;
        let version: u32 = r.value(FILE_TAG)?;
        if version != FILE_VERSION {
            return Err(r.error(format!("unsupported codebook version {version}")));
        }
        let n_tx: usize = r.value("n_tx")?;
        let bits: usize = r.value("bits")?;
        let provenance: Provenance = r.value("provenance")?;
        if bits == 0 || bits > 24 || n_tx == 0 {
            return Err(r.error("invalid header"));
        }
        let mut words = Vec::with_capacity(1 << bits);
        for _ in 0..(1usize << bits) {
            let vals = r.floats(2 * n_tx)?;
            words.push(vals.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect());
        }
        r.finish()?;
        Codebook::new(n_tx, bits, words, provenance)
            .map_err(|e| artifact::corrupt(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(path, &text)
    }
}

/// Oversampled DFT codebook: word `i` is `(1/√N_t)·[e^{j2π i k / 2^B}]_{k=0..N_t}`.
pub fn dft_codebook(n_tx: usize, bits: usize) -> Result<Codebook> {
    if bits == 0 {
        return Err(Error::invalid("bits", "must be at least 1"));
    }
    let size = 1usize << bits;
    let scale = 1.0 / (n_tx as f64).sqrt();
    let words = (0..size)
        .map(|i| {
            (0..n_tx)
                .map(|k| {
                    Complex64::from_polar(scale, 2.0 * PI * ((i * k) % size) as f64 / size as f64)
                })
                .collect()
        })
        .collect();
    Codebook::new(n_tx, bits, words, Provenance::Dft)
}

/// `||H w||²`.
#[inline]
pub fn effective_gain(h: &ComplexMatrix, w: &[Complex64]) -> f64 {
    let n = h.cols();
    h.as_slice()
        .chunks_exact(n)
        .map(|row| {
            row.iter()
                .zip(w)
                .map(|(a, b)| a * b)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum()
}

/// Index (0-based) of the codeword maximizing `||Ĥ w_i||²`; ties go to the smallest index.
pub fn select_pmi(h_hat: &ComplexMatrix, cb: &Codebook) -> Result<usize> {
    if h_hat.cols() != cb.n_tx {
        return Err(Error::shape("select_pmi", cb.n_tx, h_hat.cols()));
    }
    Ok(argmax_gain(h_hat, cb.words()).0)
}

fn argmax_gain(h: &ComplexMatrix, words: &[Vec<Complex64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, w) in words.iter().enumerate() {
        let g = effective_gain(h, w);
        if g > best.1 {
            best = (i, g);
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct LloydConfig {
    pub bits: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl LloydConfig {
    pub fn new(bits: usize) -> Self {
        Self {
            bits,
            max_iters: 100,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub codebook: Codebook,
    /// Average distortion `-mean max_i ||Ĥ w_i||²` after each assignment step.
    pub distortion: Vec<f64>,
}

/// Generalized Lloyd design under the distortion `d(Ĥ, w) = -||Ĥ w||²`.
///
/// Cells are formed by [`select_pmi`]; each centroid is the principal eigenvector of the
/// cell's mean `Ĥ^H Ĥ`. Initial words are principal eigenvectors of `2^B` distinct random
/// training samples. An empty cell is reseeded from the worst-served member of the cell with
/// the highest mean distortion.
pub fn lloyd_design(
    training: &[ComplexMatrix],
    cfg: &LloydConfig,
    rng: &mut RngStream,
) -> Result<LloydOutcome> {
    let size = 1usize << cfg.bits;
    let required = (10 * size).max(1);
    if training.len() < required {
        return Err(Error::EmptyTrainingSet {
            found: training.len(),
            required,
        });
    }
    let n_tx = training[0].cols();
    if let Some(bad) = training.iter().find(|h| h.cols() != n_tx) {
        return Err(Error::shape("lloyd_design", n_tx, bad.cols()));
    }
    let grams: Vec<ComplexMatrix> = training.iter().map(ComplexMatrix::gram).collect();

    let mut words: Vec<Vec<Complex64>> = sample_indices(rng, training.len(), size)
        .into_iter()
        .map(|i| principal_direction(&grams[i]))
        .collect::<Result<_>>()?;

    let mut assignment = vec![0usize; training.len()];
    let mut gains = vec![0.0; training.len()];
    let mut distortion = Vec::new();

    for iter in 0..=cfg.max_iters {
        // assignment
        for (k, h) in training.iter().enumerate() {
            let (i, g) = argmax_gain(h, &words);
            assignment[k] = i;
            gains[k] = g;
        }
        let d = -gains.iter().sum::<f64>() / training.len() as f64;
        let done = match distortion.last() {
            Some(&prev) => {
                let prev: f64 = prev;
                (prev - d) <= cfg.rel_tol * prev.abs() || iter == cfg.max_iters
            }
            None => iter == cfg.max_iters,
        };
        distortion.push(d);
        if done {
            break;
        }

        // centroid
        let mut sums = vec![ComplexMatrix::zeros(n_tx, n_tx); size];
        let mut counts = vec![0usize; size];
        let mut cell_gain = vec![0.0; size];
        for (k, g) in grams.iter().enumerate() {
            let c = assignment[k];
            counts[c] += 1;
            cell_gain[c] += gains[k];
            for (acc, x) in sums[c].as_mut_slice().iter_mut().zip(g.as_slice()) {
                *acc += x;
            }
        }
        for c in 0..size {
            if counts[c] == 0 {
                continue;
            }
            let candidate = principal_direction(&sums[c])?;
            // keep the old word if round-off makes the new one no better on this cell
            if quad_form(&sums[c], &candidate) >= quad_form(&sums[c], &words[c]) {
                words[c] = candidate;
            }
        }
        for c in 0..size {
            if counts[c] > 0 {
                continue;
            }
            let donor = (0..size).filter(|&j| counts[j] >= 2).min_by(|&a, &b| {
                let ma = cell_gain[a] / counts[a] as f64;
                let mb = cell_gain[b] / counts[b] as f64;
                ma.total_cmp(&mb)
            });
            let Some(donor) = donor else { continue };
            let worst = (0..training.len())
                .filter(|&k| assignment[k] == donor)
                .min_by(|&a, &b| gains[a].total_cmp(&gains[b]))
                .expect("donor cell has members");
            words[c] = principal_direction(&grams[worst])?;
            assignment[worst] = c;
            counts[donor] -= 1;
            counts[c] = 1;
            cell_gain[donor] -= gains[worst];
        }
    }

    Ok(LloydOutcome {
        codebook: Codebook::new(n_tx, cfg.bits, words, Provenance::Lloyd)?,
        distortion,
    })
}

fn principal_direction(gram: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let (_, mut v) = principal_eigenvector(gram, DEFAULT_TOL)?;
    let n = vec_norm(&v);
    for z in v.iter_mut() {
        *z /= n;
    }
    canonicalize_phase(&mut v);
    Ok(v)
}

fn quad_form(a: &ComplexMatrix, w: &[Complex64]) -> f64 {
    let aw = a.mul_vec(w).expect("square gram");
    crate::numerics::inner(w, &aw).re
}

/// Classical receiver + transmitter chain: LMMSE estimate, PMI search, table lookup.
pub fn baseline_feedback(
    y: &ComplexMatrix,
    p: &ComplexMatrix,
    pilot_energy: f64,
    noise_var: f64,
    r_t: &ComplexMatrix,
    cb: &Codebook,
) -> Result<(usize, Vec<Complex64>)> {
    let est: ChannelEstimate = LmmseFilter::new(p, pilot_energy, noise_var, r_t)?.apply(y)?;
    let i = select_pmi(&est.h_hat, cb)?;
    Ok((i, cb.word(i).to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dft_two_antennas_one_bit() {
        let cb = dft_codebook(2, 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(cb.len(), 2);
        assert!((cb.word(0)[0] - c(s, 0.0)).norm() < 1e-15);
        assert!((cb.word(0)[1] - c(s, 0.0)).norm() < 1e-15);
        assert!((cb.word(1)[1] - c(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dft_words_unit_norm_and_orthonormal_when_square() {
        for (nt, bits) in [(8, 6), (4, 4), (3, 1)] {
            let cb = dft_codebook(nt, bits).unwrap();
            assert!(cb.words().iter().all(|w| (vec_norm(w) - 1.0).abs() < 1e-12));
        }
        let cb = dft_codebook(4, 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ip = crate::numerics::inner(cb.word(i), cb.word(j)).norm();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pmi_axis_aligned() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        let cb = Codebook::new(
            2,
            1,
            vec![
                vec![c(1.0, 0.0), c(0.0, 0.0)],
                vec![c(0.0, 0.0), c(1.0, 0.0)],
            ],
            Provenance::Dft,
        )
        .unwrap();
        assert_eq!(select_pmi(&h, &cb).unwrap(), 0);
        assert_eq!(select_pmi(&h.scale(7.5), &cb).unwrap(), 0);
        let wrong = ComplexMatrix::zeros(1, 3);
        assert!(matches!(
            select_pmi(&wrong, &cb),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn pmi_ties_go_to_smallest_index() {
        let h = ComplexMatrix::zeros(2, 2);
        let cb = dft_codebook(2, 2).unwrap();
        assert_eq!(select_pmi(&h, &cb).unwrap(), 0);
    }

    #[test]
    fn lloyd_rejects_small_training_sets() {
        let set = vec![ComplexMatrix::identity(2); 15];
        let err = lloyd_design(&set, &LloydConfig::new(1), &mut RngStream::new(0, 0)).unwrap_err();
        assert!(matches!(
            err,
            Error::EmptyTrainingSet {
                found: 15,
                required: 20
            }
        ));
    }

    #[test]
    fn lloyd_degenerate_identical_samples() {
        // rank-one Ĥ^H Ĥ: every centroid collapses onto the same principal direction
        let v = [c(0.6, 0.0), c(0.0, 0.8)];
        let h = ComplexMatrix::from_rows(&[vec![v[0].conj() * 2.0, v[1].conj() * 2.0]]);
        let set = vec![h.clone(); 40];
        let out = lloyd_design(&set, &LloydConfig::new(2), &mut RngStream::new(1, 0)).unwrap();
        let lambda_max = 4.0;
        assert!((out.distortion.last().unwrap() + lambda_max).abs() < 1e-12);
        for w in out.codebook.words() {
            assert!((crate::numerics::inner(w, &v).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn codebook_text_round_trip_and_corruption() {
        let cb = dft_codebook(3, 3).unwrap();
        let text = cb.to_text();
        let back = Codebook::from_text(Path::new("cb"), &text).unwrap();
        assert_eq!(back, cb);
        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            Codebook::from_text(Path::new("cb"), truncated),
            Err(Error::CorruptArtifact { .. })
        ));
    }
}
