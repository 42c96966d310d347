use std::path::Path;

use mimofb::channel::{ChannelModel, ChannelSpec, PhasePolicy, PilotSpec};
use mimofb::codebook::{
    dft_codebook, effective_gain, lloyd_design, select_pmi, Codebook, LloydConfig, Provenance,
};
use mimofb::evaluation::Link;
use mimofb::numerics::{sample_standard_complex_gaussian, Complex64, ComplexMatrix, RngStream};
use mimofb::Error;
use proptest::prelude::*;

fn brute_force(h: &ComplexMatrix, cb: &Codebook) -> usize {
    // explicit w^H H^H H w, first maximum wins
    let g = h.gram();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, w) in cb.words().iter().enumerate() {
        let gw = g.mul_vec(w).unwrap();
        let q: f64 = w.iter().zip(&gw).map(|(a, b)| (a.conj() * b).re).sum();
        if q > best.1 + 1e-12 * q.abs().max(1.0) {
            best = (i, q);
        }
    }
    best.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pmi_matches_brute_force(seed in any::<u64>(), nr in 1usize..=4, bits in 1usize..=6) {
        let cb = dft_codebook(4, bits).unwrap();
        let h = sample_standard_complex_gaussian(&mut RngStream::new(seed, 0), nr, 4);
        let i = select_pmi(&h, &cb).unwrap();
        let j = brute_force(&h, &cb);
        let (gi, gj) = (effective_gain(&h, cb.word(i)), effective_gain(&h, cb.word(j)));
        prop_assert!(i == j || (gi - gj).abs() <= 1e-12 * gi.max(1.0));
    }

    #[test]
    fn dft_words_unit_norm(n in 1usize..=16, bits in 1usize..=8) {
        let cb = dft_codebook(n, bits).unwrap();
        prop_assert_eq!(cb.len(), 1 << bits);
        for w in cb.words() {
            let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn lloyd_finds_two_clusters() {
    // rank-one channels around two orthogonal directions
    let dirs = [
        vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ];
    let mut rng = RngStream::new(11, 0);
    let training: Vec<ComplexMatrix> = (0..400)
        .map(|k| {
            let d = &dirs[k % 2];
            let g = rng.complex_normal();
            let jitter = rng.complex_normal() * 0.01;
            ComplexMatrix::from_fn(1, 2, |_, j| (d[j] + jitter).conj() * g)
        })
        .collect();
    let out = lloyd_design(&training, &LloydConfig::new(1), &mut RngStream::new(1, 0)).unwrap();
    let mut found = [false; 2];
    for w in out.codebook.words() {
        for (k, d) in dirs.iter().enumerate() {
            let overlap: Complex64 = w.iter().zip(d).map(|(a, b)| a.conj() * b).sum();
            if overlap.norm() > 0.99 {
                found[k] = true;
            }
        }
    }
    assert_eq!(found, [true, true]);
}

#[test]
fn lloyd_beats_dft_on_correlated_channel() {
    let spec = ChannelSpec::new(8, 4, 0.7, PhasePolicy::UniformRandom).unwrap();
    let link = Link::new(
        ChannelModel::new(spec).unwrap(),
        PilotSpec::from_snr_db(4, 0.0).unwrap(),
    );
    let train = link
        .lloyd_training_set(10_000, true, &RngStream::new(1, 0))
        .unwrap();
    let out = lloyd_design(&train, &LloydConfig::new(3), &mut RngStream::new(2, 0)).unwrap();
    assert!(out
        .distortion
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
    let dft = dft_codebook(8, 3).unwrap();
    let held = link
        .lloyd_training_set(10_000, true, &RngStream::new(3, 0))
        .unwrap();
    let d: Vec<f64> = held
        .iter()
        .map(|h| {
            effective_gain(h, out.codebook.word(select_pmi(h, &out.codebook).unwrap()))
                - effective_gain(h, dft.word(select_pmi(h, &dft).unwrap()))
        })
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean > 3.0 * sd / n.sqrt(), "Lloyd - DFT = {mean}");
}

#[test]
fn codebook_file_round_trip() {
    let cb = dft_codebook(8, 6).unwrap();
    let dir = std::env::temp_dir().join(format!("mimofb-cb-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("dft.cb");
    cb.save(&path).unwrap();
    let back = Codebook::load(&path).unwrap();
    assert_eq!(back, cb);
    assert_eq!(back.provenance(), Provenance::Dft);
    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replacen("e-1", "e-2", 1);
    assert!(matches!(
        Codebook::from_text(Path::new("x"), &tampered),
        Err(Error::CorruptArtifact { .. })
    ));
    std::fs::remove_dir_all(&dir).unwrap();
}
