use std::fmt::Write as _;
use std::path::Path;

use mimofb::artifact::artifact_kind;
use mimofb::codebook::Codebook;
use mimofb::neural::FeedbackModel;
use mimofb::numerics::vec_norm;

use crate::error::{CliError, CliResult};

/// Human-readable summary of a model or codebook file; fails on any integrity problem.
pub fn describe(path: &Path) -> CliResult<String> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut s = String::new();
    match artifact_kind(&text) {
        Some("mimofb-model") => {
            let m = FeedbackModel::from_text(path, &text)?;
            let meta = m.meta();
            let widths = |w: Vec<usize>| {
                w.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let _ = writeln!(s, "model {}", path.display());
            let _ = writeln!(
                s,
                "N_t {}, N_r {}, L {}, B {}",
                meta.n_tx,
                meta.n_rx,
                meta.pilot_len,
                m.bits()
            );
            let _ = writeln!(s, "encoder input {}", meta.encoder_inputs());
            let _ = writeln!(s, "encoder widths {}", widths(m.encoder_widths()));
            let _ = writeln!(s, "decoder widths {}", widths(m.decoder_widths()));
            let acts = |ls: &[mimofb::neural::Layer]| {
                ls.iter()
                    .map(|l| l.activation.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let _ = writeln!(s, "encoder activations {}", acts(m.encoder_layers()));
            let _ = writeln!(s, "decoder activations {}", acts(m.decoder_layers()));
            let _ = writeln!(s, "parameters {}", m.parameter_count());
        }
        Some("mimofb-codebook") => {
            let cb = Codebook::from_text(path, &text)?;
            let worst = cb
                .words()
                .iter()
                .map(|w| (vec_norm(w) - 1.0).abs())
                .fold(0.0, f64::max);
            let _ = writeln!(s, "codebook {}", path.display());
            let _ = writeln!(
                s,
                "provenance {}, N_t {}, B {}",
                cb.provenance(),
                cb.n_tx(),
                cb.bits()
            );
            let _ = writeln!(s, "words {}", cb.len());
            let _ = writeln!(
                s,
                "unit norm {} (max deviation {worst:.1e})",
                if worst <= 1e-12 { "yes" } else { "no" }
            );
        }
        _ => {
            return Err(mimofb::Error::CorruptArtifact {
                path: path.to_path_buf(),
                reason: "not a model or codebook file".into(),
            }
            .into())
        }
    }
    s.push_str("integrity ok\n");
    Ok(s)
}
