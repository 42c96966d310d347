//! Experiment configuration: a TOML document, overlaid with `section.key=value` overrides.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mimofb::channel::{ChannelSpec, PhasePolicy, PilotSpec};
use mimofb::codebook::LloydConfig;
use mimofb::evaluation::{DataLinkSpec, Scheme};
use mimofb::neural::{Architecture, Optimizer, TrainConfig};
use mimofb::numerics::RngStream;
use serde::Deserialize;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Fig2Gain,
    Fig3Ser,
    Table1Timing,
    Train,
    DesignCodebook,
    Smoke,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Fig2Gain => "fig2-gain",
            Scenario::Fig3Ser => "fig3-ser",
            Scenario::Table1Timing => "table1-timing",
            Scenario::Train => "train",
            Scenario::DesignCodebook => "design-codebook",
            Scenario::Smoke => "smoke",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub n_tx: usize,
    pub n_rx: usize,
    pub t_mag: f64,
    /// A single fixed correlation phase in radians.
    pub phase: Option<f64>,
    /// Without `phase`: results are pooled over this many fixed phases drawn from the seed,
    /// one per equal slice of `[0, 2π)`, each with its own trained model and codebook.
    pub phase_draws: usize,
    /// Draw a fresh phase for every channel realization instead.
    pub phase_per_realization: bool,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            n_tx: 8,
            n_rx: 4,
            t_mag: 0.7,
            phase: None,
            phase_draws: 4,
            phase_per_realization: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PilotSection {
    pub length: usize,
    /// `E_p/σ²` in dB with `σ² = 1`.
    pub snr_db: f64,
}

impl Default for PilotSection {
    fn default() -> Self {
        Self {
            length: 4,
            snr_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    /// Data SNRs `E_s/σ²` (dB) for the SER scenario.
    pub snr_db: Vec<f64>,
    pub symbols: usize,
    pub block_len: usize,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            snr_db: (-10..=0).map(f64::from).collect(),
            symbols: 1_000_000,
            block_len: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepParam {
    L,
    #[serde(rename = "pilot_snr_db")]
    PilotSnrDb,
    #[serde(rename = "t_mag")]
    TMag,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub optimizer: String,
    pub probe_every: usize,
    pub probe_size: usize,
    /// 0 disables early stopping.
    pub patience: usize,
    /// Defaults to the experiment seed.
    pub seed: Option<u64>,
    pub encoder_hidden: Option<Vec<usize>>,
    pub decoder_hidden: Option<Vec<usize>>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            iterations: d.iterations,
            optimizer: "adam".into(),
            probe_every: d.probe_every,
            probe_size: d.probe_size,
            patience: d.patience.unwrap_or(0),
            seed: None,
            encoder_hidden: None,
            decoder_hidden: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookSection {
    /// `lloyd` or `dft`, for the design-codebook scenario.
    pub kind: String,
    pub training_samples: usize,
    /// Design on true channels; `false` designs on LMMSE estimates at the operating point.
    pub true_csi: bool,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for CodebookSection {
    fn default() -> Self {
        let d = LloydConfig::new(1);
        Self {
            kind: "lloyd".into(),
            training_samples: 10_000,
            true_csi: true,
            max_iters: d.max_iters,
            rel_tol: d.rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub trials: usize,
    pub timing_trials: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            trials: 10_000,
            timing_trials: 10_000,
        }
    }
}

/// Artifact paths; `{L}`, `{B}`, `{seed}` and `{psi}` (phase draw index) are substituted per point.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArtifactSection {
    pub model: Option<String>,
    pub codebook: Option<String>,
    pub trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Option<Scenario>,
    pub seed: u64,
    pub bits: usize,
    pub schemes: Vec<String>,
    pub output: Option<PathBuf>,
    pub channel: ChannelSection,
    pub pilots: PilotSection,
    pub link: LinkSection,
    pub sweep: Option<SweepSection>,
    pub train: TrainSection,
    pub codebook: CodebookSection,
    pub eval: EvalSection,
    pub artifacts: ArtifactSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 0,
            bits: 6,
            schemes: Scheme::ALL.iter().map(|s| s.to_string()).collect(),
            output: None,
            channel: ChannelSection::default(),
            pilots: PilotSection::default(),
            link: LinkSection::default(),
            sweep: None,
            train: TrainSection::default(),
            codebook: CodebookSection::default(),
            eval: EvalSection::default(),
            artifacts: ArtifactSection::default(),
        }
    }
}

/// Defaults of the `smoke` scenario, applied beneath any file or flag values.
pub const SMOKE_PRESET: &str = r#"
bits = 4
[channel]
n_tx = 4
n_rx = 2
phase_draws = 1
[pilots]
length = 2
[train]
iterations = 2000
batch_size = 500
[codebook]
training_samples = 2000
[eval]
trials = 2000
"#;

// Stream id under the experiment seed for the correlation phase draws.
const STREAM_PHASES: u64 = 12;

/// One point of the sweep at one correlation phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub channel: ChannelSpec,
    pub pilots: PilotSpec,
    /// Index of the phase draw; 0 when there is only one.
    pub phase_index: usize,
}

impl ExperimentConfig {
    /// Parses `base` (may be empty), then `file`, then `overrides` (`section.key=value`).
    pub fn load(base: &str, file: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table: Table =
            toml::from_str(base).map_err(|e| CliError::config("preset", e.to_string()))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let file_table: Table = toml::from_str(&text)
                .map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
            merge(&mut table, file_table);
        }
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| {
                CliError::config(o.clone(), "override must look like section.key=value")
            })?;
            set_dotted(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        let cfg: ExperimentConfig =
            Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| {
                    CliError::config(field_of(&e), e.message().trim().to_string())
                })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.bits == 0 || self.bits > 24 {
            return Err(CliError::config(
                "bits",
                format!("{} is outside 1..=24", self.bits),
            ));
        }
        self.schemes()?;
        for p in self.points()?.iter().flatten() {
            p.pilots.validate().map_err(|e| core_config("pilots", e))?;
        }
        if self.channel.phase.is_none() && !self.channel.phase_per_realization {
            if self.channel.phase_draws == 0 {
                return Err(CliError::config(
                    "channel.phase_draws",
                    "must be at least 1",
                ));
            }
            if self.channel.phase_draws > 1 {
                for (field, t) in [
                    ("artifacts.model", &self.artifacts.model),
                    ("artifacts.codebook", &self.artifacts.codebook),
                ] {
                    if t.as_deref().is_some_and(|t| !t.contains("{psi}")) {
                        return Err(CliError::config(
                            field,
                            "needs a `{psi}` placeholder when pooling over phase draws",
                        ));
                    }
                }
            }
        }
        if self.link.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(CliError::config("link.snr_db", "values must be finite"));
        }
        if self.link.symbols == 0 {
            return Err(CliError::config("link.symbols", "must be at least 1"));
        }
        if self.link.block_len == 0 {
            return Err(CliError::config("link.block_len", "must be at least 1"));
        }
        if self.eval.trials == 0 {
            return Err(CliError::config("eval.trials", "must be at least 1"));
        }
        if self.eval.timing_trials == 0 {
            return Err(CliError::config("eval.timing_trials", "must be at least 1"));
        }
        self.train_config()?
            .validate()
            .map_err(|e| core_config("train", e))?;
        self.architecture()?;
        if !matches!(self.codebook.kind.as_str(), "lloyd" | "dft") {
            return Err(CliError::config(
                "codebook.kind",
                "expected `lloyd` or `dft`",
            ));
        }
        if self.codebook.max_iters == 0 {
            return Err(CliError::config("codebook.max_iters", "must be at least 1"));
        }
        if !(self.codebook.rel_tol >= 0.0) {
            return Err(CliError::config("codebook.rel_tol", "must be non-negative"));
        }
        Ok(())
    }

    pub fn schemes(&self) -> CliResult<Vec<Scheme>> {
        if self.schemes.is_empty() {
            return Err(CliError::config("schemes", "list at least one scheme"));
        }
        self.schemes
            .iter()
            .map(|s| Scheme::from_str(s).map_err(|e| CliError::config("schemes", e)))
            .collect()
    }

    /// The correlation phase of every draw, in draw order.
    pub fn phases(&self) -> Vec<PhasePolicy> {
        if self.channel.phase_per_realization {
            return vec![PhasePolicy::UniformRandom];
        }
        if let Some(psi) = self.channel.phase {
            return vec![PhasePolicy::Fixed(psi)];
        }
        // one uniform draw per equal slice of [0, 2π): unbiased, with far less spread than
        // independent draws when only a few phases are affordable
        let root = RngStream::new(self.seed, STREAM_PHASES);
        let k_total = self.channel.phase_draws as f64;
        (0..self.channel.phase_draws)
            .map(|k| {
                PhasePolicy::Fixed(TAU * (k as f64 + root.derive(k as u64).uniform()) / k_total)
            })
            .collect()
    }

    fn channel_spec(&self, t_mag: f64, phase: PhasePolicy) -> CliResult<ChannelSpec> {
        ChannelSpec::new(self.channel.n_tx, self.channel.n_rx, t_mag, phase)
            .map_err(|e| core_config("channel", e))
    }

    fn pilot_spec(&self, length: usize, snr_db: f64) -> CliResult<PilotSpec> {
        PilotSpec::from_snr_db(length, snr_db).map_err(|e| core_config("pilots", e))
    }

    /// Sweep points in order, each expanded over the phase draws.
    pub fn points(&self) -> CliResult<Vec<Vec<Point>>> {
        let phases = self.phases();
        let expand = |t_mag: f64, length: usize, snr_db: f64| -> CliResult<Vec<Point>> {
            let pilots = self.pilot_spec(length, snr_db)?;
            phases
                .iter()
                .enumerate()
                .map(|(k, &phase)| {
                    Ok(Point {
                        channel: self.channel_spec(t_mag, phase)?,
                        pilots,
                        phase_index: k,
                    })
                })
                .collect()
        };
        let (t_mag, length, snr_db) = (self.channel.t_mag, self.pilots.length, self.pilots.snr_db);
        let Some(sweep) = &self.sweep else {
            return Ok(vec![expand(t_mag, length, snr_db)?]);
        };
        if sweep.values.is_empty() {
            return Err(CliError::config("sweep.values", "list at least one value"));
        }
        sweep
            .values
            .iter()
            .map(|&v| match sweep.param {
                SweepParam::L => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return Err(CliError::config(
                            "sweep.values",
                            format!("pilot length {v} is not a positive integer"),
                        ));
                    }
                    expand(t_mag, v as usize, snr_db)
                }
                SweepParam::PilotSnrDb => expand(t_mag, length, v),
                SweepParam::TMag => expand(v, length, snr_db),
            })
            .collect()
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let t = &self.train;
        let optimizer = match t.optimizer.as_str() {
            "adam" => Optimizer::adam(),
            "sgd" => Optimizer::Sgd,
            other => {
                return Err(CliError::config(
                    "train.optimizer",
                    format!("unknown optimizer `{other}`"),
                ))
            }
        };
        Ok(TrainConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            iterations: t.iterations,
            optimizer,
            seed: t.seed.unwrap_or(self.seed),
            probe_every: t.probe_every,
            probe_size: t.probe_size,
            patience: (t.patience > 0).then_some(t.patience),
        })
    }

    pub fn architecture(&self) -> CliResult<Architecture> {
        let mut arch = Architecture::default_for(self.channel.n_tx);
        if let Some(e) = &self.train.encoder_hidden {
            arch.encoder_hidden = e.clone();
        }
        if let Some(d) = &self.train.decoder_hidden {
            arch.decoder_hidden = d.clone();
        }
        if arch.encoder_hidden.contains(&0) || arch.decoder_hidden.contains(&0) {
            return Err(CliError::config(
                "train.encoder_hidden",
                "layer widths must be positive",
            ));
        }
        Ok(arch)
    }

    pub fn lloyd_config(&self) -> LloydConfig {
        LloydConfig {
            bits: self.bits,
            max_iters: self.codebook.max_iters,
            rel_tol: self.codebook.rel_tol,
        }
    }

    pub fn data_links(&self) -> Vec<DataLinkSpec> {
        self.link
            .snr_db
            .iter()
            .map(|&s| DataLinkSpec::from_snr_db(s))
            .collect()
    }

    /// Substitutes `{L}`, `{B}`, `{seed}` and `{psi}` in an artifact path template.
    pub fn artifact_path(&self, template: &str, point: &Point) -> PathBuf {
        PathBuf::from(
            template
                .replace("{L}", &point.pilots.length.to_string())
                .replace("{B}", &self.bits.to_string())
                .replace("{seed}", &self.seed.to_string())
                .replace("{psi}", &point.phase_index.to_string()),
        )
    }
}

fn core_config(section: &str, e: mimofb::Error) -> CliError {
    match e {
        mimofb::Error::InvalidParameter { field, reason } => {
            CliError::config(format!("{section}.{field}"), reason)
        }
        other => CliError::config(section, other.to_string()),
    }
}

fn field_of(e: &toml::de::Error) -> String {
    // serde messages name unknown or mistyped keys in backticks
    let msg = e.message();
    msg.split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "config".into())
}

fn merge(dst: &mut Table, src: Table) {
    for (k, v) in src {
        match (dst.get_mut(&k), v) {
            (Some(Value::Table(d)), Value::Table(s)) => merge(d, s),
            (_, v) => {
                dst.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| CliError::config(key, "empty key"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(key, format!("`{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
