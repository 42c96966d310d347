//! Scenario execution.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mimofb::channel::ChannelModel;
use mimofb::codebook::{dft_codebook, lloyd_design, Codebook};
use mimofb::evaluation::{
    normalized_gain, qpsk_ser_blocked, time_online, BaselinePipeline, DlPipeline, GainRun, Link,
    MetricRecord, Pipeline, Scheme, SerRun, CSV_HEADER,
};
use mimofb::neural::{trace_csv, train, FeedbackModel};
use mimofb::numerics::RngStream;

use crate::config::{ExperimentConfig, Point, Scenario};
use crate::error::{CliError, CliResult};

// Stream ids under the experiment seed for offline codebook design.
const STREAM_LLOYD_DATA: u64 = 10;
const STREAM_LLOYD_INIT: u64 = 11;

#[derive(Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<MetricRecord>,
    /// Files written besides the CSV.
    pub artifacts: Vec<PathBuf>,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.csv_row());
        }
        s
    }
}

/// Progress messages go to stderr unless silenced.
#[derive(Debug, Clone, Copy)]
pub struct Runner {
    pub verbose: bool,
}

impl Runner {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn run(&self, cfg: &ExperimentConfig, scenario: Scenario) -> CliResult<RunOutput> {
        let mut out = RunOutput::default();
        for group in cfg.points()? {
            match scenario {
                Scenario::Train => {
                    for point in &group {
                        self.train_point(cfg, point, &mut out)?;
                    }
                }
                Scenario::DesignCodebook => {
                    for point in &group {
                        self.design_point(cfg, point, &mut out)?;
                    }
                }
                Scenario::Fig2Gain | Scenario::Smoke => self.gain_point(cfg, &group, &mut out)?,
                Scenario::Fig3Ser => self.ser_point(cfg, &group, &mut out)?,
                // latency does not depend on the phase
                Scenario::Table1Timing => self.timing_point(cfg, &group[0], &mut out)?,
            }
        }
        Ok(out)
    }

    fn train_point(
        &self,
        cfg: &ExperimentConfig,
        point: &Point,
        out: &mut RunOutput,
    ) -> CliResult<()> {
        let template = cfg.artifacts.model.as_deref().ok_or_else(|| {
            CliError::config("artifacts.model", "train needs an output model path")
        })?;
        let path = cfg.artifact_path(template, point);
        let (model, trace) = self.train_model(cfg, point)?;
        ensure_parent(&path)?;
        model.save(&path)?;
        self.note(format!("saved model to {}", path.display()));
        out.artifacts.push(path);
        if let Some(t) = &cfg.artifacts.trace {
            let tp = cfg.artifact_path(t, point);
            write_file(&tp, &trace)?;
            out.artifacts.push(tp);
        }
        Ok(())
    }

    fn design_point(
        &self,
        cfg: &ExperimentConfig,
        point: &Point,
        out: &mut RunOutput,
    ) -> CliResult<()> {
        let template = cfg.artifacts.codebook.as_deref().ok_or_else(|| {
            CliError::config("artifacts.codebook", "design-codebook needs an output path")
        })?;
        let path = cfg.artifact_path(template, point);
        let cb = if cfg.codebook.kind == "dft" {
            dft_codebook(point.channel.n_tx, cfg.bits)?
        } else {
            self.design_lloyd(cfg, point)?
        };
        ensure_parent(&path)?;
        cb.save(&path)?;
        self.note(format!("saved codebook to {}", path.display()));
        out.artifacts.push(path);
        Ok(())
    }

    fn gain_point(
        &self,
        cfg: &ExperimentConfig,
        group: &[Point],
        out: &mut RunOutput,
    ) -> CliResult<()> {
        for scheme in cfg.schemes()? {
            let mut runs = Vec::with_capacity(group.len());
            for point in group {
                let link = link(point)?;
                let pipeline = self.pipeline(cfg, point, &link, scheme)?;
                runs.push(normalized_gain(
                    pipeline.as_ref(),
                    &link,
                    cfg.eval.trials,
                    eval_seed(cfg, point),
                    cfg.bits,
                )?);
            }
            let mut run = GainRun::pool(runs).expect("at least one phase");
            run.record.seed = cfg.seed;
            self.note(format!(
                "{} L={}: gain {:.4} ± {:.4}",
                scheme, group[0].pilots.length, run.record.value, run.record.stderr
            ));
            out.rows.push(run.record);
        }
        Ok(())
    }

    fn ser_point(
        &self,
        cfg: &ExperimentConfig,
        group: &[Point],
        out: &mut RunOutput,
    ) -> CliResult<()> {
        for scheme in cfg.schemes()? {
            // the receiver network sees only pilots, so one model serves every data SNR
            let mut pipelines = Vec::with_capacity(group.len());
            for point in group {
                let link = link(point)?;
                pipelines.push((
                    self.pipeline(cfg, point, &link, scheme)?,
                    link,
                    eval_seed(cfg, point),
                ));
            }
            for data in cfg.data_links() {
                let runs = pipelines
                    .iter()
                    .map(|(pipeline, link, seed)| {
                        qpsk_ser_blocked(
                            pipeline.as_ref(),
                            link,
                            &data,
                            cfg.link.symbols,
                            cfg.link.block_len,
                            *seed,
                            cfg.bits,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let mut run = SerRun::pool(runs).expect("at least one phase");
                run.record.seed = cfg.seed;
                self.note(format!(
                    "{} {:.1} dB: SER {:.3e}",
                    scheme,
                    data.snr_db(),
                    run.record.value
                ));
                out.rows.push(run.record);
            }
        }
        Ok(())
    }

    fn timing_point(
        &self,
        cfg: &ExperimentConfig,
        point: &Point,
        out: &mut RunOutput,
    ) -> CliResult<()> {
        let link = link(point)?;
        for scheme in cfg.schemes()? {
            let pipeline = self.pipeline(cfg, point, &link, scheme)?;
            let rec = time_online(
                pipeline.as_ref(),
                &link,
                cfg.eval.timing_trials,
                cfg.seed,
                cfg.bits,
            )?;
            self.note(format!(
                "{} L={}: {:.5} ms",
                scheme, point.pilots.length, rec.value
            ));
            out.rows.push(rec);
        }
        Ok(())
    }

    pub fn pipeline(
        &self,
        cfg: &ExperimentConfig,
        point: &Point,
        link: &Link,
        scheme: Scheme,
    ) -> CliResult<Box<dyn Pipeline>> {
        Ok(match scheme {
            Scheme::Dl => Box::new(DlPipeline::new(self.model(cfg, point)?)?),
            Scheme::LmmseDft => Box::new(BaselinePipeline::new(
                link.clone(),
                dft_codebook(point.channel.n_tx, cfg.bits)?,
            )?),
            Scheme::LmmseLloyd => Box::new(BaselinePipeline::new(
                link.clone(),
                self.lloyd_codebook(cfg, point)?,
            )?),
        })
    }

    /// The configured model file, or a model trained in-process when none is configured.
    pub fn model(&self, cfg: &ExperimentConfig, point: &Point) -> CliResult<FeedbackModel> {
        match &cfg.artifacts.model {
            Some(t) => {
                let path = existing(cfg.artifact_path(t, point))?;
                let model = FeedbackModel::load(&path)?;
                let meta = model.meta();
                if (meta.n_tx, meta.n_rx, meta.pilot_len, model.bits())
                    != (
                        point.channel.n_tx,
                        point.channel.n_rx,
                        point.pilots.length,
                        cfg.bits,
                    )
                {
                    return Err(CliError::config(
                        "artifacts.model",
                        format!(
                            "{} does not match N_t, N_r, L, B of this run",
                            path.display()
                        ),
                    ));
                }
                Ok(model)
            }
            None => Ok(self.train_model(cfg, point)?.0),
        }
    }

    fn train_model(
        &self,
        cfg: &ExperimentConfig,
        point: &Point,
    ) -> CliResult<(FeedbackModel, String)> {
        let tc = cfg.train_config()?;
        self.note(format!(
            "training L={} for up to {} iterations (batch {})",
            point.pilots.length, tc.iterations, tc.batch_size
        ));
        let outcome = train(
            &point.channel,
            &point.pilots,
            &cfg.architecture()?,
            cfg.bits,
            &tc,
        )?;
        self.note(format!(
            "best probe at iteration {} of {}",
            outcome.best_iteration, outcome.iterations_run
        ));
        Ok((outcome.model, trace_csv(&outcome.trace)))
    }

    /// The configured codebook file, or a Lloyd design in-process when none is configured.
    pub fn lloyd_codebook(&self, cfg: &ExperimentConfig, point: &Point) -> CliResult<Codebook> {
        match &cfg.artifacts.codebook {
            Some(t) => {
                let path = existing(cfg.artifact_path(t, point))?;
                let cb = Codebook::load(&path)?;
                if cb.n_tx() != point.channel.n_tx || cb.bits() != cfg.bits {
                    return Err(CliError::config(
                        "artifacts.codebook",
                        format!("{} does not match N_t, B of this run", path.display()),
                    ));
                }
                Ok(cb)
            }
            None => self.design_lloyd(cfg, point),
        }
    }

    fn design_lloyd(&self, cfg: &ExperimentConfig, point: &Point) -> CliResult<Codebook> {
        let link = link(point)?;
        let data = RngStream::new(cfg.seed, STREAM_LLOYD_DATA).derive(point.phase_index as u64);
        let training =
            link.lloyd_training_set(cfg.codebook.training_samples, cfg.codebook.true_csi, &data)?;
        let outcome = lloyd_design(
            &training,
            &cfg.lloyd_config(),
            &mut RngStream::new(cfg.seed, STREAM_LLOYD_INIT).derive(point.phase_index as u64),
        )?;
        self.note(format!(
            "Lloyd design L={}: {} iterations, distortion {:.4}",
            point.pilots.length,
            outcome.distortion.len(),
            outcome.distortion.last().copied().unwrap_or(f64::NAN)
        ));
        Ok(outcome.codebook)
    }
}

/// Evaluation seed of one phase draw; draws must not share channel realizations.
/// The first draw evaluates under the experiment seed itself.
pub fn eval_seed(cfg: &ExperimentConfig, point: &Point) -> u64 {
    cfg.seed
        .wrapping_add((point.phase_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn link(point: &Point) -> CliResult<Link> {
    Ok(Link::new(
        ChannelModel::new(point.channel.clone())?,
        point.pilots,
    ))
}

fn existing(path: PathBuf) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact(path))
    }
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
        _ => Ok(()),
    }
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    ensure_parent(path)?;
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
