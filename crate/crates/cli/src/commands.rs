use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};

use liveness_core::data::synth::{write_corpus, SynthConfig};
use liveness_core::metrics::compute_report;
use liveness_core::train::{dataset_loss, score_dataset};
use liveness_core::weights::{load_from_path, save_to_path};
use liveness_core::{analyze, decode_image, BBox, CorpusManifest, Dataset, Label, LivenessNet, Split};
use liveness_service::{bind, serve as run_service, shutdown_signal, ServiceConfig};

use crate::config::RunConfig;
use crate::{EvalArgs, PredictArgs, ServeArgs, SynthArgs, TrainArgs};

pub fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        seed: args.seed,
        n_subjects: args.subjects as usize,
        per_class: args.per_class as usize,
        padding_fraction: args.padding,
        ..SynthConfig::default()
    };
    let manifest =
        write_corpus(&args.out, &cfg).with_context(|| format!("writing corpus to {}", args.out.display()))?;
    println!("manifest {}", manifest.manifest_path().display());
    for split in Split::ALL {
        let (mut bona, mut attack) = (0, 0);
        for r in manifest.records_for(split) {
            match r.label {
                Label::BonaFide => bona += 1,
                Label::Attack => attack += 1,
            }
        }
        println!(
            "{split}: {} images ({bona} bona fide, {attack} attack) from {} subjects",
            bona + attack,
            manifest.subjects(split).len()
        );
    }
    println!("checksum {}", manifest.checksum_hex());
    Ok(())
}

fn run_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    if let Some(v) = args.overfit {
        cfg.overfit = Some(v);
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v as usize;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v as usize;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if let Some(v) = args.optimizer {
        cfg.optimizer = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_manifest(root: &Path) -> Result<CorpusManifest> {
    let manifest = CorpusManifest::load(root).with_context(|| format!("loading corpus {}", root.display()))?;
    manifest.check_disjoint()?;
    Ok(manifest)
}

fn load_split(manifest: &CorpusManifest, split: Split, net: &LivenessNet) -> Result<Dataset> {
    Dataset::from_manifest(manifest, split, net.arch().input_scaling).with_context(|| format!("loading {split} split"))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let cfg = run_config(args)?;
    let manifest = load_manifest(cfg.data.as_deref().expect("validated"))?;
    let mut net = LivenessNet::build(cfg.arch(), cfg.seed)?;

    let mut train_set = load_split(&manifest, Split::Train, &net)?;
    let dev_set = match cfg.overfit {
        Some(n) => {
            train_set = train_set.balanced_prefix(n)?;
            None
        }
        None => {
            let dev = load_split(&manifest, Split::Dev, &net)?;
            if dev.is_empty() {
                warn!(
                    "corpus has no dev split; keeping the final epoch with threshold {}",
                    net.threshold
                );
                None
            } else {
                Some(dev)
            }
        }
    };
    info!(
        "training on {} samples{} for {} epochs, {} parameters",
        train_set.len(),
        dev_set.as_ref().map_or(String::new(), |d| format!(", {} dev", d.len())),
        cfg.epochs,
        net.param_count()
    );

    let log_path = cfg.log_path();
    let mut log = BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);
    let mut log_error = None;
    let outcome = liveness_core::train(&mut net, &train_set, dev_set.as_ref(), &cfg.train_config(), |epoch| {
        println!("{epoch}");
        if log_error.is_none() {
            log_error = writeln!(log, "{epoch}").and_then(|()| log.flush()).err();
        }
    })?;
    if let Some(e) = log_error {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }

    let checksum = save_to_path(&outcome.best, &cfg.out)?;
    if cfg.overfit.is_some() {
        let last = outcome.logs.last().expect("at least one epoch");
        println!(
            "final train_loss={:.6} eval_loss={:.6}",
            last.train_loss,
            dataset_loss(&outcome.best, &train_set)?
        );
    } else if let Some(best) = outcome.logs.iter().rfind(|l| l.best) {
        println!(
            "best epoch={} dev_acer={:.6} threshold={}",
            best.epoch,
            best.dev_acer.unwrap_or(f64::NAN),
            outcome.best.threshold
        );
    }
    println!("saved {} checksum={checksum}", cfg.out.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let manifest = load_manifest(&args.data)?;
    let (net, checksum) = load_from_path(&args.model)?;
    let data = load_split(&manifest, args.split, &net)?;
    if data.is_empty() {
        bail!("corpus has no {} images", args.split);
    }
    let dev = if args.split == Split::Dev {
        data.clone()
    } else {
        load_split(&manifest, Split::Dev, &net)?
    };
    let threshold = if dev.is_empty() {
        warn!("corpus has no dev split; using the model threshold {}", net.threshold);
        net.threshold
    } else {
        liveness_core::select_threshold(&score_dataset(&net, &dev)?)?
    };
    let report = compute_report(&score_dataset(&net, &data)?, threshold)?;
    println!("model={checksum} split={}", args.split);
    print!("{}", report.to_kv());
    if let Some(prefix) = &args.report {
        for (ext, body) in [("txt", report.to_kv()), ("json", report.to_json())] {
            let path = prefix.with_extension(ext);
            std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
    }
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<ExitCode> {
    let (net, _) = load_from_path(&args.model)?;
    let bytes = std::fs::read(&args.image).with_context(|| format!("reading {}", args.image.display()))?;
    let started = Instant::now();
    let frame = decode_image(&bytes)?;
    let bbox = args
        .bbox
        .unwrap_or_else(|| BBox::center_square(frame.width(), frame.height()));
    let verdict = analyze(&net, &frame, bbox, args.padding, None)?;
    let ms = started.elapsed().as_secs_f64() * 1e3;
    println!(
        "label={} score={} ms={ms:.3} bbox={}",
        verdict.label, verdict.score, verdict.bbox
    );
    Ok(match verdict.label {
        Label::BonaFide => ExitCode::SUCCESS,
        Label::Attack => ExitCode::from(2),
    })
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let config = ServiceConfig {
        addr: SocketAddr::new(args.host, args.port),
        model_path: args.model.clone(),
        detector: args.detector.clone(),
        padding_fraction: args.padding,
        static_dir: args.static_dir.clone(),
    };
    if let Some(dir) = &config.static_dir {
        if !dir.is_dir() {
            bail!("static directory {} does not exist", dir.display());
        }
    }
    let state = config.state()?;
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async {
        let listener = bind(config.addr).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr} detector={}", config.detector);
        std::io::stdout().flush()?;
        run_service(listener, state, shutdown_signal()).await?;
        info!("shut down");
        Ok(())
    })
}
