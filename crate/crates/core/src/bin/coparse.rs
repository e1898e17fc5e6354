use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use coparse::corpus::Corpus;
use coparse::error::{ErrorKind, Result};
use coparse::grouping::group_image;
use coparse::io::{self, manifest, pnm, records};
use coparse::pipeline::{self, cosegment, Config};
use coparse::synthgen::{self, SceneSpec};
use coparse::Error;

#[derive(Parser)]
#[command(
    name = "coparse",
    version,
    about = "Joint segmentation and labeling of tagged image collections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated run: label maps for every image, metrics and run metadata.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Multicut grouping of every image, optionally guided by propagations.
    Group {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Propagations JSON written by `esvm`.
        #[arg(long)]
        propagations: Option<PathBuf>,
    },
    /// One grouping pass, then exemplar training and propagation.
    Esvm {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Phase I on a batch, then joint labeling with a model fitted on annotated images.
    Colabel {
        #[arg(long)]
        manifest: PathBuf,
        /// Annotated images used to fit the label model.
        #[arg(long)]
        train_manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scores `<id>.labels.pgm` predictions against the manifest's ground truth.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Metrics file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross validation metrics only.
    Cv {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Writes a synthetic corpus and its manifest.
    Gen {
        /// Scene description JSON; defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<Config> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            Config::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => Config::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_label_maps(
    corpus: &Corpus,
    maps: &[coparse::raster::Grid<u16>],
    out: &Path,
) -> Result<()> {
    for (img, map) in corpus.images.iter().zip(maps) {
        io::write_pgm16(&out.join(format!("{}.labels.pgm", img.id)), map)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GroupRecord {
    objective: f64,
    #[serde(rename = "K")]
    k: usize,
    mask_active: Vec<bool>,
    proven_optimal: bool,
}

#[derive(Serialize)]
struct EnergyRecord {
    total_energy: f64,
    per_image_energy: BTreeMap<String, f64>,
    sweeps: usize,
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            manifest,
            config,
            out,
            seed,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let corpus = manifest::load_corpus(&manifest)?;
            let result = pipeline::run(&corpus, &config)?;
            create_dir(&out)?;
            write_label_maps(&corpus, &result.label_maps, &out)?;
            io::write_json(&out.join("metrics.json"), &result.report)?;
            io::write_json(&out.join("run-meta.json"), &result.meta(&config))?;
            println!(
                "aPA {:.4} ± {:.4}  mAGR {:.4} ± {:.4}",
                result.report.apa.mean,
                result.report.apa.std,
                result.report.magr.mean,
                result.report.magr.std
            );
        }
        Command::Cv {
            manifest,
            config,
            out,
            seed,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let corpus = manifest::load_corpus(&manifest)?;
            let report = pipeline::cross_validate(&corpus, &config)?;
            create_dir(&out)?;
            io::write_json(&out.join("cv.json"), &report)?;
            println!(
                "aPA {:.4} ± {:.4}  mAGR {:.4} ± {:.4}",
                report.apa.mean, report.apa.std, report.magr.mean, report.magr.std
            );
        }
        Command::Group {
            manifest,
            config,
            out,
            propagations,
        } => {
            let config = load_config(config.as_deref(), None)?;
            let corpus = manifest::load_corpus(&manifest)?;
            let props = match &propagations {
                Some(p) => records::read_propagations(p, &corpus)?,
                None => Vec::new(),
            };
            let prepared = cosegment::Prepared::new(&corpus)?;
            create_dir(&out)?;
            for (i, (img, graph)) in corpus.images.iter().zip(&prepared.graphs).enumerate() {
                let mine: Vec<_> = props.iter().filter(|p| p.target_image == i).collect();
                let sol = group_image(img, graph, &mine, config.theta)?;
                io::write_pgm16(
                    &out.join(format!("{}.regions.pgm", img.id)),
                    &io::region_map(graph, &sol.partition)?,
                )?;
                io::write_json(
                    &out.join(format!("{}.group.json", img.id)),
                    &GroupRecord {
                        objective: sol.objective,
                        k: sol.partition.region_count,
                        mask_active: sol.mask_active,
                        proven_optimal: sol.proven_optimal,
                    },
                )?;
            }
        }
        Command::Esvm {
            manifest,
            config,
            out,
            seed,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let corpus = manifest::load_corpus(&manifest)?;
            let prepared = cosegment::Prepared::new(&corpus)?;
            let partitions: Vec<_> = cosegment::group_all(&corpus, &prepared, &[], &config)?
                .into_iter()
                .map(|(p, _)| p)
                .collect();
            let regions = prepared.regions(&partitions)?;
            let (exemplars, props, skipped) =
                cosegment::esvm_round(&corpus, &prepared, &regions, &config)?;
            create_dir(&out)?;
            records::write_exemplars(&out.join("exemplars.jsonl"), &exemplars, &corpus)?;
            records::write_propagations(&out.join("propagations.json"), &props, &corpus)?;
            println!(
                "{} exemplars ({} skipped), {} propagations",
                exemplars.len(),
                skipped,
                props.len()
            );
        }
        Command::Colabel {
            manifest,
            train_manifest,
            config,
            out,
            seed,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let corpus = manifest::load_corpus(&manifest)?;
            let train = manifest::load_corpus(&train_manifest)?;
            if train.vocabulary != corpus.vocabulary {
                return Err(Error::Config(
                    "training and test manifests use different label vocabularies".into(),
                ));
            }
            let all: Vec<usize> = (0..train.images.len()).collect();
            let model = pipeline::train_model(&train, &all, &config)?;
            let phase1 = pipeline::run_cosegmentation(&corpus, &config)?;
            let phase2 = pipeline::run_colabeling(&corpus, &phase1, &model, &config)?;
            create_dir(&out)?;
            write_label_maps(&corpus, &phase2.label_maps, &out)?;
            records::write_exemplars(&out.join("exemplars.jsonl"), &phase1.exemplars, &corpus)?;
            records::write_propagations(
                &out.join("propagations.json"),
                &phase1.propagations,
                &corpus,
            )?;
            io::write_json(
                &out.join("energy.json"),
                &EnergyRecord {
                    total_energy: phase2.total_energy,
                    per_image_energy: corpus
                        .images
                        .iter()
                        .map(|i| i.id.clone())
                        .zip(phase2.per_image_energy.iter().copied())
                        .collect(),
                    sweeps: phase2.sweeps,
                },
            )?;
            println!(
                "phase I: {} iterations; total energy {:.6}",
                phase1.iterations, phase2.total_energy
            );
        }
        Command::Eval {
            manifest,
            predictions,
            out,
        } => {
            let corpus = manifest::load_corpus(&manifest)?;
            let predicted = corpus
                .images
                .iter()
                .map(|img| pnm::read_pgm(&predictions.join(format!("{}.labels.pgm", img.id))))
                .collect::<Result<Vec<_>>>()?;
            let gt = pipeline::eval::ground_truths(&corpus)?;
            let metrics = pipeline::evaluate(&predicted, &gt, &corpus.vocabulary)?;
            match out {
                Some(path) => io::write_json(&path, &metrics)?,
                None => println!("{}", serde_json::to_string_pretty(&metrics)?),
            }
        }
        Command::Gen { spec, n, out, seed } => {
            let mut scene: SceneSpec = match &spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => SceneSpec::default(),
            };
            if let Some(s) = seed {
                scene.seed = s;
            }
            let corpus = synthgen::generate(&scene, n)?;
            let path = manifest::write_corpus(&corpus, &out)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Config => ExitCode::from(2),
                ErrorKind::Data | ErrorKind::Solver => ExitCode::from(3),
            }
        }
    }
}
