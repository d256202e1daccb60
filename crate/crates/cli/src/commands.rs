use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use semsim::corpus::{
    load_corpus, load_embeddings, load_orderings, load_pairs, load_synset_map, SynsetMap,
};
use semsim::metrics::{
    self, curve_deviations, default_thresholds, evaluate, human_agreement, proxy_correlation,
    proxy_ordering, relevance_curve, AgreementCounts, EvalOptions, Evaluation, RetrievalRun,
};
use semsim::proxy::{
    Direction, EmbedSource, PosWeights, ProcessedCorpus, ProxyConfig, ProxyKind, SimilarityBuilder,
    SimilarityMatrix,
};
use semsim::textproc::{load_processed, write_processed, Lexicon, Pipeline, Pos, StopList};
use semsim::training::{self, EmbeddingModel, Features, TrainConfig, TripletSampler};
use serde::Serialize;

use crate::{
    AgreementArgs, CorrelateArgs, CurveArgs, DirectionArg, EmbedSourceArg, EvalArgs, ProcessArgs,
    ProxyArg, SimmatArgs, TrainArgs, TripletArgs,
};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn load_sims(named: &[(String, PathBuf)]) -> Result<Vec<(String, SimilarityMatrix)>> {
    named
        .iter()
        .map(|(name, path)| {
            let m = SimilarityMatrix::load(path)
                .with_context(|| format!("--sim {name}={}", path.display()))?;
            Ok((name.clone(), m))
        })
        .collect()
}

fn synsets_or_empty(path: &Option<PathBuf>) -> Result<SynsetMap> {
    match path {
        Some(p) => load_synset_map(p).with_context(|| format!("--synsets {}", p.display())),
        None => Ok(SynsetMap::new()),
    }
}

pub fn process(args: &ProcessArgs) -> Result<()> {
    let corpus = load_corpus(&args.captions)
        .with_context(|| format!("--captions {}", args.captions.display()))?;
    let stoplist = match &args.stoplist {
        Some(p) => StopList::load(p).with_context(|| format!("--stoplist {}", p.display()))?,
        None => StopList::builtin(),
    };
    let lexicon = match &args.lexicon {
        Some(p) => Lexicon::load(p).with_context(|| format!("--lexicon {}", p.display()))?,
        None => Lexicon::builtin(),
    };
    let pipeline = Pipeline::new(stoplist, lexicon, synsets_or_empty(&args.synsets)?);
    let processed = pipeline.process_corpus(&corpus);
    let mut out = create(&args.out)?;
    write_processed(&processed, &mut out)?;
    out.flush()?;
    Ok(())
}

fn parse_pos_weights(text: &str) -> Result<PosWeights> {
    let weights = text
        .split(',')
        .map(|part| {
            let (pos, w) = part
                .split_once('=')
                .with_context(|| format!("--pos-weights: expected POS=weight, got {part:?}"))?;
            let pos = Pos::parse(pos.trim()).context("--pos-weights")?;
            let w: f64 = w
                .trim()
                .parse()
                .with_context(|| format!("--pos-weights: bad weight {w:?}"))?;
            Ok((pos, w))
        })
        .collect::<Result<Vec<_>>>()?;
    PosWeights::new(weights).context("--pos-weights")
}

pub fn simmat(args: &SimmatArgs) -> Result<()> {
    let processed = load_processed(&args.processed)
        .with_context(|| format!("--processed {}", args.processed.display()))?;
    let corpus = ProcessedCorpus::from_processed(processed)?;
    let kind = match args.proxy {
        ProxyArg::Bow => ProxyKind::Bow,
        ProxyArg::Pos => ProxyKind::Pos,
        ProxyArg::Syn => ProxyKind::Syn,
        ProxyArg::Met => ProxyKind::Meteor,
        ProxyArg::Embed => ProxyKind::Embed,
    };
    let mut config = ProxyConfig::new(kind);
    config.consensus_fraction = args.consensus;
    config.symmetrize_meteor = !args.no_symmetrize;
    config.embed_source = match args.embed_source {
        EmbedSourceArg::Captions => EmbedSource::Captions,
        EmbedSourceArg::Videos => EmbedSource::Videos,
    };
    if let Some(text) = &args.pos_weights {
        config.pos_weights = parse_pos_weights(text)?;
    }
    let synsets = synsets_or_empty(&args.synsets)?;
    let embeddings = match &args.embeddings {
        Some(p) => {
            Some(load_embeddings(p).with_context(|| format!("--embeddings {}", p.display()))?)
        }
        None if kind == ProxyKind::Embed => bail!("--proxy embed needs --embeddings"),
        None => None,
    };
    let direction = match args.direction {
        DirectionArg::V2t => Direction::VideoToCaption,
        DirectionArg::T2v => Direction::CaptionToVideo,
    };
    let mut builder = SimilarityBuilder::new(&corpus, &config).synsets(&synsets);
    if let Some(table) = &embeddings {
        builder = builder.embeddings(table);
    }
    let matrix = if kind.is_set_proxy() && !args.naive {
        builder.build_accelerated(direction)?.0
    } else {
        builder.build(direction)?
    };
    matrix.save_tsv(&args.out)?;
    if let Some(dense) = &args.dense {
        matrix.write_dense(dense)?;
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    ensure!(
        !args.sims.is_empty() || !args.ndcg,
        "--ndcg needs at least one --sim"
    );
    let v2t =
        RetrievalRun::load(&args.run).with_context(|| format!("--run {}", args.run.display()))?;
    let t2v = match &args.run_t2v {
        Some(p) => {
            Some(RetrievalRun::load(p).with_context(|| format!("--run-t2v {}", p.display()))?)
        }
        None => v2t.scores().map(|_| v2t.transpose()).transpose()?,
    };
    let pairs = load_pairs(&args.captions)
        .with_context(|| format!("--captions {}", args.captions.display()))?;
    let sims = load_sims(&args.sims)?;
    let any = args.ndcg || args.recall || args.gmr;
    let options = EvalOptions {
        ndcg: !any || args.ndcg,
        recall: !any || args.recall,
        gmr: !any || args.gmr,
        map_threshold: args.map,
        bounds_threshold: args.bounds,
        relevance_floor: args.floor,
        ..EvalOptions::default()
    };
    let report = evaluate(
        &Evaluation {
            video_to_text: Some(&v2t),
            text_to_video: t2v.as_ref(),
            pairs: &pairs,
            sims: &sims,
        },
        &options,
    )?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(p) => write_text(p, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn curve(args: &CurveArgs) -> Result<()> {
    let sims = load_sims(&args.sims)?;
    let thresholds = args.thresholds.clone().unwrap_or_else(default_thresholds);
    ensure!(!thresholds.is_empty(), "--thresholds is empty");
    let curves: Vec<Vec<(f64, f64)>> = sims
        .iter()
        .map(|(_, m)| relevance_curve(m, &thresholds))
        .collect();
    let mut csv = String::from("threshold");
    for (name, _) in &sims {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for (row, t) in thresholds.iter().enumerate() {
        csv.push_str(&format!("{t}"));
        for c in &curves {
            csv.push(',');
            csv.push_str(&fmt6(c[row].1));
        }
        csv.push('\n');
    }
    write_text(&args.out, &csv)?;

    let find = |n: &str| sims.iter().position(|(name, _)| name == n);
    if let (Some(syn), Some(pos)) = (find("syn"), find("pos")) {
        for d in curve_deviations(&curves[syn], &curves[pos]) {
            eprintln!(
                "note: syn curve below pos at T={}: {:.6} < {:.6}",
                d.threshold, d.expected_higher, d.expected_lower
            );
        }
    }
    Ok(())
}

pub fn correlate(args: &CorrelateArgs) -> Result<()> {
    ensure!(args.sims.len() >= 2, "--sim must be given at least twice");
    let sims = load_sims(&args.sims)?;
    let mut csv = String::from("proxy_a,proxy_b,mean_r,videos,skipped\n");
    for i in 0..sims.len() {
        for j in i + 1..sims.len() {
            let (a_name, a) = &sims[i];
            let (b_name, b) = &sims[j];
            let b = b.reindexed(a.query_ids(), a.item_ids())?;
            let r = proxy_correlation(a, &b).with_context(|| format!("{a_name} vs {b_name}"))?;
            if r.skipped > 0 {
                eprintln!(
                    "note: {a_name} vs {b_name}: skipped {} constant rows",
                    r.skipped
                );
            }
            csv.push_str(&format!(
                "{a_name},{b_name},{},{},{}\n",
                fmt6(r.mean_r),
                r.used,
                r.skipped
            ));
        }
    }
    write_text(&args.out, &csv)
}

pub fn agreement(args: &AgreementArgs) -> Result<()> {
    let orderings = load_orderings(&args.orderings)
        .with_context(|| format!("--orderings {}", args.orderings.display()))?;
    ensure!(!orderings.is_empty(), "--orderings holds no videos");
    let sims = load_sims(&args.sims)?;
    let mut csv = String::from("proxy,videos,consistent_pct,agreement_pct\n");
    for (name, sim) in &sims {
        let mut total = AgreementCounts::default();
        for o in &orderings {
            let order = proxy_ordering(o, sim)
                .with_context(|| format!("proxy {name}, video {}", o.video_id))?;
            total = total.merge(human_agreement(o, &order)?);
        }
        let agreement = total
            .agreement_pct()
            .map(fmt6)
            .unwrap_or_else(|| "NA".into());
        csv.push_str(&format!(
            "{name},{},{},{agreement}\n",
            orderings.len(),
            fmt6(total.consistent_pct())
        ));
    }
    write_text(&args.out, &csv)
}

pub fn triplets(args: &TripletArgs) -> Result<()> {
    let sim = SimilarityMatrix::load(&args.sim)
        .with_context(|| format!("--sim {}", args.sim.display()))?;
    let triplets = training::sample_triplets(&sim, args.threshold, args.count, args.seed)?;
    let mut out = create(&args.out)?;
    writeln!(out, "video_id\tpositive_id\tnegative_id")?;
    for t in &triplets {
        let (a, p, n) = t.ids(&sim);
        writeln!(out, "{a}\t{p}\t{n}")?;
    }
    out.flush()?;
    Ok(())
}

/// A matrix with 1 for every corresponding pair, in `like`'s id order.
fn instance_matrix(
    like: &SimilarityMatrix,
    pairs: &[(String, String)],
) -> Result<SimilarityMatrix> {
    let corr = metrics::Correspondence::from_pairs(pairs, like.query_ids(), like.item_ids())?;
    let rows = (0..like.num_queries())
        .map(|q| corr.items(q).iter().map(|&i| (i, 1.0)).collect())
        .collect();
    Ok(SimilarityMatrix::new(
        like.query_ids().to_vec(),
        like.item_ids().to_vec(),
        rows,
    )?)
}

#[derive(Serialize)]
struct RunSummary {
    threshold: Option<f64>,
    final_loss: f64,
    metrics: BTreeMap<String, f64>,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let sim = SimilarityMatrix::load(&args.sim)
        .with_context(|| format!("--sim {}", args.sim.display()))?;
    let videos = load_embeddings(&args.video_features)
        .with_context(|| format!("--video-features {}", args.video_features.display()))?;
    let captions = load_embeddings(&args.caption_features)
        .with_context(|| format!("--caption-features {}", args.caption_features.display()))?;
    let features = Features::from_tables(&videos, &captions, &sim)?;
    let pairs = match &args.captions {
        Some(p) => Some(load_pairs(p).with_context(|| format!("--captions {}", p.display()))?),
        None => None,
    };
    let eval_sims = load_sims(&args.eval_sims)?;
    let initial = EmbeddingModel::random(
        videos.dim(),
        captions.dim(),
        args.dim,
        args.margin,
        args.seed,
    )?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let run_one = |sampling: &SimilarityMatrix,
                   threshold: f64|
     -> Result<(training::TrainOutcome, BTreeMap<String, f64>)> {
        let config = TrainConfig {
            threshold,
            epochs: args.epochs,
            lr: args.lr,
            batch_size: args.batch,
            triplets_per_epoch: args.triplets,
            seed: args.seed,
            ..TrainConfig::default()
        };
        let outcome = training::train(initial.clone(), &features, sampling, &config)?;
        let metrics = match &pairs {
            Some(pairs) if !eval_sims.is_empty() => {
                training::evaluate_trained(
                    &outcome.model,
                    &features,
                    pairs,
                    &eval_sims,
                    &EvalOptions::default(),
                )?
                .metrics
            }
            _ => BTreeMap::new(),
        };
        Ok((outcome, metrics))
    };

    if args.sweep {
        let mut header = String::from("threshold,final_loss");
        for (name, _) in &eval_sims {
            header.push_str(&format!(",ndcg/{name}"));
        }
        if !eval_sims.is_empty() {
            header.push_str(",v2t/GMR,t2v/GMR");
        }
        let mut csv = header + "\n";
        for step in 1..=10 {
            let t = step as f64 / 10.0;
            // Feasibility is checked up front so a bad grid point names its threshold.
            TripletSampler::new(&sim, t).with_context(|| format!("threshold {t:.1}"))?;
            let (outcome, metrics) = run_one(&sim, t)?;
            outcome
                .model
                .save(&args.out_dir.join(format!("model_T{t:.1}.bin")))?;
            let final_loss = outcome.loss_trace.last().copied().unwrap_or(f64::NAN);
            csv.push_str(&format!("{t:.1},{}", fmt6(final_loss)));
            for (name, _) in &eval_sims {
                csv.push_str(&format!(",{}", fmt6(metrics[&format!("ndcg/{name}")])));
            }
            if !eval_sims.is_empty() {
                csv.push_str(&format!(
                    ",{},{}",
                    fmt6(metrics["v2t/GMR"]),
                    fmt6(metrics["t2v/GMR"])
                ));
            }
            csv.push('\n');
        }
        return write_text(&args.out_dir.join("sweep.csv"), &csv);
    }

    let (sampling, threshold) = if args.ivr {
        let pairs = pairs.as_deref().context("--ivr needs --captions")?;
        (instance_matrix(&sim, pairs)?, 1.0)
    } else {
        let t = args
            .threshold
            .context("one of --threshold, --ivr or --sweep is required")?;
        (sim.clone(), t)
    };
    let (outcome, metrics) = run_one(&sampling, threshold)?;
    outcome.model.save(&args.out_dir.join("model.bin"))?;
    let mut trace = String::from("epoch,loss\n");
    for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
        trace.push_str(&format!("{},{}\n", epoch + 1, fmt6(*loss)));
    }
    write_text(&args.out_dir.join("loss.csv"), &trace)?;
    let summary = RunSummary {
        threshold: (!args.ivr).then_some(threshold),
        final_loss: outcome.loss_trace.last().copied().unwrap_or(f64::NAN),
        metrics,
    };
    write_text(
        &args.out_dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )
}
