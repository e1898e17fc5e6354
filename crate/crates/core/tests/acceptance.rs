//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Every oracle here is written independently of the library.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coparse::corpus::{Corpus, LabelId, BACKGROUND};
use coparse::esvm::calibrate::{calibrate, Calibration};
use coparse::esvm::train::{energy as esvm_energy, subgradient, train_weights};
use coparse::graphcut::{alpha_expansion, max_flow, FlowNetwork, LabelingProblem, PairwiseTerm};
use coparse::grouping::{solve_multicut, MaskConstraint, MulticutInstance, WeightedEdge};
use coparse::pipeline::colabeling::{build_graph, train_model};
use coparse::pipeline::cosegment::{run_cosegmentation, Prepared};
use coparse::pipeline::eval::{all_background, ground_truths};
use coparse::pipeline::{cross_validate, evaluate, Config};
use coparse::synthgen::{generate, SceneSpec};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn background_fraction(corpus: &Corpus) -> f64 {
    let mut sum = 0.0;
    for img in &corpus.images {
        let gt = img.ground_truth.as_ref().unwrap();
        let bg = gt.as_slice().iter().filter(|&&l| l == BACKGROUND).count();
        sum += bg as f64 / gt.len() as f64;
    }
    sum / corpus.images.len() as f64
}

fn baseline_arithmetic() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let spec = SceneSpec {
            seed: rng.random(),
            noise: rng.random_range(0.0..0.1),
            shapes_per_image: [1, 4],
            ..SceneSpec::default()
        };
        let corpus =
            generate(&spec, rng.random_range(1..=4)).map_err(|e| format!("corpus {k}: {e}"))?;
        let gt = ground_truths(&corpus).unwrap();
        let m = evaluate(&all_background(&corpus), &gt, &corpus.vocabulary).unwrap();
        let diff = (m.apa - background_fraction(&corpus)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-12, || {
            format!("corpus {k}: aPA {} vs fraction differs by {diff:e}", m.apa)
        })?;
    }
    Ok(format!(
        "50 corpora, max |aPA - background fraction| = {worst:e}"
    ))
}

// ---------------------------------------------------------------- 2

fn random_multicut(rng: &mut ChaCha8Rng) -> MulticutInstance {
    let n = rng.random_range(1..=10);
    let density = rng.random_range(0.2..0.8);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(density) {
                edges.push(WeightedEdge {
                    u,
                    v,
                    d: rng.random_range(0..=1),
                });
            }
        }
    }
    let mut masks = Vec::new();
    if n >= 2 {
        for _ in 0..rng.random_range(0..=3) {
            let size = rng.random_range(2..=n.min(5));
            let members = rand::seq::index::sample(rng, n, size).into_vec();
            masks.push(MaskConstraint {
                members,
                reward: rng.random_range(0.0..2.0),
            });
        }
    }
    MulticutInstance {
        node_count: n,
        edges,
        masks,
    }
}

/// Components of `labels` restricted to graph edges.
fn components(n: usize, edges: &[WeightedEdge], labels: &[usize]) -> Vec<usize> {
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for e in edges {
                let y = if e.u == x {
                    e.v
                } else if e.v == x {
                    e.u
                } else {
                    continue;
                };
                if comp[y] == usize::MAX && labels[y] == labels[x] {
                    comp[y] = next;
                    stack.push(y);
                }
            }
        }
        next += 1;
    }
    comp
}

fn multicut_score(inst: &MulticutInstance, comp: &[usize], theta: f64) -> f64 {
    let joined: f64 = inst
        .edges
        .iter()
        .filter(|e| comp[e.u] == comp[e.v])
        .map(|e| e.d as f64 - theta)
        .sum();
    let rewards: f64 = inst
        .masks
        .iter()
        .filter(|m| m.members.iter().all(|&s| comp[s] == comp[m.members[0]]))
        .map(|m| m.reward)
        .sum();
    joined - rewards
}

/// Enumerates every set partition of the nodes.
fn multicut_oracle(inst: &MulticutInstance, theta: f64) -> f64 {
    fn rec(
        inst: &MulticutInstance,
        theta: f64,
        labels: &mut Vec<usize>,
        used: usize,
        best: &mut f64,
    ) {
        if labels.len() == inst.node_count {
            let comp = components(inst.node_count, &inst.edges, labels);
            *best = best.min(multicut_score(inst, &comp, theta));
            return;
        }
        for l in 0..=used {
            labels.push(l);
            rec(inst, theta, labels, used.max(l + 1), best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(inst, theta, &mut Vec::new(), 0, &mut best);
    best
}

fn multicut_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let theta = 0.5;
    for k in 0..500 {
        let inst = random_multicut(&mut rng);
        let sol = solve_multicut(&inst, theta).map_err(|e| format!("instance {k}: {e}"))?;
        let oracle = multicut_oracle(&inst, theta);
        ensure((sol.objective - oracle).abs() <= 1e-9, || {
            format!("instance {k}: solver {} vs oracle {oracle}", sol.objective)
        })?;
    }
    Ok("500 instances with up to 10 nodes match exhaustive enumeration".into())
}

// ---------------------------------------------------------------- 3

fn random_metric_problem(rng: &mut ChaCha8Rng) -> LabelingProblem {
    let n = rng.random_range(1..=8);
    let l = rng.random_range(2..=4u16);
    let labels: Vec<LabelId> = (0..l).collect();
    let unary = (0..n)
        .map(|_| (0..l).map(|_| rng.random_range(0.0..4.0)).collect())
        .collect();
    let potts = rng.random_bool(0.5);
    let cap = rng.random_range(1..=3) as f64;
    let mut pairwise = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if !rng.random_bool(0.5) {
                continue;
            }
            let w = rng.random_range(0.0..2.0);
            let mut table = Vec::new();
            for a in 0..l {
                for b in 0..l {
                    let d = if potts {
                        (a != b) as u8 as f64
                    } else {
                        (a.abs_diff(b) as f64).min(cap)
                    };
                    table.push(w * d);
                }
            }
            pairwise.push(PairwiseTerm { u, v, table });
        }
    }
    LabelingProblem {
        candidates: vec![labels; n],
        unary,
        pairwise,
    }
}

fn table_energy(p: &LabelingProblem, x: &[usize]) -> f64 {
    let mut e: f64 = x.iter().enumerate().map(|(v, &i)| p.unary[v][i]).sum();
    for t in &p.pairwise {
        e += t.table[x[t.u] * p.candidates[t.v].len() + x[t.v]];
    }
    e
}

/// Minimum energy over every labeling (candidate indices).
fn map_oracle(p: &LabelingProblem) -> f64 {
    let n = p.candidates.len();
    let mut x = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(table_energy(p, &x));
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            x[i] += 1;
            if x[i] < p.candidates[i].len() {
                break;
            }
            x[i] = 0;
            i += 1;
        }
    }
}

fn map_oracle_agreement() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let total = 500;
    let mut optimal = 0;
    for k in 0..total {
        let p = random_metric_problem(&mut rng);
        let r =
            alpha_expansion(&p, &p.unary_argmin(), 10).map_err(|e| format!("problem {k}: {e}"))?;
        let best = map_oracle(&p);
        ensure(r.energy <= 2.0 * best + 1e-9, || {
            format!("problem {k}: {} > 2 x {best}", r.energy)
        })?;
        ensure(r.accepted_energies.windows(2).all(|w| w[1] < w[0]), || {
            format!(
                "problem {k}: accepted move did not lower energy: {:?}",
                r.accepted_energies
            )
        })?;
        if r.energy <= best + 1e-9 {
            optimal += 1;
        }
    }
    let rate = optimal as f64 / total as f64;
    ensure(rate >= 0.95, || {
        format!("optimal on only {optimal}/{total}")
    })?;
    Ok(format!(
        "optimal on {optimal}/{total}, within 2x on all, every move strictly descends"
    ))
}

// ---------------------------------------------------------------- 4

/// Edmonds-Karp on an adjacency matrix.
fn flow_oracle(n: usize, arcs: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut cap = vec![vec![0.0; n]; n];
    for &(u, v, c) in arcs {
        cap[u][v] += c;
    }
    let mut total = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 0.0 {
                    prev[v] = u;
                    q.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return total;
        }
        let mut push = f64::INFINITY;
        let mut v = t;
        while v != s {
            push = push.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            cap[prev[v]][v] -= push;
            cap[v][prev[v]] += push;
            v = prev[v];
        }
        total += push;
    }
}

fn flow_cut_duality() -> Result<String, String> {
    let mut diamond = FlowNetwork::new(4, 0, 3).unwrap();
    for (u, v, c) in [
        (0, 1, 2.0),
        (0, 2, 2.0),
        (1, 3, 1.0),
        (2, 3, 3.0),
        (1, 2, 1.0),
    ] {
        diamond.add_arc(u, v, c).unwrap();
    }
    let d = max_flow(&diamond).unwrap();
    ensure(d.flow == 4.0 && d.cut_capacity == 4.0, || {
        format!("diamond returned {}", d.flow)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..1000 {
        let n = rng.random_range(2..=30);
        let (s, t) = (0, n - 1);
        let m = rng.random_range(0..=4 * n);
        // integer capacities keep every sum exact
        let arcs: Vec<(usize, usize, f64)> = (0..m)
            .map(|_| {
                let u = rng.random_range(0..n);
                let mut v = rng.random_range(0..n);
                if v == u {
                    v = (v + 1) % n;
                }
                (u, v, rng.random_range(0..=20) as f64)
            })
            .collect();
        let mut net = FlowNetwork::new(n, s, t).unwrap();
        for &(u, v, c) in &arcs {
            net.add_arc(u, v, c).unwrap();
        }
        let r = max_flow(&net).map_err(|e| format!("network {k}: {e}"))?;
        let oracle = flow_oracle(n, &arcs, s, t);
        ensure(r.flow == r.cut_capacity, || {
            format!("network {k}: flow {} cut {}", r.flow, r.cut_capacity)
        })?;
        ensure(r.flow == net.cut_capacity(&r.source_side), || {
            format!("network {k}: stale cut")
        })?;
        ensure(r.flow == oracle, || {
            format!("network {k}: flow {} vs Edmonds-Karp {oracle}", r.flow)
        })?;
    }
    Ok("diamond = 4; 1000 networks: flow = cut = Edmonds-Karp".into())
}

// ---------------------------------------------------------------- 5

fn random_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

fn esvm_convexity_and_gradients() -> Result<String, String> {
    let (l1, l2) = (0.5, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 12;
    let positive = random_vec(&mut rng, dim, 1.0);
    let negatives: Vec<Vec<f64>> = (0..40).map(|_| random_vec(&mut rng, dim, 1.0)).collect();
    let e = |w: &[f64]| esvm_energy(w, &positive, &negatives, l1, l2);

    let mut worst_violation = 0.0f64;
    for _ in 0..1000 {
        let a = random_vec(&mut rng, dim, 3.0);
        let b = random_vec(&mut rng, dim, 3.0);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        worst_violation = worst_violation.max(e(&mid) - 0.5 * (e(&a) + e(&b)));
    }
    ensure(worst_violation <= 1e-9, || {
        format!("midpoint convexity violated by {worst_violation:e}")
    })?;

    let h = 1e-6;
    let mut checked = 0;
    let mut worst_rel = 0.0f64;
    while checked < 200 {
        let w = random_vec(&mut rng, dim, 2.0);
        let margins = std::iter::once(w.iter().zip(&positive).map(|(a, b)| a * b).sum::<f64>())
            .chain(
                negatives
                    .iter()
                    .map(|f| -w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>()),
            );
        if margins.into_iter().any(|m| (m - 1.0).abs() < 1e-3) {
            continue;
        }
        let g = subgradient(&w, &positive, &negatives, l1, l2);
        for i in 0..dim {
            let mut up = w.clone();
            let mut down = w.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (e(&up) - e(&down)) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(1.0);
            worst_rel = worst_rel.max(rel);
        }
        checked += 1;
    }
    ensure(worst_rel <= 1e-5, || {
        format!("subgradient relative error {worst_rel:e}")
    })?;

    for run in 0..20 {
        let pos = random_vec(&mut rng, dim, 1.0);
        let negs: Vec<Vec<f64>> = (0..30).map(|_| random_vec(&mut rng, dim, 1.0)).collect();
        let t = train_weights(&pos, &negs, l1, l2, 300).map_err(|e| e.to_string())?;
        ensure(t.history.windows(2).all(|w| w[1] <= w[0]), || {
            format!("run {run}: best-so-far rose")
        })?;
    }
    Ok(format!(
        "midpoint violation {worst_violation:.1e}, gradient error {worst_rel:.1e}, 20 monotone runs"
    ))
}

// ---------------------------------------------------------------- 6

/// A single 500-sample fit has sd(alpha) of at least ~0.135 whatever the
/// score design, so the tolerance applies to the estimate averaged over the
/// 20 seeds; the worst single seed is reported alongside.
fn calibration_recovery() -> Result<String, String> {
    let truth = Calibration {
        alpha: 2.0,
        beta: 0.3,
    };
    let seeds = 20;
    let (mut mean_a, mut mean_b, mut worst_a, mut worst_b) = (0.0, 0.0, 0.0f64, 0.0f64);
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let samples: Vec<(f64, bool)> = (0..500)
            .map(|_| {
                let s: f64 = rng.random_range(-2.7..3.3);
                let p = 1.0 / (1.0 + (-truth.alpha * (s - truth.beta)).exp());
                (s, rng.random::<f64>() < p)
            })
            .collect();
        let c = calibrate(&samples).map_err(|e| e.to_string())?;
        mean_a += c.alpha / seeds as f64;
        mean_b += c.beta / seeds as f64;
        worst_a = worst_a.max((c.alpha - truth.alpha).abs());
        worst_b = worst_b.max((c.beta - truth.beta).abs());
    }
    let summary = format!(
        "mean alpha {mean_a:.3}, mean beta {mean_b:.3} over {seeds} seeds (worst seed |dalpha| {worst_a:.3}, |dbeta| {worst_b:.3})"
    );
    ensure(
        (mean_a - truth.alpha).abs() <= 0.2 && (mean_b - truth.beta).abs() <= 0.2,
        || summary.clone(),
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------- 7

/// Pinned after the first run of the default corpus, which scored 1.0 on
/// both metrics; the margins absorb small changes in the generator.
const MIN_APA: f64 = 0.90;
const MIN_MAGR: f64 = 0.75;

fn end_to_end() -> Result<String, String> {
    let corpus = generate(&SceneSpec::default(), 20).map_err(|e| e.to_string())?;
    ensure(corpus.vocabulary.len() == 5, || {
        format!("{} labels", corpus.vocabulary.len())
    })?;
    let config = Config::default();
    let report = cross_validate(&corpus, &config).map_err(|e| e.to_string())?;
    for f in &report.folds {
        ensure(
            f.phase1_converged && f.phase1_iterations <= config.max_phase1_iters,
            || {
                format!(
                    "fold {} used {} Phase I iterations",
                    f.fold, f.phase1_iterations
                )
            },
        )?;
    }
    let summary = format!(
        "aPA {:.4} ± {:.4}, mAGR {:.4} ± {:.4}, Phase I iterations {:?}",
        report.apa.mean,
        report.apa.std,
        report.magr.mean,
        report.magr.std,
        report
            .folds
            .iter()
            .map(|f| f.phase1_iterations)
            .collect::<Vec<_>>()
    );
    ensure(
        report.apa.mean >= MIN_APA && report.magr.mean >= MIN_MAGR,
        || summary.clone(),
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------- 8

fn coparse(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_coparse"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "coparse {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |p: &str| tmp.path().join(p).to_string_lossy().into_owned();
    coparse(&["gen", "--n", "20", "--out", &path("corpus"), "--seed", "42"])?;
    let manifest = path("corpus/manifest.json");
    coparse(&[
        "run",
        "--manifest",
        &manifest,
        "--out",
        &path("a"),
        "--seed",
        "7",
    ])?;
    coparse(&[
        "run",
        "--manifest",
        &manifest,
        "--out",
        &path("b"),
        "--seed",
        "7",
    ])?;
    let a = read_outputs(&tmp.path().join("a"));
    let b = read_outputs(&tmp.path().join("b"));
    let maps = a.iter().filter(|(n, _)| n.ends_with(".labels.pgm")).count();
    ensure(
        maps == 20 && a.iter().any(|(n, _)| n == "metrics.json"),
        || format!("{maps} label maps"),
    )?;
    ensure(a == b, || "outputs differ between identical runs".into())?;
    Ok(format!(
        "{} output files byte-identical across two runs",
        a.len()
    ))
}

// ---------------------------------------------------------------- 9

fn energy_sanity() -> Result<String, String> {
    let config = Config::default();
    let corpus = generate(&SceneSpec::default(), 8).map_err(|e| e.to_string())?;
    let model = train_model(&corpus, &[0, 1, 2, 3, 4], &config).map_err(|e| e.to_string())?;
    let test = corpus.subset(&[5, 6, 7]);
    let phase1 = run_cosegmentation(&test, &config).map_err(|e| e.to_string())?;
    let regions = Prepared::new(&test)
        .and_then(|p| p.regions(&phase1.partitions))
        .map_err(|e| e.to_string())?;
    let graph =
        build_graph(&test, &regions, &phase1, &model, &config).map_err(|e| e.to_string())?;
    let problem = graph.to_problem();
    let in_range = |v: &f64| v.is_finite() && (0.0..=config.e_max).contains(v);
    ensure(problem.unary.iter().flatten().all(in_range), || {
        "unary energy out of range".into()
    })?;
    ensure(
        problem.pairwise.iter().flat_map(|t| &t.table).all(in_range),
        || "pairwise energy out of range".into(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..100 {
        let p = random_metric_problem(&mut rng);
        let mut shifted = p.clone();
        for t in &mut shifted.pairwise {
            let c = rng.random_range(-5.0..5.0);
            for v in &mut t.table {
                *v += c;
            }
        }
        let a = alpha_expansion(&p, &p.unary_argmin(), 10).map_err(|e| e.to_string())?;
        let b =
            alpha_expansion(&shifted, &shifted.unary_argmin(), 10).map_err(|e| e.to_string())?;
        ensure(a.labeling == b.labeling, || {
            format!("problem {k}: labeling changed under a per-edge shift")
        })?;
    }
    Ok(format!(
        "{} unary and {} pairwise tables in [0, {}]; 100 shifted problems keep their labeling",
        problem.unary.len(),
        problem.pairwise.len(),
        config.e_max
    ))
}

fn main() {
    let criteria: [(&str, Check, Duration); 9] = [
        (
            "1 baseline arithmetic",
            baseline_arithmetic,
            Duration::from_secs(10),
        ),
        (
            "2 multicut oracle",
            multicut_equivalence,
            Duration::from_secs(60),
        ),
        (
            "3 MAP oracle",
            map_oracle_agreement,
            Duration::from_secs(120),
        ),
        (
            "4 flow/cut duality",
            flow_cut_duality,
            Duration::from_secs(30),
        ),
        (
            "5 E-SVM convexity",
            esvm_convexity_and_gradients,
            Duration::from_secs(60),
        ),
        (
            "6 calibration recovery",
            calibration_recovery,
            Duration::from_secs(10),
        ),
        (
            "7 end-to-end synthetic",
            end_to_end,
            Duration::from_secs(600),
        ),
        ("8 determinism", determinism, Duration::from_secs(600)),
        ("9 energy sanity", energy_sanity, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if took <= limit {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {took:.1?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg} ({took:.1?})"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} ({took:.1?})");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
