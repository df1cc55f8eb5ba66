//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! straight to the process stdout (bypassing the test harness capture) and
//! then asserts the same verdict.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{Matrix4, Vector4};
use statrs::distribution::{ContinuousCDF, StudentsT};
use rand::seq::SliceRandom;
use rand::Rng;
use swarmtrack_core::belief::{make_double_integrator, FilterParams, GaussianBelief, RangeBearingMeasurement};
use swarmtrack_core::encoding::mask_k_nearest;
use swarmtrack_core::{Environment, FeatureSet, Pose2, SeededStream, TargetFeature, WorldConfig, FEATURE_DIM, N_ACTIONS};
use swarmtrack_trainer::{
    collect_episode, entropy, policy_distribution, soft_double_q_target, train, Exploration, PolicyMode, QNets,
    ReplayBuffer, TrainConfig,
};
use swarmtrack_eval::{evaluate, greedy_baseline, random_baseline, EpisodeRecord, EvalSettings, NetSource, Policy, TaskSpec};
use swarmtrack_valuenet::{Activation, Checkpoint, NetConfig, NetParams};

fn verdict(name: &str, pass: bool, detail: String, started: Instant) {
    let line = format!(
        "{} {name}: {detail} [{:.1} s]\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "{name}: {detail}");
}

fn random_rows(rng: &mut impl Rng, n: usize) -> Vec<[f64; FEATURE_DIM]> {
    (0..n)
        .map(|_| {
            [
                rng.gen_range(0.0..40.0),
                rng.gen_range(-3.14..3.14),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-12.0..8.0),
                if rng.gen_bool(0.5) { 1.0 } else { 0.0 },
            ]
        })
        .collect()
}

fn feature_set(rows: &[[f64; FEATURE_DIM]], ids: Vec<usize>) -> FeatureSet {
    FeatureSet::new(rows.iter().map(|r| TargetFeature::from_array(*r)).collect(), ids).unwrap()
}

#[test]
fn permutation_invariance() {
    let t0 = Instant::now();
    let mut rng = SeededStream::new(101);
    let net = NetParams::<f32>::init(&NetConfig::default(), &mut rng).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=64);
        let rows = random_rows(&mut rng, n);
        let ids: Vec<usize> = (0..n).collect();
        let mut perm = ids.clone();
        perm.shuffle(&mut rng);
        let a = net.q_values(&feature_set(&rows, ids)).unwrap();
        let shuffled: Vec<_> = perm.iter().map(|&i| rows[i]).collect();
        let b = net.q_values(&feature_set(&shuffled, perm)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((f64::from(*x) - f64::from(*y)).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = worst <= 1e-5 && secs < 60.0;
    verdict(
        "permutation_invariance",
        pass,
        format!("max |dQ| {worst:.2e} (<= 1e-5) over 1000 f32 sets of size 1..64, {secs:.1} s (< 60 s)"),
        t0,
    );
}

/// Five-point central differences of `dq . Q` for every parameter, plus a
/// flag per parameter telling whether every probe kept the base point's
/// rectifier pattern.
fn finite_difference(net: &NetParams<f64>, rows: &[[f64; FEATURE_DIM]], dq: &[f64], h: f64) -> (Vec<f64>, Vec<bool>) {
    let base = net.forward_cached(rows).unwrap().activation_pattern();
    let mut probe = net.clone();
    let mut grad = vec![0.0; net.len()];
    let mut smooth = vec![true; net.len()];
    for i in 0..net.len() {
        let x = net.data[i];
        let mut ok = true;
        let mut f = |dx: f64| {
            probe.data[i] = x + dx;
            let c = probe.forward_cached(rows).unwrap();
            ok &= c.activation_pattern() == base;
            c.q_values.iter().zip(dq).map(|(q, d)| q * d).sum::<f64>()
        };
        let (f2, f1, m1, m2) = (f(2.0 * h), f(h), f(-h), f(-2.0 * h));
        probe.data[i] = x;
        grad[i] = (-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h);
        smooth[i] = ok;
    }
    (grad, smooth)
}

#[test]
fn gradient_correctness() {
    let t0 = Instant::now();
    let mut rng = SeededStream::new(202);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let mut details = Vec::new();
    let mut pass = true;
    for act in [Activation::Tanh, Activation::Relu] {
        let cfg = NetConfig { embed_dim: 16, n_heads: 1, n_attention_blocks: 1, decoder_hidden: 16, activation: act, ..NetConfig::default() };
        let (mut worst, mut skipped, mut total): (f64, usize, usize) = (0.0, 0, 0);
        for _ in 0..100 {
            let net = NetParams::<f64>::init(&cfg, &mut rng).unwrap();
            let n = rng.gen_range(1..=8);
            let rows = random_rows(&mut rng, n);
            let dq: Vec<f64> = (0..N_ACTIONS).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = net.backward(&rows, &dq).unwrap();
            let (fd, smooth) = finite_difference(&net, &rows, &dq, 1e-3);
            // tanh is smooth everywhere, so every parameter is checked
            let strict = act == Activation::Tanh;
            for ((a, b), ok) in g.data.iter().zip(&fd).zip(&smooth) {
                total += 1;
                if strict || *ok {
                    worst = worst.max(rel(*a, *b));
                } else {
                    skipped += 1;
                }
            }
        }
        let ok = worst <= 1e-5 && (skipped as f64) < 0.01 * total as f64;
        pass &= ok;
        details.push(format!("{act:?}: worst rel err {worst:.2e} over {total} parameter checks, {skipped} kink-crossing skipped"));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    verdict("gradient_correctness", pass, format!("{}; {secs:.1} s (< 300 s)", details.join("; ")), t0);
}

fn random_pd(rng: &mut impl Rng) -> Matrix4<f64> {
    let l = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    l * l.transpose() + Matrix4::identity() * rng.gen_range(1e-3..1.0)
}

fn logdet(m: &Matrix4<f64>) -> f64 {
    m.cholesky().map(|c| c.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum()).unwrap_or(f64::NAN)
}

fn valid(m: &Matrix4<f64>) -> bool {
    (m - m.transpose()).abs().max() <= 1e-9 && m.symmetric_eigenvalues().iter().all(|&e| e > 0.0)
}

#[test]
fn kalman_properties() {
    let t0 = Instant::now();
    let mut rng = SeededStream::new(303);
    let params = FilterParams::default();
    let r = params.measurement_noise();
    let (mut predict_bad, mut update_bad, mut invalid) = (0, 0, 0);
    let mut worst_update: f64 = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let cov = random_pd(&mut rng);
        let mean = Vector4::from_fn(|_, _| rng.gen_range(-20.0..20.0));
        let b = GaussianBelief::new(mean, cov);
        let (a, w) = make_double_integrator(rng.gen_range(0.05..1.0), rng.gen_range(0.0..1.0));
        let p = b.predict(&a, &w);
        if logdet(&p.cov) < logdet(&b.cov) - 1e-9 {
            predict_bad += 1;
        }
        let pose = Pose2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-3.0..3.0));
        let z = RangeBearingMeasurement { range: rng.gen_range(0.5..15.0), bearing: rng.gen_range(-0.8..0.8), source_pose: pose };
        let u = match p.ekf_update(&z, &r) {
            Ok(u) => u,
            Err(_) => {
                invalid += 1;
                continue;
            }
        };
        let d = logdet(&u.cov) - logdet(&p.cov);
        worst_update = worst_update.max(d);
        if d > 1e-9 {
            update_bad += 1;
        }
        if !valid(&p.cov) || !valid(&u.cov) {
            invalid += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = predict_bad == 0 && update_bad == 0 && invalid == 0 && secs < 60.0;
    verdict(
        "kalman_properties",
        pass,
        format!(
            "10000 cases: {predict_bad} predicts lowered logdet, {update_bad} updates raised it (max change {worst_update:.2e}), {invalid} non-symmetric/non-PD; {secs:.1} s (< 60 s)"
        ),
        t0,
    );
}

#[test]
fn soft_to_hard_limit() {
    let t0 = Instant::now();
    let mut rng = SeededStream::new(404);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q1: Vec<f64> = (0..N_ACTIONS).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let q2: Vec<f64> = (0..N_ACTIONS).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let r = rng.gen_range(-5.0..5.0);
        let gamma = rng.gen_range(0.5..1.0);
        let done = rng.gen_bool(0.1);
        let soft = soft_double_q_target(r, done, gamma, 1e-6, [&q1, &q2], None).unwrap();
        let hard = if done {
            r
        } else {
            let qmin: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| a.min(*b)).collect();
            let best = (0..N_ACTIONS).max_by(|&i, &j| qmin[i].total_cmp(&qmin[j])).unwrap();
            r + gamma * qmin[best]
        };
        worst = worst.max((soft - hard).abs());
    }
    verdict("soft_to_hard_limit", worst <= 1e-4, format!("max |soft(alpha=1e-6) - greedy| {worst:.2e} (<= 1e-4) over 1000 transitions"), t0);
}

#[test]
fn entropy_monotonicity() {
    let t0 = Instant::now();
    let mut rng = SeededStream::new(505);
    let alphas = [0.01, 0.1, 1.0, 10.0];
    let mut violations = 0;
    let mut worst_gap: f64 = 0.0;
    for i in 0..100 {
        let spread = if i % 2 == 0 { 1.0 } else { rng.gen_range(1.0..50.0) };
        let q: Vec<f64> = (0..N_ACTIONS).map(|_| rng.gen_range(0.0..spread)).collect();
        let h: Vec<f64> = alphas.iter().map(|&a| entropy(&policy_distribution(&q, a).unwrap())).collect();
        violations += h.windows(2).filter(|w| w[1] < w[0] - 1e-12).count();
        if spread <= 1.0 {
            worst_gap = worst_gap.max((12f64.ln() - h[3]) / 12f64.ln());
        }
    }
    let pass = violations == 0 && worst_gap <= 0.01;
    verdict(
        "entropy_monotonicity",
        pass,
        format!("{violations} decreases over 100 Q-vectors x alpha {alphas:?}; at alpha=10, Q-range<=1: worst shortfall from ln 12 {:.3}% (<= 1%)", worst_gap * 100.0),
        t0,
    );
}

#[test]
fn mask_oracle() {
    let t0 = Instant::now();
    let mut rng = SeededStream::new(606);
    let (mut checks, mut mismatches) = (0usize, 0usize);
    for s in 0..10_000 {
        let n = rng.gen_range(1..=24);
        let mut rows = random_rows(&mut rng, n);
        if s % 3 == 0 {
            // coarse ranges force ties
            for r in rows.iter_mut() {
                r[0] = rng.gen_range(0..4) as f64;
            }
        }
        let mut ids: Vec<usize> = (0..100).collect();
        ids.shuffle(&mut rng);
        ids.truncate(n);
        let fs = feature_set(&rows, ids.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| rows[a][0].total_cmp(&rows[b][0]).then(ids[a].cmp(&ids[b])));
        for k in 1..=n + 1 {
            let mut want: Vec<(usize, [f64; FEATURE_DIM])> = order.iter().take(k).map(|&i| (ids[i], rows[i])).collect();
            want.sort_by_key(|x| x.0);
            let masked = mask_k_nearest(&fs, k).unwrap();
            let mut got: Vec<(usize, [f64; FEATURE_DIM])> =
                masked.target_ids.iter().zip(&masked.features).map(|(id, f)| (*id, f.to_array())).collect();
            got.sort_by_key(|x| x.0);
            checks += 1;
            if got != want {
                mismatches += 1;
            }
        }
    }
    verdict("mask_oracle", mismatches == 0, format!("{mismatches} mismatches against sort-and-truncate in {checks} (set, k) cases over 10000 sets"), t0);
}

#[test]
fn episode_bookkeeping() {
    let t0 = Instant::now();
    let world = WorldConfig::default().for_task(3, 2).unwrap();
    assert_eq!(world.horizon, 200);
    let stream = SeededStream::new(707);
    let nets = QNets::init(&NetConfig { embed_dim: 16, n_heads: 1, n_attention_blocks: 1, decoder_hidden: 16, ..NetConfig::default() }, &stream.derive(0)).unwrap();
    let (mut env, first) = Environment::reset(&world, &stream.derive(1)).unwrap();
    let mut buffer = ReplayBuffer::new(10_000).unwrap();
    let how = Exploration { mode: PolicyMode::Stochastic, alpha: 0.5, epsilon: 0.0 };
    let stats = collect_episode(&mut env, first, nets.online_refs(), &how, 1.0, &mut stream.derive(2), &mut buffer).unwrap();
    let rewards: Vec<f64> = (0..buffer.len()).map(|i| buffer.get(i).unwrap().r).collect();
    let shared = rewards.chunks(3).all(|c| c.len() == 3 && c.iter().all(|r| r.to_bits() == c[0].to_bits()));
    let pass = buffer.len() == 600 && stats.transitions == 600 && stats.steps == 200 && shared;
    verdict(
        "episode_bookkeeping",
        pass,
        format!("n=3, T=200: {} transitions appended, step-mates share one reward: {shared}", buffer.len()),
        t0,
    );
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn determinism() {
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        n_max: 2,
        m_max: 2,
        total_env_steps: 1200,
        eval_interval: 400,
        learning_starts: 200,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let net = NetConfig { embed_dim: 16, n_heads: 2, n_attention_blocks: 1, decoder_hidden: 16, ..NetConfig::default() };
    let runs: Vec<_> = (0..2)
        .map(|i| {
            let out = tmp.path().join(format!("train{i}"));
            train(&cfg, &WorldConfig::default(), &net, 9, Some(&out)).unwrap();
            dir_bytes(&out)
        })
        .collect();
    let train_same = runs[0] == runs[1] && runs[0].len() >= 4;
    let ckpt = tmp.path().join("train0").join(swarmtrack_trainer::checkpoint_name(1200));

    let eval = |i: usize, threads: &str| {
        let out = tmp.path().join(format!("eval{i}.csv"));
        let traces = tmp.path().join(format!("traces{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_swarmtrack"))
            .env("RAYON_NUM_THREADS", threads)
            .env("RUST_LOG", "warn")
            .args(["eval", "--checkpoint"])
            .arg(&ckpt)
            .args(["--tasks", "1a1t,3a2t", "--mask-k", "1", "--episodes", "3", "--seeds", "4,5", "--out"])
            .arg(&out)
            .arg("--trace-dir")
            .arg(&traces)
            .status()
            .unwrap();
        assert!(status.success());
        (fs::read(&out).unwrap(), dir_bytes(&traces))
    };
    let (a, b) = (eval(0, "1"), eval(1, "4"));
    let eval_same = a == b && a.1.len() == 12;
    verdict(
        "determinism",
        train_same && eval_same,
        format!(
            "repeated training: curves and {} checkpoints identical: {train_same}; repeated evaluation (1 vs 4 threads): results CSV and traces identical: {eval_same}",
            runs[0].len() - 1
        ),
        t0,
    );
}

/// Desk-scale network used for the trained-policy checks.
fn desk_net() -> NetConfig {
    NetConfig { embed_dim: 32, n_heads: 2, n_attention_blocks: 1, decoder_hidden: 64, ..NetConfig::default() }
}

fn desk_training(n: (usize, usize), m: (usize, usize)) -> TrainConfig {
    let mut cfg = TrainConfig {
        n_min: n.0,
        n_max: n.1,
        m_min: m.0,
        m_max: m.1,
        gamma: 0.95,
        batch_size: 64,
        learning_rate: 1e-4,
        learning_starts: 1_000,
        total_env_steps: 100_000,
        eval_interval: 100_000,
        ..TrainConfig::default()
    };
    cfg.alpha.decay_steps = 50_000;
    cfg
}

struct Trained {
    checkpoint: Checkpoint,
    secs: f64,
}

impl Trained {
    fn run(n: (usize, usize), m: (usize, usize), seed: u64) -> Self {
        let t0 = Instant::now();
        let out = train(&desk_training(n, m), &WorldConfig::default(), &desk_net(), seed, None).unwrap();
        let (_, checkpoint) = out.checkpoints.into_iter().last().unwrap();
        Self { checkpoint, secs: t0.elapsed().as_secs_f64() }
    }

    fn policy(&self, name: &str) -> Policy {
        Policy::from_checkpoint(name, &self.checkpoint, None, NetSource::Target).unwrap()
    }
}

static ONE_ONE: OnceLock<Trained> = OnceLock::new();
static TWO_ONE: OnceLock<Trained> = OnceLock::new();
static UP_TO_FOUR: OnceLock<Trained> = OnceLock::new();

fn up_to_four() -> &'static Trained {
    UP_TO_FOUR.get_or_init(|| Trained::run((1, 4), (1, 4), 3))
}

fn task(label: &str, mask: Option<usize>) -> TaskSpec {
    label.parse::<TaskSpec>().unwrap().with_mask(mask).unwrap()
}

fn returns(records: &[EpisodeRecord]) -> Vec<f64> {
    records.iter().map(|r| r.episode_return).collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (mean, x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn training_smoke() {
    let t0 = Instant::now();
    let one = ONE_ONE.get_or_init(|| Trained::run((1, 1), (1, 1), 1));
    let two = TWO_ONE.get_or_init(|| Trained::run((2, 2), (1, 1), 2));
    let settings = EvalSettings::default();
    let (p1, r1) = evaluate(&one.policy("1a1t"), &task("1a1t", None), &settings).unwrap();
    let (_, rr) = random_baseline(&task("1a1t", None), &settings).unwrap();
    let (p2, _) = evaluate(&two.policy("2a1t"), &task("2a1t", None), &settings).unwrap();
    let (m1, v1) = mean_var(&returns(&r1));
    let (mr, vr) = mean_var(&returns(&rr));
    let se = (v1 / r1.len() as f64 + vr / rr.len() as f64).sqrt();
    let z = (m1 - mr) / se;
    let beats_random = z >= 3.0;
    let more_agents = p2.mean_return >= p1.mean_return;
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        "training_smoke",
        beats_random && more_agents && secs <= 45.0 * 60.0,
        format!(
            "1a1t policy {m1:.1} vs random {mr:.1} over 50x5 episodes: {z:.1} pooled SE (>= 3); 2a1t-trained on 2a1t {:.1} >= 1a1t-trained on 1a1t {:.1}: {more_agents}; training {:.0} s + {:.0} s, total {secs:.0} s (<= 2700 s)",
            p2.mean_return, p1.mean_return, one.secs, two.secs
        ),
        t0,
    );
}

#[test]
fn masked_scaling() {
    let t0 = Instant::now();
    let trained = up_to_four();
    let policy = trained.policy("up-to-4a4t");
    let settings = EvalSettings::default();
    let mut pass = true;
    let mut details = Vec::new();
    for label in ["20a20t", "100a100t"] {
        let (masked, mr) = evaluate(&policy, &task(label, Some(4)), &settings).unwrap();
        let (unmasked, ur) = evaluate(&policy, &task(label, None), &settings).unwrap();
        // both runs visit the same (seed, episode) worlds in the same order
        assert!(mr.iter().zip(&ur).all(|(a, b)| (a.seed, a.episode) == (b.seed, b.episode)));
        let d: Vec<f64> = mr.iter().zip(&ur).map(|(a, b)| a.episode_return - b.episode_return).collect();
        let (md, vd) = mean_var(&d);
        let t = md / (vd / d.len() as f64).sqrt();
        let p = 1.0 - StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).unwrap().cdf(t);
        let ok = masked.mean_return >= unmasked.mean_return && p < 0.05;
        pass &= ok;
        details.push(format!(
            "{label}: k=4 {:.1} vs unmasked {:.1}, paired t {t:.2}, one-sided p {p:.2e}",
            masked.mean_return, unmasked.mean_return
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs <= 7200.0;
    verdict("masked_scaling", pass, format!("{}; {secs:.0} s incl. training {:.0} s (<= 7200 s)", details.join("; "), trained.secs), t0);
}

#[test]
fn greedy_baseline_sanity() {
    let t0 = Instant::now();
    let policy = up_to_four().policy("up-to-4a4t");
    let settings = EvalSettings::default();
    let (small, _) = greedy_baseline(&policy, &task("4a4t", None), &settings).unwrap();
    let (large, _) = greedy_baseline(&policy, &task("100a100t", None), &settings).unwrap();
    let rel = (large.mean_return - small.mean_return).abs() / small.mean_return.abs();
    let finite = large.mean_return.is_finite();
    let dup = small.mean_duplicate_assignment_rate > 0.0 && large.mean_duplicate_assignment_rate > 0.0;
    verdict(
        "greedy_baseline_sanity",
        finite && rel <= 0.25 && dup,
        format!(
            "k=1 per-target return 100a100t {:.1} vs 4a4t {:.1}: relative gap {:.1}% (<= 25%); duplicate-assignment rate {:.3} / {:.3} (> 0)",
            large.mean_return,
            small.mean_return,
            rel * 100.0,
            small.mean_duplicate_assignment_rate,
            large.mean_duplicate_assignment_rate
        ),
        t0,
    );
}
