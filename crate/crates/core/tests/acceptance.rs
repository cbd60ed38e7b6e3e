//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use astro_float::{BigFloat, Consts, RoundingMode};
use num_bigint::BigUint;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};

use network_implosion::app::{DatasetSpec, RunConfig, CURVE_FILE, METRICS_FILE, ROUNDS_FILE};
use network_implosion::bounds::{
    erasure_condition, erasure_tightens, generalization_bound, rademacher_bound,
    rademacher_bound_after_erasure, region_bound, region_bound_after_erasure,
};
use network_implosion::data::{generate_synthetic, SplitTag, SyntheticKind};
use network_implosion::implosion::{
    baseline_budget, evaluate, run_implosion, select_lowest, train, train_scratch_baseline,
    BaselineSpec, ImplosionConfig, RoundRecord, TrainingConfig,
};
use network_implosion::numeric::{finite_diff_check, softmax_cross_entropy, Matrix2D, Rng};
use network_implosion::resnet::{FCResNetModel, StageSpec, UnitKind};

type Outcome = Result<String, String>;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn random_batch(rows: usize, cols: usize, rng: &mut Rng) -> Matrix2D {
    Matrix2D::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

fn pick(rng: &mut Rng, n: usize) -> usize {
    rng.below(n as u64) as usize
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

// ---------------------------------------------------------------- 1

fn identity_erasure() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(101);
    let mut checked = 0;
    for seed in 0..20u64 {
        let stages: Vec<StageSpec> = (0..1 + pick(&mut rng, 3))
            .map(|_| {
                let s = 2 + pick(&mut rng, 5);
                StageSpec::new(s, s + pick(&mut rng, 6), 1 + pick(&mut rng, 4))
            })
            .collect();
        let n0 = 1 + pick(&mut rng, 6);
        let model = FCResNetModel::build(&stages, 2 + pick(&mut rng, 4), n0, 1.0, seed).unwrap();
        let x = random_batch(1 + pick(&mut rng, 8), n0, &mut rng);
        for id in model.eligible_units() {
            let mut zeroed = model.clone();
            zeroed.unit_mut(id).unwrap().set_priority(0.0).unwrap();
            let mut erased = model.clone();
            erased.erase_units(&[id]).unwrap();
            let (a, b) = (zeroed.forward(&x).unwrap(), erased.forward(&x).unwrap());
            if a.data()
                .iter()
                .zip(b.data())
                .any(|(p, q)| p.to_bits() != q.to_bits())
            {
                return Err(format!("model seed {seed}, unit {id}: logits differ"));
            }
            checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "{checked} erasures bit-identical in {:.2?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 2

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let stages = [StageSpec::new(4, 8, 2), StageSpec::new(4, 8, 2)];
    let mut model = FCResNetModel::build(&stages, 3, 3, 1.0, 21).unwrap();
    let params = model.count_params();
    if params > 500 {
        return Err(format!("{params} parameters"));
    }
    let priorities = [0.7, -1.3];
    for (id, w) in model.eligible_units().into_iter().zip(priorities) {
        model.unit_mut(id).unwrap().set_priority(w).unwrap();
    }
    let mut rng = Rng::new(22);
    let x = random_batch(6, 3, &mut rng);
    let labels = [0, 1, 2, 1, 0, 2];
    let (logits, cache) = model.forward_cached(&x).unwrap();
    let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
    let grads = model.backward(&cache, &g).unwrap();
    let theta = model.flat_params();
    let loss = |m: &FCResNetModel| {
        softmax_cross_entropy(&m.forward(&x).unwrap(), &labels)
            .unwrap()
            .0
    };
    let mut probe = model.clone();
    let worst = finite_diff_check(
        |t| {
            probe.set_flat_params(t).unwrap();
            loss(&probe)
        },
        &theta,
        &grads.flatten(),
        1e-5,
    );
    // The priority derivatives on their own.
    let mut worst_w = 0.0f64;
    for id in model.eligible_units() {
        let w = model.unit(id).unwrap().priority().unwrap();
        let mut m = model.clone();
        m.unit_mut(id).unwrap().set_priority(w + 1e-5).unwrap();
        let plus = loss(&m);
        m.unit_mut(id).unwrap().set_priority(w - 1e-5).unwrap();
        let minus = loss(&m);
        let numeric = (plus - minus) / 2e-5;
        let analytic = grads.priority(id).unwrap();
        worst_w = worst_w.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()));
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    if worst < 1e-6 && worst_w < 1e-6 {
        Ok(format!(
            "{params} params, max relative error {worst:.2e} (priorities {worst_w:.2e})"
        ))
    } else {
        Err(format!(
            "max relative error {worst:.2e}, priorities {worst_w:.2e}"
        ))
    }
}

// ---------------------------------------------------------------- 3

struct SeedResult {
    seed: u64,
    initial: f64,
    fin: f64,
    baseline: f64,
    elapsed: Duration,
}

fn desk_seed(
    cfg: RunConfig,
    train_set: &network_implosion::data::DatasetSplit,
    val: &network_implosion::data::DatasetSplit,
) -> Result<SeedResult, String> {
    let start = Instant::now();
    let a = &cfg.architecture;
    let mut model =
        FCResNetModel::build(&a.stages, a.classes, a.input_width, a.input_bound, cfg.seed)
            .map_err(|e| e.to_string())?;
    train(&mut model, train_set, Some(val), &cfg.training, 0).map_err(|e| e.to_string())?;
    let state = run_implosion(&mut model, train_set, Some(val), &cfg.implosion)
        .map_err(|e| e.to_string())?;
    let budget = baseline_budget(&cfg.training, &cfg.implosion, state.rounds.len());
    let spec = BaselineSpec {
        stages: model.current_stage_specs(),
        class_count: a.classes,
        input_width: a.input_width,
        input_bound: a.input_bound,
        model_seed: cfg.seed,
    };
    let (baseline, _) = train_scratch_baseline(&spec, train_set, Some(val), &cfg.training, budget)
        .map_err(|e| e.to_string())?;
    Ok(SeedResult {
        seed: cfg.seed,
        initial: state.initial_val_acc.unwrap(),
        fin: state.final_val_acc().unwrap(),
        baseline: evaluate(&baseline, val)
            .map_err(|e| e.to_string())?
            .accuracy,
        elapsed: start.elapsed(),
    })
}

fn desk_reproduction() -> Outcome {
    let root = workspace_root().join("data/mnist");
    let mut cfg = RunConfig::desk();
    if let DatasetSpec::Mnist {
        train_images,
        train_labels,
        val_images,
        val_labels,
        ..
    } = &mut cfg.dataset
    {
        for p in [train_images, train_labels, val_images, val_labels] {
            *p = root.join(p.file_name().unwrap());
        }
    }
    let (train_set, val) = cfg
        .dataset
        .load()
        .map_err(|e| format!("MNIST unavailable: {e}"))?;
    let seeds = [1u64, 2, 3];
    // Sequential on purpose: the runtime bound is for a single thread.
    let results: Vec<Result<SeedResult, String>> = seeds
        .iter()
        .map(|&seed| desk_seed(cfg.clone().with_seed(seed), &train_set, &val))
        .collect();
    let mut passing = 0;
    let mut cpu = Duration::ZERO;
    let mut detail = Vec::new();
    for r in results {
        let r = r?;
        let a = r.fin >= r.initial - 0.003;
        let b = r.fin >= r.baseline;
        passing += usize::from(a && b);
        cpu += r.elapsed;
        detail.push(format!(
            "seed {}: initial {:.4} final {:.4} baseline {:.4} (a {} b {})",
            r.seed,
            r.initial,
            r.fin,
            r.baseline,
            if a { "ok" } else { "no" },
            if b { "ok" } else { "no" }
        ));
    }
    for line in &detail {
        println!("    {line}");
    }
    let summary = format!(
        "{passing}/3 seeds meet (a) and (b); {} train / {} val samples; {:.0?} single-threaded",
        train_set.len(),
        val.len(),
        cpu
    );
    within(cpu, Duration::from_secs(30 * 60))?;
    if passing >= 2 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

// ---------------------------------------------------------------- 4

/// Closed-form MACs and parameters, counted independently of the model:
/// transition `s·in + h·in + s·h` MACs and `+ h` biases, weighted unit
/// `2·s·h` MACs and `2·s·h + h + 1` parameters, head `M·s` and `M·s + M`.
fn closed_form(n0: usize, stages: &[StageSpec], classes: usize) -> (u64, u64) {
    let (mut macs, mut params, mut width) = (0, 0, n0);
    for st in stages {
        let (s, h) = (st.stream_width, st.hidden_width);
        let t = s * width + h * width + s * h;
        macs += t;
        params += t + h;
        let weighted = st.unit_count - 1;
        macs += weighted * 2 * s * h;
        params += weighted * (2 * s * h + h + 1);
        width = s;
    }
    (
        (macs + classes * width) as u64,
        (params + classes * width + classes) as u64,
    )
}

fn accounting() -> Outcome {
    let start = Instant::now();
    // (n0, stages, M, MACs, params) derived by hand.
    let pinned: [(usize, Vec<StageSpec>, usize, u64, u64); 5] = [
        (4, vec![StageSpec::new(4, 8, 2)], 3, 156, 176),
        (
            2,
            vec![StageSpec::new(4, 8, 3), StageSpec::new(4, 8, 2)],
            3,
            340,
            386,
        ),
        (
            784,
            vec![StageSpec::new(64, 128, 6); 2],
            10,
            343_680,
            345_236,
        ),
        (1, vec![StageSpec::new(2, 2, 1)], 2, 12, 16),
        (
            3,
            vec![StageSpec::new(5, 7, 2), StageSpec::new(2, 9, 3)],
            4,
            294,
            342,
        ),
    ];
    for (n0, stages, m, macs, params) in &pinned {
        let model = FCResNetModel::build(stages, *m, *n0, 1.0, 0).unwrap();
        let got = (model.count_macs(), model.count_params());
        if got != (*macs, *params) || closed_form(*n0, stages, *m) != got {
            return Err(format!(
                "{stages:?}: got {got:?}, expected ({macs}, {params})"
            ));
        }
    }
    let mut runner = TestRunner::new(PropConfig {
        cases: 200,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let arch = (
        1usize..6,
        prop::collection::vec((1usize..6, 0usize..4, 1usize..5), 1..4),
        2usize..5,
        any::<u64>(),
    );
    runner
        .run(&arch, |(n0, raw, m, seed)| {
            let stages: Vec<StageSpec> = raw
                .iter()
                .map(|&(s, extra, u)| StageSpec::new(s, s + extra, u))
                .collect();
            let mut model = FCResNetModel::build(&stages, m, n0, 1.0, seed).unwrap();
            prop_assert_eq!(
                (model.count_macs(), model.count_params()),
                closed_form(n0, &stages, m)
            );
            let mut rng = Rng::new(seed);
            while !model.eligible_units().is_empty() {
                let ids = model.eligible_units();
                let id = ids[pick(&mut rng, ids.len())];
                let u = model.unit(id).unwrap();
                let (s, h) = (u.output_width() as u64, u.hidden_width() as u64);
                let (macs, params) = (model.count_macs(), model.count_params());
                model.erase_units(&[id]).unwrap();
                prop_assert_eq!(model.count_macs(), macs - 2 * s * h);
                prop_assert_eq!(model.count_params(), params - (2 * s * h + h + 1));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "5 pinned architectures and 200 random erasure sequences in {:.2?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 5

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(i))
}

fn binomial(n: usize, k: usize) -> BigUint {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Direct evaluation: naive product of `⌊n_i/n0⌋^n0` over every hidden
/// layer but the last (and `skip`), times `Σ_{j≤n0} C(n_L, j)`.
fn region_oracle(n0: usize, widths: &[usize], skip: Option<usize>) -> BigUint {
    let mut product = BigUint::from(1u32);
    for (i, &w) in widths[..widths.len() - 1].iter().enumerate() {
        if skip == Some(i + 1) {
            continue;
        }
        for _ in 0..n0 {
            product *= BigUint::from(w / n0);
        }
    }
    let n_last = widths[widths.len() - 1];
    let sum = (0..=n0.min(n_last)).fold(BigUint::from(0u32), |acc, j| acc + binomial(n_last, j));
    product * sum
}

struct Hp {
    cc: Consts,
}

const PREC: usize = 320;
const RM: RoundingMode = RoundingMode::ToEven;

impl Hp {
    fn f(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, PREC)
    }

    fn ln(&mut self, v: &BigFloat) -> BigFloat {
        v.ln(PREC, RM, &mut self.cc)
    }

    fn to_f64(v: &BigFloat) -> f64 {
        format!("{v}").parse().unwrap()
    }

    fn rademacher(
        &mut self,
        c: f64,
        n: f64,
        n0: usize,
        m: usize,
        factors: &[f64],
        skip: Option<usize>,
    ) -> BigFloat {
        let ln_n0 = self.ln(&self.f(n0 as f64));
        let mut r = self.f(c).mul(&self.f(n), PREC, RM).mul(
            &ln_n0.div(&self.f(m as f64), PREC, RM).sqrt(PREC, RM),
            PREC,
            RM,
        );
        for (i, &w) in factors.iter().enumerate() {
            if skip != Some(i + 1) {
                r = r.mul(&self.f(w), PREC, RM);
            }
        }
        r
    }

    fn coefficient(&self, classes: usize, rho: f64) -> BigFloat {
        let m = self.f(classes as f64);
        let two_m_minus_one = m.mul(&self.f(2.0), PREC, RM).sub(&self.f(1.0), PREC, RM);
        self.f(8.0)
            .mul(&m, PREC, RM)
            .mul(&two_m_minus_one, PREC, RM)
            .div(&self.f(rho), PREC, RM)
    }

    fn generalization(
        &mut self,
        emp: f64,
        r: &BigFloat,
        classes: usize,
        rho: f64,
        m: usize,
        delta: f64,
    ) -> BigFloat {
        let mm = self.f(m as f64);
        let two_over_rho = self.f(2.0).div(&self.f(rho), PREC, RM);
        let ln2 = self.ln(&self.f(2.0));
        let log2 = self.ln(&two_over_rho).div(&ln2, PREC, RM);
        let loglog = self.ln(&log2);
        let t3 = loglog.div(&mm, PREC, RM).sqrt(PREC, RM);
        let two_over_delta = self.f(2.0).div(&self.f(delta), PREC, RM);
        let t4 = self
            .ln(&two_over_delta)
            .div(&mm.mul(&self.f(2.0), PREC, RM), PREC, RM)
            .sqrt(PREC, RM);
        self.f(emp)
            .add(&self.coefficient(classes, rho).mul(r, PREC, RM), PREC, RM)
            .add(&t3, PREC, RM)
            .add(&t4, PREC, RM)
    }
}

fn rel_err(got: f64, want: &BigFloat) -> f64 {
    let w = Hp::to_f64(want);
    if got == w {
        return 0.0;
    }
    (got - w).abs() / w.abs().max(f64::MIN_POSITIVE)
}

fn bounds_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(55);
    let mut hp = Hp {
        cc: Consts::new().map_err(|e| format!("{e:?}"))?,
    };
    let signatures = 150;
    let mut erasures = 0;
    let mut worst = 0.0f64;
    for case in 0..signatures {
        let n0 = 1 + pick(&mut rng, 4);
        let depth = 1 + pick(&mut rng, 8);
        let widths: Vec<usize> = (0..depth).map(|_| n0 + pick(&mut rng, 21 - n0)).collect();
        let got = region_bound(n0, &widths).map_err(|e| e.to_string())?;
        if got != region_oracle(n0, &widths, None) {
            return Err(format!(
                "region bound mismatch at n0 {n0}, widths {widths:?}"
            ));
        }
        for l in 1..depth {
            let got = region_bound_after_erasure(n0, &widths, l).map_err(|e| e.to_string())?;
            if got != region_oracle(n0, &widths, Some(l)) {
                return Err(format!(
                    "erased region bound mismatch at {widths:?}, l' {l}"
                ));
            }
            erasures += 1;
        }

        // Real-valued bounds need ln n0 > 0.
        let n0r = 2 + pick(&mut rng, 3);
        let factors: Vec<f64> = (0..depth).map(|_| 0.2 + 2.8 * rng.uniform()).collect();
        let c = 0.5 + 1.5 * rng.uniform();
        let n = 0.5 + 2.5 * rng.uniform();
        let m = 1 + pick(&mut rng, 10_000);
        let classes = 2 + pick(&mut rng, 9);
        let rho = if case % 10 == 0 {
            1.0
        } else {
            0.05 + 0.95 * rng.uniform()
        };
        let delta = 0.01 + 0.49 * rng.uniform();
        let (emp, emp_erased) = (rng.uniform(), rng.uniform());
        let l = 1 + pick(&mut rng, depth);

        let r = rademacher_bound(c, n, n0r, m, &factors).map_err(|e| e.to_string())?;
        let r2 =
            rademacher_bound_after_erasure(c, n, n0r, m, &factors, l).map_err(|e| e.to_string())?;
        let g = generalization_bound(emp, r, classes, rho, m, delta).map_err(|e| e.to_string())?;
        let g2 = generalization_bound(emp_erased, r2, classes, rho, m, delta)
            .map_err(|e| e.to_string())?;
        let t =
            erasure_condition(emp, emp_erased, classes, rho, r, r2).map_err(|e| e.to_string())?;

        let hr = hp.rademacher(c, n, n0r, m, &factors, None);
        let hr2 = hp.rademacher(c, n, n0r, m, &factors, Some(l));
        let hg = hp.generalization(emp, &hr, classes, rho, m, delta);
        let hg2 = hp.generalization(emp_erased, &hr2, classes, rho, m, delta);
        let hlhs = hp.f(emp_erased).sub(&hp.f(emp), PREC, RM);
        let hrhs = hp
            .coefficient(classes, rho)
            .mul(&hr.sub(&hr2, PREC, RM), PREC, RM);
        for (name, got, want) in [
            ("rademacher", r, &hr),
            ("rademacher after erasure", r2, &hr2),
            ("generalization", g, &hg),
            ("generalization after erasure", g2, &hg2),
            ("condition lhs", t.lhs, &hlhs),
            ("condition rhs", t.rhs, &hrhs),
        ] {
            let e = rel_err(got, want);
            worst = worst.max(e);
            if e > 1e-12 {
                return Err(format!("{name}: relative error {e:.2e} in case {case}"));
            }
        }
        let (hl, hrh) = (Hp::to_f64(&hlhs), Hp::to_f64(&hrhs));
        if t.holds != (hl < hrh) && (hl - hrh).abs() > 1e-12 * hrh.abs().max(hl.abs()) {
            return Err(format!("condition verdict differs in case {case}"));
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "{signatures} signatures, {erasures} erasures exact; real-valued max relative error {worst:.1e}; {:.2?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 6

fn erasure_predicate() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(66);
    let (mut above, mut at_one, mut below) = (0, 0, 0);
    for _ in 0..2000 {
        let depth = 1 + pick(&mut rng, 8);
        // Multiples of 1/16 keep products exact, so the comparison is
        // decided by the factor alone; 16/16 hits the boundary often.
        let factors: Vec<f64> = (0..depth)
            .map(|_| (1 + pick(&mut rng, 64)) as f64 / 16.0)
            .collect();
        let l = 1 + pick(&mut rng, depth);
        let (c, n, n0, m) = (
            1.0 + rng.uniform(),
            0.5 + rng.uniform(),
            2 + pick(&mut rng, 5),
            1 + pick(&mut rng, 1000),
        );
        let full = rademacher_bound(c, n, n0, m, &factors).unwrap();
        let erased = rademacher_bound_after_erasure(c, n, n0, m, &factors, l).unwrap();
        let tightens = erasure_tightens(&factors, l).unwrap();
        let w = factors[l - 1];
        if tightens != (erased < full) || tightens != (w > 1.0) {
            return Err(format!(
                "factors {factors:?}, l' {l}: predicate {tightens}, bounds {erased} vs {full}"
            ));
        }
        match w.partial_cmp(&1.0).unwrap() {
            std::cmp::Ordering::Greater => above += 1,
            std::cmp::Ordering::Equal => at_one += 1,
            std::cmp::Ordering::Less => below += 1,
        }
    }
    if at_one == 0 {
        return Err("boundary Ŵ = 1 never sampled".into());
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "2000 sequences ({above} above, {at_one} at, {below} below one)"
    ))
}

// ---------------------------------------------------------------- 7

fn small_config(out: &Path) -> RunConfig {
    let training = TrainingConfig {
        learning_rate: 0.02,
        momentum: 0.9,
        weight_decay: 1e-4,
        epochs: 6,
        lr_milestones: vec![4],
        lr_factor: 0.1,
        batch_size: 32,
        seed: 0,
        decay_priorities: true,
    };
    RunConfig {
        dataset: DatasetSpec::Synthetic {
            generator: SyntheticKind::Spirals,
            per_class: 60,
            val_per_class: 30,
            classes: 3,
            noise: 0.05,
            seed: 17,
            val_seed: None,
        },
        architecture: network_implosion::app::ArchitectureConfig {
            stages: vec![StageSpec::new(8, 16, 3), StageSpec::new(8, 16, 3)],
            classes: 3,
            input_width: 2,
            input_bound: 2.0,
        },
        implosion: ImplosionConfig {
            k: 1,
            target_remaining: 1,
            retrain: TrainingConfig {
                epochs: 3,
                lr_milestones: vec![2],
                ..training.clone()
            },
        },
        training,
        baseline: Default::default(),
        out_dir: out.to_owned(),
        seed: 5,
    }
    .with_seed(5)
}

fn determinism(dir: &Path) -> Outcome {
    let start = Instant::now();
    let config = dir.join("small.json");
    fs::write(&config, small_config(&dir.join("unused")).to_json()).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_nimp"))
            .arg("implode")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "run {run}: {}",
                String::from_utf8_lossy(&status.stderr).trim()
            ));
        }
        outputs.push(out);
    }
    for name in [METRICS_FILE, CURVE_FILE] {
        let a = fs::read(outputs[0].join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(outputs[1].join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
    }
    let curve = fs::read_to_string(outputs[0].join(CURVE_FILE)).map_err(|e| e.to_string())?;
    let points = curve
        .lines()
        .filter(|l| l.starts_with("implosion,"))
        .count();
    Ok(format!(
        "metrics.csv and curve.csv byte-identical ({points} curve points) in {:.2?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- 8

/// Replays the erased ids of every round from its logged snapshot and
/// checks the snapshot covered exactly the units still eligible.
fn replay(initial: &FCResNetModel, rounds: &[RoundRecord], k: usize) -> Result<(), String> {
    let transitions: BTreeSet<u32> = initial
        .units()
        .iter()
        .filter(|u| u.kind() == UnitKind::Transition)
        .map(|u| u.id())
        .collect();
    let mut eligible: BTreeSet<u32> = initial.eligible_units().into_iter().collect();
    for r in rounds {
        let snapshot: BTreeSet<u32> = r.priorities.iter().map(|&(id, _)| id).collect();
        if snapshot != eligible {
            return Err(format!(
                "round {}: snapshot ids {snapshot:?} vs eligible {eligible:?}",
                r.round
            ));
        }
        let chosen = select_lowest(&r.priorities, k).map_err(|e| e.to_string())?;
        if chosen != r.erased {
            return Err(format!(
                "round {}: replay {chosen:?} vs logged {:?}",
                r.round, r.erased
            ));
        }
        if let Some(t) = r.erased.iter().find(|id| transitions.contains(id)) {
            return Err(format!("round {}: stage-first unit {t} erased", r.round));
        }
        for id in &r.erased {
            eligible.remove(id);
        }
    }
    Ok(())
}

fn eligibility(dir: &Path) -> Outcome {
    let start = Instant::now();
    let mut runner = TestRunner::new(PropConfig {
        cases: 40,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (
        prop::collection::vec((2usize..4, 0usize..3, 1usize..5), 1..4),
        1usize..4,
        0usize..6,
        any::<u64>(),
    );
    let full_runs = std::cell::Cell::new(0);
    runner
        .run(&strategy, |(raw, k, target, seed)| {
            let stages: Vec<StageSpec> = raw
                .iter()
                .map(|&(s, extra, u)| StageSpec::new(s, s + extra, u))
                .collect();
            let initial = FCResNetModel::build(&stages, 3, 2, 2.0, seed).unwrap();
            let eligible = initial.eligible_units().len();
            let retrain = TrainingConfig {
                learning_rate: 0.01,
                momentum: 0.9,
                weight_decay: 1e-4,
                epochs: 1,
                lr_milestones: vec![],
                lr_factor: 0.1,
                batch_size: 8,
                seed,
                decay_priorities: true,
            };
            let icfg = ImplosionConfig {
                k,
                target_remaining: target.min(eligible),
                retrain,
            };
            prop_assume!(icfg.validate_for(eligible).is_ok());
            let data =
                generate_synthetic(SyntheticKind::Blobs, 8, 3, 0.3, seed, SplitTag::Train).unwrap();
            let mut model = initial.clone();
            let state = run_implosion(&mut model, &data, None, &icfg).unwrap();
            replay(&initial, &state.rounds, k).map_err(TestCaseError::fail)?;
            for (i, st) in model.current_stage_specs().iter().enumerate() {
                let first = model.units().iter().find(|u| u.stage() == i);
                prop_assert!(st.unit_count >= 1);
                prop_assert_eq!(first.map(|u| u.kind()), Some(UnitKind::Transition));
            }
            prop_assert!(model.eligible_units().len() <= icfg.target_remaining);
            full_runs.set(full_runs.get() + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // The rounds logged by the CLI in criterion 7 replay as well.
    let logged = fs::read_to_string(dir.join("a").join(ROUNDS_FILE)).map_err(|e| e.to_string())?;
    let rounds: Vec<serde_json::Value> =
        serde_json::from_str(&logged).map_err(|e| e.to_string())?;
    let cfg = small_config(dir);
    let a = &cfg.architecture;
    let initial =
        FCResNetModel::build(&a.stages, a.classes, a.input_width, a.input_bound, cfg.seed).unwrap();
    let records: Vec<RoundRecord> = rounds
        .iter()
        .map(|r| RoundRecord {
            round: r["round"].as_u64().unwrap() as usize,
            priorities: r["priorities"]
                .as_array()
                .unwrap()
                .iter()
                .map(|p| (p[0].as_u64().unwrap() as u32, p[1].as_f64().unwrap()))
                .collect(),
            erased: r["erased"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_u64().unwrap() as u32)
                .collect(),
            remaining_units: 0,
            remaining_layers: 0,
            val_acc: None,
            macs: 0,
            params: 0,
        })
        .collect();
    replay(&initial, &records, cfg.implosion.k)?;
    Ok(format!(
        "{} random implosion runs and {} logged CLI rounds replay exactly in {:.2?}",
        full_runs.get(),
        records.len(),
        start.elapsed()
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    type Criterion<'a> = (&'a str, Box<dyn FnOnce() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("1 identity-erasure exactness", Box::new(identity_erasure)),
        ("2 gradient correctness", Box::new(gradient_correctness)),
        ("3 desk-scale MNIST implosion", Box::new(desk_reproduction)),
        ("4 accounting exactness", Box::new(accounting)),
        ("5 bounds oracle equivalence", Box::new(bounds_oracle)),
        (
            "6 erasure-tightening predicate",
            Box::new(erasure_predicate),
        ),
        ("7 determinism", Box::new(|| determinism(dir.path()))),
        ("8 eligibility safety", Box::new(|| eligibility(dir.path()))),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
