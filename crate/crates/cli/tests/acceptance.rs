//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use riskfuse::calibration::{fit_platt, fit_temperature, CalibratorKind};
use riskfuse::claims::{
    generate_population, AdmissionType, Beneficiary, ClaimRecord, ClaimType, Day, Disposition, Gender, Interval,
    MedicareStatus, Race,
};
use riskfuse::cohort::{build_cohort, CohortConfig, IndexEvent, MortalityExclusion, PlannedRules, Task};
use riskfuse::eval::{auc, read_table3, recall_at_top_k, Confusion};
use riskfuse::features::{featurize, CcsMap, FeatureContext, Step};
use riskfuse::model::{EmbeddingMode, Fusion, Model, ModelConfig};
use riskfuse::pipeline::{prepare, Prepared, Variant};
use riskfuse::rng::{derive_seed, rng};
use riskfuse::tensor::{Tape, Tensor};
use riskfuse::train::{predict_examples, smote, split_patients, train, Fold, SmoteParams, SplitSpec, TrainParams};
use riskfuse_cli::RunConfig;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run_criterion(n: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        // Written to the raw handle so the lines show up without --nocapture.
        Ok(detail) => report(format!("criterion {n:>2} PASS  {name} ({secs:.1}s): {detail}")),
        Err(why) => report(format!("criterion {n:>2} FAIL  {name} ({secs:.1}s): {why}")),
    }
    outcome.is_ok()
}

// 1

fn random_steps(t: usize, input_dim: u32, r: &mut impl rand::Rng) -> Vec<Step> {
    (0..t)
        .map(|k| {
            let mut x: Vec<u32> = (0..3).map(|_| r.random_range(0..input_dim)).collect();
            x.sort();
            x.dedup();
            Step { day_offset: k as i32 - t as i32, x }
        })
        .collect()
}

fn batch_loss(m: &Model, tape: &mut Tape, bp: &riskfuse::model::BoundParams, data: &[(Vec<Step>, Vec<f64>, f64)]) -> riskfuse::tensor::Var {
    let batch: Vec<(&[Step], &[f64])> = data.iter().map(|(s, z, _)| (s.as_slice(), z.as_slice())).collect();
    let vars = m.forward_batch(tape, bp, &batch).unwrap();
    let logits: Vec<_> = vars.iter().map(|v| v.logit).collect();
    let stacked = tape.concat_rows(&logits).unwrap();
    let p = tape.sigmoid(stacked).unwrap();
    let targets: Vec<f64> = data.iter().map(|d| d.2).collect();
    tape.weighted_bce(p, &targets, 3.0, 1.0).unwrap()
}

fn gradient_oracle() -> Check {
    let start = Instant::now();
    let mut r = rng(11);
    let data: Vec<(Vec<Step>, Vec<f64>, f64)> = (0..2)
        .map(|i| {
            let z: Vec<f64> = (0..6).map(|_| r.random_range(-1.5..1.5)).collect();
            (random_steps(5, 20, &mut r), z, i as f64)
        })
        .collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for fusion in [Fusion::None, Fusion::Early, Fusion::Late] {
        let cfg = ModelConfig {
            input_dim: 20,
            embed_dim: 8,
            hidden_dim: 8,
            n_gru_layers: 2,
            fusion,
            mlp_hidden_dims: vec![8],
            domain_dim: 6,
            embedding: EmbeddingMode::Linear,
            seed: 5,
        };
        let m = Model::new(cfg).unwrap();
        let mut tape = Tape::new();
        let bp = m.bind(&mut tape, true).unwrap();
        let loss = batch_loss(&m, &mut tape, &bp, &data);
        tape.backward(loss).unwrap();
        let eval = |model: &Model| {
            let mut t = Tape::new();
            let b = model.bind(&mut t, false).unwrap();
            let l = batch_loss(model, &mut t, &b, &data);
            t.value(l).data()[0]
        };
        for (k, name) in m.names().iter().enumerate() {
            let analytic = tape.grad_or_zeros(bp.vars[k]);
            for i in 0..m.params()[k].len() {
                let mut plus = m.clone();
                plus.params_mut()[k].data_mut()[i] += h;
                let mut minus = m.clone();
                minus.params_mut()[k].data_mut()[i] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic.data()[i];
                // Entries whose true gradient is ~0 are compared absolutely.
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                checked += 1;
                if rel > worst {
                    worst = rel;
                }
                ensure(rel <= 1e-4, format!("{fusion:?} {name}[{i}]: backward {a:e} vs numeric {numeric:e}"))?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1}s"))?;
    Ok(format!("{checked} weights over none/early/late, worst relative error {worst:.1e}"))
}

// 2

fn attention_contract() -> Check {
    let cfg = ModelConfig {
        input_dim: 30,
        embed_dim: 8,
        hidden_dim: 8,
        n_gru_layers: 1,
        fusion: Fusion::Early,
        mlp_hidden_dims: vec![],
        domain_dim: 3,
        embedding: EmbeddingMode::Linear,
        seed: 3,
    };
    let m = Model::new(cfg).unwrap();
    let mut r = rng(21);
    let mut worst = 0.0f64;
    for case in 0..10_000 {
        let t_len = r.random_range(1..=30usize);
        let scale = 10f64.powf(r.random_range(-2.0..1.5));
        let h: Vec<f64> = (0..t_len * 8).map(|_| scale * r.random_range(-1.0..1.0)).collect();
        let mut tape = Tape::new();
        let hs = tape.constant(Tensor::new(t_len, 8, h.clone()).unwrap());
        let (a, o) = m.attend(&mut tape, hs).unwrap();
        let a = tape.value(a).data();
        ensure(a.iter().all(|&w| w >= 0.0), format!("case {case}: negative weight"))?;
        let dev = (a.iter().sum::<f64>() - 1.0).abs();
        worst = worst.max(dev);
        ensure(dev <= 1e-12, format!("case {case}: weights sum to 1{dev:+e}"))?;
        if t_len == 1 {
            ensure(tape.value(o).data() == h.as_slice(), format!("case {case}: T=1 summary differs from h_1"))?;
        }
        // Through the full model as well, on a subset.
        if case % 20 == 0 {
            let steps = random_steps(t_len, 30, &mut r);
            let p = m.predict(&steps, &[0.1, -0.4, 2.0]).unwrap();
            ensure(p.attention.len() == t_len, "attention length")?;
            ensure(p.attention.iter().all(|&w| w >= 0.0), "negative model attention")?;
            ensure((p.attention.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "model attention does not sum to 1")?;
        }
    }
    Ok(format!("10000 inputs, T in 1..=30, worst |sum - 1| = {worst:.1e}; T=1 returns h_1 exactly"))
}

// 3

fn claim(id: &str, admit: i32, discharge: i32, disposition: Disposition, dx: &str) -> ClaimRecord {
    ClaimRecord {
        claim_id: id.into(),
        beneficiary_id: "B1".into(),
        claim_type: ClaimType::Inpatient,
        admit_date: Day(admit),
        discharge_date: Day(discharge),
        dx_codes: vec![dx.into()],
        proc_codes: vec![],
        drg: Some("DRG01".into()),
        admission_type: AdmissionType::Emergent,
        admission_source: "emergency_room".into(),
        discharge_disposition: disposition,
        facility_id: "F1".into(),
    }
}

fn beneficiary(death: Option<i32>) -> Beneficiary {
    Beneficiary {
        beneficiary_id: "B1".into(),
        birth_date: Day(-(72 * 366)),
        gender: Gender::Female,
        race: Race::White,
        dual_eligible: false,
        medicare_status: MedicareStatus::AgedNoEsrd,
        enrollment_intervals: vec![Interval(Day(-1000), Day(1000))],
        death_date: death.map(Day),
    }
}

fn events(claims: &[ClaimRecord], death: Option<i32>) -> BTreeMap<String, IndexEvent> {
    let dx = (0..59).map(|i| (format!("D{i}"), i)).collect::<HashMap<_, _>>();
    let pr = (0..19).map(|i| (format!("P{i}"), i)).collect::<HashMap<_, _>>();
    let ccs = CcsMap::new(dx, pr, 60, 20).unwrap();
    let cohort =
        build_cohort(&[beneficiary(death)], claims, &CohortConfig::default(), &PlannedRules::default(), &ccs).unwrap();
    cohort.events.into_iter().map(|e| (e.event_id().to_string(), e)).collect()
}

fn readmitted_by(e: &IndexEvent) -> Option<&str> {
    e.readmit_stay.as_ref().map(|s| s.stay_id())
}

fn cohort_scenarios() -> Check {
    use Disposition::*;
    // Scenario 1: readmission inside 30 days.
    let ev = events(&[claim("A", 0, 3, Home, "D50"), claim("B", 20, 22, Home, "D51")], None);
    ensure(ev["A"].readmit_label && readmitted_by(&ev["A"]) == Some("B"), "scenario 1: A should be positive")?;
    ensure(!ev["B"].readmit_label, "scenario 1: B has no follow-up")?;

    // Scenario 2: next admission outside the window.
    let ev = events(&[claim("A", 0, 3, Home, "D50"), claim("B", 40, 42, Home, "D51")], None);
    ensure(!ev["A"].readmit_label, "scenario 2: A should be negative")?;

    // Scenario 3: only the first readmission counts for A; C belongs to B.
    let ev = events(
        &[claim("A", 0, 2, Home, "D50"), claim("B", 10, 12, Home, "D51"), claim("C", 25, 27, Home, "D52")],
        None,
    );
    ensure(readmitted_by(&ev["A"]) == Some("B"), "scenario 3: A should be credited with B")?;
    ensure(readmitted_by(&ev["B"]) == Some("C"), "scenario 3: B should be credited with C")?;
    ensure(ev["B"].is_eligible(), "scenario 3: B is an index event in its own right")?;
    let credited_c = ev.values().filter(|e| readmitted_by(e) == Some("C")).count();
    ensure(credited_c == 1, format!("scenario 3: C credited {credited_c} times"))?;

    // Scenario 4: a transfer chain is one stay.
    let ev = events(&[claim("A1", 0, 3, TransferAcute, "D50"), claim("A2", 3, 8, Home, "D51")], None);
    ensure(ev.len() == 1, format!("scenario 4: {} stays instead of one", ev.len()))?;
    let stay = &ev["A1"].stay;
    ensure(stay.merged_claim_ids == ["A1", "A2"], "scenario 4: claims not merged")?;
    ensure(stay.admit_date == Day(0) && stay.discharge_date == Day(8), "scenario 4: merged span")?;
    ensure(ev["A1"].is_eligible() && !ev["A1"].readmit_label, "scenario 4: the transfer is not a readmission")?;

    // A planned readmission is not a target.
    let ev = events(&[claim("A", 0, 3, Home, "D50"), claim("B", 20, 22, Home, "D40")], None);
    ensure(!ev["A"].readmit_label && ev["A"].any_readmission, "planned readmission counted")?;

    // Mortality.
    let ev = events(&[claim("A", 0, 3, Home, "D50")], Some(13));
    ensure(ev["A"].mortality_label && Task::Mortality.includes(&ev["A"]), "death at day 10 after home discharge")?;
    let ev = events(&[claim("A", 0, 3, Ama, "D50")], Some(13));
    ensure(
        ev["A"].mortality_exclusion == Some(MortalityExclusion::AgainstMedicalAdvice)
            && !Task::Mortality.includes(&ev["A"])
            && Task::Readmission.includes(&ev["A"]),
        "AMA discharge should leave the mortality task only",
    )?;
    let ev = events(&[claim("A", 0, 3, Hospice, "D50")], Some(13));
    ensure(ev["A"].mortality_exclusion == Some(MortalityExclusion::Hospice), "hospice discharge not excluded")?;
    let ev = events(&[claim("A", 0, 3, Home, "D50"), claim("H", 6, 9, Hospice, "D51")], Some(13));
    ensure(ev["A"].mortality_exclusion == Some(MortalityExclusion::Hospice), "hospice admission before death not excluded")?;
    let ev = events(&[claim("A", 0, 3, Home, "D50")], Some(50));
    ensure(!ev["A"].mortality_label && ev["A"].mortality_exclusion.is_none(), "death outside the window")?;
    Ok("scenarios 1-4, planned readmission, AMA and hospice fixtures".into())
}

// 4

fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn metric_oracle() -> Check {
    let start = Instant::now();
    let mut r = rng(41);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 1000 {
        let n = r.random_range(2..400usize);
        // Coarse grids give many ties.
        let levels = if done % 3 == 0 { r.random_range(2..6u32) } else { 1_000_000 };
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
        let rate = r.random_range(0.05..0.95);
        let labels: Vec<bool> = (0..n).map(|_| r.random_bool(rate)).collect();
        let Ok(fast) = auc(&scores, &labels) else { continue };
        let diff = (fast - pair_count_auc(&scores, &labels)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-12, format!("set {done}: differs by {diff:e}"))?;
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(format!("1000 sets with ties, worst difference {worst:.1e}"))
}

// 5

fn calibration() -> Check {
    let mut r = rng(51);
    let normal = Normal::new(0.0, 1.5).unwrap();
    let draw = |r: &mut riskfuse::rng::Rng, n: usize| -> (Vec<f64>, Vec<bool>) {
        let s: Vec<f64> = (0..n).map(|_| normal.sample(r)).collect();
        let y = s.iter().map(|&v| r.random_bool(riskfuse::model::sigmoid(v))).collect();
        (s, y)
    };

    // Overconfident logits: the true logit times three.
    let (s, y) = draw(&mut r, 20_000);
    let hot: Vec<f64> = s.iter().map(|v| 3.0 * v).collect();
    let cal = fit_temperature(&hot, &y, Fold::Calib).unwrap();
    let CalibratorKind::Temperature { t } = cal.kind else { return Err("not a temperature".into()) };
    ensure((2.7..=3.3).contains(&t), format!("fitted T = {t}"))?;
    ensure(cal.post_nll <= cal.pre_nll, format!("calibration NLL rose {} -> {}", cal.pre_nll, cal.post_nll))?;

    let (ts, ty) = draw(&mut r, 5_000);
    let test: Vec<f64> = ts.iter().map(|v| 3.0 * v).collect();
    let before = auc(&test, &ty).unwrap();
    let after = auc(&cal.apply_all(&test), &ty).unwrap();
    ensure(before.to_bits() == after.to_bits(), format!("test AUC changed {before} -> {after}"))?;

    // Well-calibrated logits: Platt should be close to the identity.
    let (s, y) = draw(&mut r, 20_000);
    let platt = fit_platt(&s, &y, Fold::Calib).unwrap();
    let CalibratorKind::Platt { a, b } = platt.kind else { return Err("not Platt".into()) };
    ensure((a - 1.0).abs() <= 0.1 && b.abs() <= 0.1, format!("Platt a = {a}, b = {b}"))?;
    Ok(format!("T = {t:.3}, NLL {:.4} -> {:.4}, AUC bit-identical; Platt a = {a:.3}, b = {b:.3}", cal.pre_nll, cal.post_nll))
}

// 6 and 7

fn synthetic_prepared(seed: u64) -> Prepared {
    let mut cfg = RunConfig::demo();
    cfg.seed = seed;
    cfg.resolve_seeds();
    let pop = generate_population(&cfg.synthetic).unwrap();
    let ccs = CcsMap::synthetic(&cfg.synthetic.vocab());
    let cohort = build_cohort(&pop.beneficiaries, &pop.claims, &cfg.cohort, &PlannedRules::default(), &ccs).unwrap();
    let ctx = FeatureContext::new(ccs);
    let set = featurize(&cohort, &pop.beneficiaries, &pop.claims, Task::Readmission, &ctx, &cfg.sequence_options()).unwrap();
    prepare(set, &cfg.split).unwrap()
}

/// One fixed configuration trained on the train fold.
fn fit(p: &Prepared, fusion: Fusion, w_pos: f64, seed: u64) -> Model {
    let mut cfg = p.base_config(Variant { fusion, embedding: EmbeddingMode::Linear });
    cfg.mlp_hidden_dims = if fusion == Fusion::None { vec![] } else { vec![16] };
    cfg.seed = derive_seed(seed, "init");
    let params = TrainParams {
        lr: 0.01,
        batch_size: 32,
        w_pos,
        max_epochs: 30,
        patience: 4,
        seed: derive_seed(seed, "order"),
        ..TrainParams::default()
    };
    let folds = p.folds();
    train(&cfg, None, &folds.train, &folds.valid, &params).unwrap().model
}

fn logits(p: &Prepared, model: &Model, fold: Fold) -> Vec<f64> {
    predict_examples(model, p.folds().get(fold)).unwrap().iter().map(|q| q.logit).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn fusion_benefit() -> Check {
    let start = Instant::now();
    let (mut none, mut early) = (Vec::new(), Vec::new());
    for seed in 1..=5u64 {
        let p = synthetic_prepared(seed);
        let labels = p.labels(Fold::Test);
        for (fusion, out) in [(Fusion::None, &mut none), (Fusion::Early, &mut early)] {
            let m = fit(&p, fusion, 1.0, seed);
            out.push(auc(&logits(&p, &m, Fold::Test), &labels).unwrap());
        }
    }
    let (mn, me) = (median(none.clone()), median(early.clone()));
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("median test AUC early {me:.3} vs none {mn:.3} (early {early:.3?}, none {none:.3?})");
    ensure(me - mn >= 0.03, format!("gap {:.3} below 0.03; {detail}", me - mn))?;
    ensure(mn > 0.5 && me > 0.5, format!("not above chance; {detail}"))?;
    ensure(secs < 600.0, format!("took {secs:.0}s"))?;
    Ok(detail)
}

fn recall_tunability() -> Check {
    let p = synthetic_prepared(1);
    let labels = p.labels(Fold::Test);
    let calib_labels = p.labels(Fold::Calib);
    let mut recalls = Vec::new();
    let mut last_scores = Vec::new();
    for w_pos in [1.0, 2.0, 4.0, 8.0] {
        let m = fit(&p, Fusion::Early, w_pos, 1);
        // Recall is read off calibrated probabilities, as in the report.
        let cal = fit_temperature(&logits(&p, &m, Fold::Calib), &calib_labels, Fold::Calib).unwrap();
        let probs = cal.apply_all(&logits(&p, &m, Fold::Test));
        recalls.push(Confusion::at(&probs, &labels, 0.5).recall().unwrap());
        last_scores = probs;
    }
    let inversions = recalls.windows(2).filter(|w| w[1] < w[0]).count();
    ensure(inversions <= 1, format!("recall@0.5 over w_pos 1,2,4,8 = {recalls:.3?} has {inversions} inversions"))?;
    ensure(recalls[3] > recalls[0], format!("recall did not rise: {recalls:.3?}"))?;

    let n = labels.len();
    let at_k: Vec<f64> = (1..=n).map(|k| recall_at_top_k(&last_scores, &labels, k).unwrap()).collect();
    ensure(at_k.windows(2).all(|w| w[1] >= w[0]), "recall@top-k decreased in k")?;
    ensure(at_k[n - 1] == 1.0, "recall@top-n is not 1")?;
    Ok(format!("recall@0.5 for w_pos 1,2,4,8 = {recalls:.3?} ({inversions} inversions); recall@top-k monotone, 1.0 at k = {n}"))
}

// 8

fn split_contract() -> Check {
    let mut r = rng(81);
    let spec = SplitSpec::default();
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let n = r.random_range(20..600usize);
        let positives: BTreeMap<String, usize> =
            (0..n).map(|i| (format!("P{i:04}"), if r.random_bool(0.3) { r.random_range(1..4) } else { 0 })).collect();
        let split = split_patients(&positives, &SplitSpec { seed, ..spec.clone() }).unwrap();
        let ids: BTreeSet<&String> = split.assignment.keys().collect();
        ensure(ids.len() == n && positives.keys().all(|k| ids.contains(k)), format!("seed {seed}: patients lost"))?;
        for (fold, frac) in Fold::ALL.into_iter().zip(spec.fractions()) {
            let dev = (split.count(fold) as f64 - frac * n as f64).abs();
            worst = worst.max(dev);
            ensure(dev <= 1.0, format!("seed {seed}, n {n}: {} has {} patients", fold.as_str(), split.count(fold)))?;
        }
    }
    Ok(format!("1000 seeds, each patient in exactly one fold, worst quota deviation {worst:.2} patients"))
}

// 9

fn smote_contract() -> Check {
    let mut r = rng(91);
    let mut synthetic = 0;
    for case in 0..200u64 {
        let n = r.random_range(30..200usize);
        let d = r.random_range(1..6usize);
        let rate = r.random_range(0.08..0.4);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
        let y: Vec<bool> = (0..n).map(|_| r.random_bool(rate)).collect();
        let minority = y.iter().filter(|&&v| v).count().min(y.iter().filter(|&&v| !v).count());
        let ratio = [0.5, 0.8, 1.0][case as usize % 3];
        let params = SmoteParams { k: 5, target_ratio: ratio, seed: case };
        if minority < 6 {
            ensure(smote(&x, &y, &params).is_err(), "too few minority rows accepted")?;
            continue;
        }
        let out = smote(&x, &y, &params).unwrap();
        let min_label = y.iter().filter(|&&v| v).count() * 2 <= n;
        let majority = n - minority;
        let after = out.labels.iter().filter(|&&l| l == min_label).count();
        let target = ((ratio * majority as f64).round() as usize).max(minority);
        ensure(after == target, format!("case {case}: {after} minority rows, target {target}"))?;
        ensure(out.labels.iter().filter(|&&l| l != min_label).count() == majority, "majority changed")?;
        ensure(out.features[..n] == x[..], "original rows changed")?;
        for (row, o) in out.features[n..].iter().zip(&out.origins) {
            ensure(y[o.base] == min_label && y[o.neighbor] == min_label, "parent outside the minority")?;
            ensure((0.0..=1.0).contains(&o.lambda), "lambda outside [0, 1]")?;
            for c in 0..d {
                let expect = x[o.base][c] + o.lambda * (x[o.neighbor][c] - x[o.base][c]);
                ensure((row[c] - expect).abs() <= 1e-12, format!("case {case}: row off its segment"))?;
            }
            synthetic += 1;
        }
    }
    Ok(format!("{synthetic} synthetic rows on their parent segments; counts exact"))
}

// 10

fn reporting_shape() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("demo");
    let o = Command::new(env!("CARGO_BIN_EXE_riskfuse"))
        .args(["pipeline", "--output-dir"])
        .arg(&out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    ensure(o.status.success(), format!("demo run failed: {}", String::from_utf8_lossy(&o.stderr)))?;

    let header = std::fs::read_to_string(out.join("report/table3.csv")).unwrap();
    ensure(header.lines().next() == Some("Algorithm,Embedding,AUC,AUC_std,Recall"), "table3 header")?;
    let rows = read_table3(&out.join("report/table3.csv")).unwrap();
    let mut cells = BTreeSet::new();
    for r in &rows {
        ensure(r.auc > 0.5 && r.auc < 1.0 && r.auc_std.is_finite(), format!("{} {}: AUC {}", r.algorithm, r.embedding, r.auc))?;
        cells.insert((r.algorithm.as_str(), r.embedding.as_str()));
    }
    for alg in ["LR", "Early Fusion", "Late Fusion"] {
        for emb in ["linear", "pretrained"] {
            ensure(cells.contains(&(alg, emb)), format!("table3 lacks {alg} / {emb}"))?;
        }
    }
    let order: Vec<&str> = rows.iter().map(|r| r.algorithm.as_str()).collect();
    ensure(order == ["LR", "LR", "Early Fusion", "Early Fusion", "Late Fusion", "Late Fusion"], "table3 row order")?;

    let mut rdr = csv::Reader::from_path(out.join("report/subgroups.csv")).unwrap();
    ensure(
        rdr.headers().unwrap().iter().collect::<Vec<_>>() == ["partition", "group", "n", "prevalence", "auc", "recall", "small"],
        "subgroups header",
    )?;
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        groups.entry(rec[0].to_string()).or_default().push(rec[1].to_string());
    }
    ensure(groups.get("Charlson index").map(Vec::as_slice) == Some(&["0-2".into(), "3-5".into(), "6+".into()][..]), "Charlson bands")?;
    let medicare = groups.get("Medicare status").cloned().unwrap_or_default();
    ensure(medicare.len() == 4, format!("Medicare status groups {medicare:?}"))?;
    let procs: Vec<_> = groups.keys().filter(|k| k.starts_with("Procedure PROC CCS")).collect();
    ensure(!procs.is_empty(), "no procedure groups")?;
    ensure(procs.iter().all(|k| groups[*k] == ["With", "Without"]), "procedure groups are With/Without pairs")?;
    Ok(format!("{} table rows; subgroups: Charlson 0-2/3-5/6+, {} Medicare statuses, {} procedure groups", rows.len(), medicare.len(), procs.len()))
}

#[test]
fn acceptance() {
    let results = [
        run_criterion(1, "gradient oracle", gradient_oracle),
        run_criterion(2, "attention contract", attention_contract),
        run_criterion(3, "cohort scenarios", cohort_scenarios),
        run_criterion(4, "AUC oracle", metric_oracle),
        run_criterion(5, "calibration", calibration),
        run_criterion(6, "fusion benefit", fusion_benefit),
        run_criterion(7, "recall tunability", recall_tunability),
        run_criterion(8, "split contract", split_contract),
        run_criterion(9, "SMOTE contract", smote_contract),
        run_criterion(10, "reporting shape", reporting_shape),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn report(line: String) {
    use std::io::Write;
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}
