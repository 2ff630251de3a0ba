//! End-to-end acceptance checks. Each criterion prints one `[PASS]` or
//! `[FAIL]` line; the process exits nonzero if any fails.

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tensorrec_core::data::{
    build_dataset, build_time_grid, kcore_filter, split_dataset, Dataset, Holdout, Interaction, SplitRatios,
    Triple, Vocab,
};
use tensorrec_core::eval::{evaluate_model, ndcg_at_n, recall_at_n, EvalProtocol};
use tensorrec_core::features::{normalize_features, FeatureMatrix, Normalization};
use tensorrec_core::models::{
    predict_b, predict_baseline, predict_c, predict_dcf, predict_dcfa, Baseline, CpFactors, DcfaParams, Dims,
    FnScorer, PitfFactors, TuckerCore, Variant,
};
use tensorrec_core::synth::{synth_corpus, CorpusSpec};
use tensorrec_core::training::{
    bpr_gradient, bpr_pair_objective, init_params, mse_objective, sample_negatives, train_bpr, train_model,
    Lambdas, MseEntries, PreferencePair, RegScope, TrainConfig,
};
use tensorrec_core::{Error, Matrix};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
/// `(items, (user, item, interval) triples, excluded items)`
type SamplerCase = (usize, Vec<(usize, usize, usize)>, Vec<usize>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- fixtures

fn random_matrix(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(dim, count, |_, _| rng.random_range(-1.0..1.0))
}

fn vocab(prefix: &str, n: usize) -> Arc<Vocab> {
    Arc::new(Vocab::from_ids((0..n).map(|i| format!("{prefix}{i}"))).unwrap())
}

/// Random tensor dataset that covers every user, item and interval at least once.
fn random_dataset(p: usize, q: usize, r: usize, extra: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let mut triples: Vec<Triple> = (0..p.max(q).max(r)).map(|i| Triple::new(i % p, i % q, i % r)).collect();
    for _ in 0..extra {
        triples.push(Triple::new(
            rng.random_range(0..p),
            rng.random_range(0..q),
            rng.random_range(0..r),
        ));
    }
    Dataset::from_triples(vocab("u", p), vocab("i", q), r, triples).unwrap()
}

fn random_params(dims: Dims, rng: &mut ChaCha8Rng) -> DcfaParams {
    let mut params = DcfaParams::zeros(dims);
    for m in params.matrices_mut() {
        *m = random_matrix(m.dim(), m.count(), rng);
    }
    params
}

fn random_lambdas(rng: &mut ChaCha8Rng) -> Lambdas {
    let mut x = || rng.random_range(0.05..1.0);
    Lambdas {
        user_item: x(),
        time_item: x(),
        user: x(),
        item_user: x(),
        time: x(),
        item_time: x(),
        user_feature: x(),
        time_feature: x(),
    }
}

fn random_pairs(dims: Dims, count: usize, rng: &mut ChaCha8Rng) -> Vec<PreferencePair> {
    (0..count)
        .map(|_| {
            let pos = rng.random_range(0..dims.items);
            let mut neg = rng.random_range(0..dims.items);
            while neg == pos {
                neg = rng.random_range(0..dims.items);
            }
            PreferencePair::new(
                rng.random_range(0..dims.users),
                pos,
                neg,
                rng.random_range(0..dims.intervals),
            )
        })
        .collect()
}

/// Column-major copy as nested vectors: `rows[j][i]` is entry `(i, j)`.
fn cols(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.count()).map(|j| (0..m.dim()).map(|i| m.get(i, j)).collect()).collect()
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += a[k] * b[k];
    }
    s
}

fn sum_sq(m: &Matrix) -> f64 {
    let mut s = 0.0;
    for j in 0..m.count() {
        for i in 0..m.dim() {
            s += m.get(i, j) * m.get(i, j);
        }
    }
    s
}

fn ln_sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).ln()
}

// ---------------------------------------------------------------- 1

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let (step, rel_tol, abs_floor) = (1e-5, 1e-4, 1e-8);
    let mut checked = 0usize;
    let (mut worst_abs, mut worst_rel) = (0.0f64, 0.0f64);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (p, q, r) = (rng.random_range(2..=5), rng.random_range(3..=6), rng.random_range(2..=4));
        let dataset = random_dataset(p, q, r, 6, &mut rng);
        let features = FeatureMatrix::from_matrix(random_matrix(4, q, &mut rng)).unwrap();
        for with_features in [false, true] {
            let dims = Dims {
                users: p,
                items: q,
                intervals: r,
                k1: 3,
                k2: 3,
                k_features: if with_features { 4 } else { 0 },
            };
            let params = random_params(dims, &mut rng);
            let lambdas = random_lambdas(&mut rng);
            let pairs = random_pairs(dims, 6, &mut rng);
            let f = with_features.then_some(&features);
            let grad = bpr_gradient(&params, f, &dataset, &pairs, &lambdas, RegScope::Full)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let objective = |x: &DcfaParams| bpr_pair_objective(x, f, &dataset, &pairs, &lambdas).unwrap();

            let blocks = params.matrices().len();
            for b in 0..blocks {
                let len = params.matrices()[b].as_slice().len();
                for c in 0..len {
                    let mut plus = params.clone();
                    plus.matrices_mut()[b].as_mut_slice()[c] += step;
                    let mut minus = params.clone();
                    minus.matrices_mut()[b].as_mut_slice()[c] -= step;
                    let numeric = (objective(&plus) - objective(&minus)) / (2.0 * step);
                    let analytic = grad.matrices()[b].as_slice()[c];
                    let diff = (numeric - analytic).abs();
                    let scale = numeric.abs().max(analytic.abs());
                    checked += 1;
                    worst_abs = worst_abs.max(diff);
                    if scale > 0.0 {
                        worst_rel = worst_rel.max(diff / scale);
                    }
                    if diff > abs_floor {
                        ensure(diff / scale <= rel_tol, || {
                            format!(
                                "seed {seed} features={with_features} block {b} coord {c}: analytic {analytic:.10e} numeric {numeric:.10e}"
                            )
                        })?;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{checked} coordinates over 20 instances x {{dcf, dcfa}}, worst abs err {worst_abs:.2e}, worst rel err {worst_rel:.2e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 2

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{name}: got {got:.17e}, oracle {want:.17e}"))
}

fn oracle_suite() -> Outcome {
    let (p, q, r) = (4, 5, 3);
    let tol = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dims = Dims {
        users: p,
        items: q,
        intervals: r,
        k1: 3,
        k2: 2,
        k_features: 4,
    };
    let full = random_params(dims, &mut rng);
    let plain = DcfaParams { m: None, n: None, ..full.clone() };
    let fm = random_matrix(4, q, &mut rng);
    let features = FeatureMatrix::from_matrix(fm.clone()).unwrap();

    let (u, v, t, w) = (cols(&full.u), cols(&full.v), cols(&full.t), cols(&full.w));
    let (m, n, fc) = (cols(full.m.as_ref().unwrap()), cols(full.n.as_ref().unwrap()), cols(&fm));

    let cp = CpFactors {
        u: random_matrix(3, p, &mut rng),
        v: random_matrix(3, q, &mut rng),
        t: random_matrix(3, r, &mut rng),
    };
    let pitf = PitfFactors {
        user_item: random_matrix(3, p, &mut rng),
        item_user: random_matrix(3, q, &mut rng),
        user_time: random_matrix(3, p, &mut rng),
        time_user: random_matrix(3, r, &mut rng),
        item_time: random_matrix(3, q, &mut rng),
        time_item: random_matrix(3, r, &mut rng),
    };
    let shape = [2, 3, 4];
    let core_values: Vec<f64> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (tu, tv, tt) = (
        random_matrix(2, p, &mut rng),
        random_matrix(3, q, &mut rng),
        random_matrix(4, r, &mut rng),
    );
    let tucker = Baseline::Tucker {
        core: TuckerCore {
            shape,
            values: core_values.clone(),
        },
        u: tu.clone(),
        v: tv.clone(),
        t: tt.clone(),
    };
    let (mu, mv, mm) = (
        random_matrix(3, p, &mut rng),
        random_matrix(3, q, &mut rng),
        random_matrix(4, p, &mut rng),
    );
    let mf = Baseline::Mf { u: mu.clone(), v: mv.clone() };
    let vbpr = Baseline::Vbpr {
        u: mu.clone(),
        v: mv.clone(),
        m: mm.clone(),
    };

    let mut checks = 0usize;
    for pi in 0..p {
        for qi in 0..q {
            for ri in 0..r {
                let b_plain = inner(&u[pi], &v[qi]);
                let c_plain = inner(&t[ri], &w[qi]);
                let b_feat = b_plain + inner(&m[pi], &fc[qi]);
                let c_feat = c_plain + inner(&n[ri], &fc[qi]);
                let at = format!("({pi},{qi},{ri})");
                let e = |x: tensorrec_core::Error| format!("{at}: {x}");

                close(&format!("dcf {at}"), predict_dcf(&plain, pi, qi, ri).map_err(e)?, b_plain * c_plain, tol)?;
                close(
                    &format!("dcfa {at}"),
                    predict_dcfa(&full, &features, pi, qi, ri).map_err(e)?,
                    b_feat * c_feat,
                    tol,
                )?;
                close(&format!("b {at}"), predict_b(&plain, None, pi, qi).map_err(e)?, b_plain, tol)?;
                close(&format!("b+f {at}"), predict_b(&full, Some(&features), pi, qi).map_err(e)?, b_feat, tol)?;
                close(&format!("c {at}"), predict_c(&plain, None, ri, qi).map_err(e)?, c_plain, tol)?;
                close(&format!("c+f {at}"), predict_c(&full, Some(&features), ri, qi).map_err(e)?, c_feat, tol)?;

                let mut cp_want = 0.0;
                for k in 0..3 {
                    cp_want += cp.u.get(k, pi) * cp.v.get(k, qi) * cp.t.get(k, ri);
                }
                let cp_model = Baseline::Cp(cp.clone());
                close(&format!("cp {at}"), predict_baseline(&cp_model, None, pi, qi, ri).map_err(e)?, cp_want, tol)?;

                let mut pitf_want = 0.0;
                for k in 0..3 {
                    pitf_want += pitf.user_item.get(k, pi) * pitf.item_user.get(k, qi)
                        + pitf.user_time.get(k, pi) * pitf.time_user.get(k, ri)
                        + pitf.item_time.get(k, qi) * pitf.time_item.get(k, ri);
                }
                let pitf_model = Baseline::Pitf(pitf.clone());
                close(
                    &format!("pitf {at}"),
                    predict_baseline(&pitf_model, None, pi, qi, ri).map_err(e)?,
                    pitf_want,
                    tol,
                )?;

                let mut tucker_want = 0.0;
                for a in 0..shape[0] {
                    for b in 0..shape[1] {
                        for c in 0..shape[2] {
                            let g = core_values[a * shape[1] * shape[2] + b * shape[2] + c];
                            tucker_want += g * tu.get(a, pi) * tv.get(b, qi) * tt.get(c, ri);
                        }
                    }
                }
                close(
                    &format!("tucker {at}"),
                    predict_baseline(&tucker, None, pi, qi, ri).map_err(e)?,
                    tucker_want,
                    tol,
                )?;

                let mut mf_want = 0.0;
                for k in 0..3 {
                    mf_want += mu.get(k, pi) * mv.get(k, qi);
                }
                close(&format!("mf {at}"), predict_baseline(&mf, None, pi, qi, ri).map_err(e)?, mf_want, tol)?;
                let mut vbpr_want = mf_want;
                for k in 0..4 {
                    vbpr_want += mm.get(k, pi) * fm.get(k, qi);
                }
                close(
                    &format!("vbpr {at}"),
                    predict_baseline(&vbpr, Some(&features), pi, qi, ri).map_err(e)?,
                    vbpr_want,
                    tol,
                )?;
                checks += 11;
            }
        }
    }
    Ok(format!("{checks} predictions on the 4x5x3 grid within {tol:e}"))
}

// ---------------------------------------------------------------- 3

fn naive_bpr_objective(
    params: &DcfaParams,
    features: Option<&FeatureMatrix>,
    pairs: &[PreferencePair],
    l: &Lambdas,
) -> f64 {
    let s1 = |p: usize, q: usize| {
        let mut s = 0.0;
        for k in 0..params.u.dim() {
            s += params.u.get(k, p) * params.v.get(k, q);
        }
        if let (Some(m), Some(f)) = (&params.m, features) {
            for k in 0..m.dim() {
                s += m.get(k, p) * f.matrix().get(k, q);
            }
        }
        s
    };
    let s2 = |r: usize, q: usize| {
        let mut s = 0.0;
        for k in 0..params.t.dim() {
            s += params.t.get(k, r) * params.w.get(k, q);
        }
        if let (Some(n), Some(f)) = (&params.n, features) {
            for k in 0..n.dim() {
                s += n.get(k, r) * f.matrix().get(k, q);
            }
        }
        s
    };
    let mut total = 0.0;
    for pair in pairs {
        let (p, q, qn, r) = (pair.user, pair.pos, pair.neg, pair.interval);
        total += ln_sigmoid(s1(p, q) * s2(r, q) - s1(p, qn) * s2(r, qn));
        total += l.user_item * ln_sigmoid(s1(p, q) - s1(p, qn));
        total += l.time_item * ln_sigmoid(s2(r, q) - s2(r, qn));
    }
    let mut reg = l.user * sum_sq(&params.u)
        + l.item_user * sum_sq(&params.v)
        + l.time * sum_sq(&params.t)
        + l.item_time * sum_sq(&params.w);
    if let Some(m) = &params.m {
        reg += l.user_feature * sum_sq(m);
    }
    if let Some(n) = &params.n {
        reg += l.time_feature * sum_sq(n);
    }
    total - reg / 2.0
}

fn naive_mse_objective(cp: &CpFactors, dataset: &Dataset, l: &Lambdas) -> f64 {
    let (p, q, r) = (dataset.num_users(), dataset.num_items(), dataset.num_intervals());
    let positives: Vec<(usize, usize, usize)> =
        dataset.positives().iter().map(|t| (t.user, t.item, t.interval)).collect();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for pi in 0..p {
        for qi in 0..q {
            let bought = positives.iter().any(|&(x, y, _)| x == pi && y == qi);
            let mut s = 0.0;
            for k in 0..cp.u.dim() {
                s += cp.u.get(k, pi) * cp.v.get(k, qi);
            }
            b += (f64::from(u8::from(bought)) - s).powi(2);
            for ri in 0..r {
                let hit = positives.contains(&(pi, qi, ri));
                let mut s = 0.0;
                for k in 0..cp.u.dim() {
                    s += cp.u.get(k, pi) * cp.v.get(k, qi) * cp.t.get(k, ri);
                }
                a += (f64::from(u8::from(hit)) - s).powi(2);
            }
        }
    }
    for ri in 0..r {
        for qi in 0..q {
            let active = positives.iter().any(|&(_, y, z)| y == qi && z == ri);
            let mut s = 0.0;
            for k in 0..cp.t.dim() {
                s += cp.t.get(k, ri) * cp.v.get(k, qi);
            }
            c += (f64::from(u8::from(active)) - s).powi(2);
        }
    }
    a / 2.0
        + l.user_item * b / 2.0
        + l.time_item * c / 2.0
        + l.user * sum_sq(&cp.u) / 2.0
        + l.item_user * sum_sq(&cp.v) / 2.0
        + l.time * sum_sq(&cp.t) / 2.0
}

fn objective_oracle() -> Outcome {
    let tol = 1e-10;
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (p, q, r) = (rng.random_range(2..=4), rng.random_range(3..=5), rng.random_range(2..=3));
        let dataset = random_dataset(p, q, r, 5, &mut rng);
        let features = FeatureMatrix::from_matrix(random_matrix(3, q, &mut rng)).unwrap();
        let lambdas = random_lambdas(&mut rng);
        for with_features in [false, true] {
            let dims = Dims {
                users: p,
                items: q,
                intervals: r,
                k1: 2,
                k2: 3,
                k_features: if with_features { 3 } else { 0 },
            };
            let params = random_params(dims, &mut rng);
            let pairs = random_pairs(dims, 5, &mut rng);
            let f = with_features.then_some(&features);
            let got = bpr_pair_objective(&params, f, &dataset, &pairs, &lambdas).map_err(|e| e.to_string())?;
            let want = naive_bpr_objective(&params, f, &pairs, &lambdas);
            worst = worst.max((got - want).abs());
            close(&format!("bpr seed {seed} features={with_features}"), got, want, tol)?;
        }
        let cp = CpFactors {
            u: random_matrix(2, p, &mut rng),
            v: random_matrix(2, q, &mut rng),
            t: random_matrix(2, r, &mut rng),
        };
        let entries = MseEntries::dense(&dataset).map_err(|e| e.to_string())?;
        let got = mse_objective(&cp, &entries, &lambdas);
        let want = naive_mse_objective(&cp, &dataset, &lambdas);
        worst = worst.max((got - want).abs());
        close(&format!("mse seed {seed}"), got, want, tol)?;
    }
    Ok(format!("10 instances, max abs diff {worst:.2e}"))
}

// ---------------------------------------------------------------- 4

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn metric_oracle() -> Outcome {
    let perms = permutations(&[0, 1, 2, 3, 4]);
    ensure(perms.len() == 120, || format!("{} permutations", perms.len()))?;
    let mut cases = 0usize;
    for ranked in &perms {
        for mask in 1u32..32 {
            let relevant: Vec<usize> = (0..5).filter(|i| mask & (1 << i) != 0).collect();
            for n in 1..=5usize {
                let mut hits = 0usize;
                let mut dcg = 0.0;
                for (pos, item) in ranked.iter().enumerate().take(n) {
                    if relevant.contains(item) {
                        hits += 1;
                        dcg += 1.0 / ((pos + 2) as f64).log2();
                    }
                }
                let mut idcg = 0.0;
                for pos in 0..n.min(relevant.len()) {
                    idcg += 1.0 / ((pos + 2) as f64).log2();
                }
                let recall = recall_at_n(ranked, &relevant, n).map_err(|e| e.to_string())?;
                let ndcg = ndcg_at_n(ranked, &relevant, n).map_err(|e| e.to_string())?;
                let want_recall = hits as f64 / relevant.len() as f64;
                ensure(recall == want_recall, || {
                    format!("recall {ranked:?} {relevant:?} n={n}: {recall} vs {want_recall}")
                })?;
                close(&format!("ndcg {ranked:?} {relevant:?} n={n}"), ndcg, dcg / idcg, 1e-12)?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (permutation, subset, n) cases"))
}

// ---------------------------------------------------------------- 5

const PERSONALIZED: [Variant; 7] = [
    Variant::Mf,
    Variant::Vbpr,
    Variant::Cp,
    Variant::Pitf,
    Variant::Cmtf,
    Variant::Dcf,
    Variant::Dcfa,
];

struct SeedResult {
    recall: Vec<(Variant, f64)>,
}

impl SeedResult {
    fn get(&self, v: Variant) -> f64 {
        self.recall.iter().find(|(x, _)| *x == v).unwrap().1
    }
}

fn directional_seed(seed: u64) -> Result<SeedResult, String> {
    let err = |e: Error| format!("seed {seed}: {e}");
    let spec = CorpusSpec::default();
    let corpus = synth_corpus(&spec, seed).map_err(err)?;
    let grid = build_time_grid(&corpus.interactions, spec.interval_seconds).map_err(err)?;
    let dataset = build_dataset(&corpus.interactions, &grid).map_err(err)?;
    let split = split_dataset(&dataset, SplitRatios::default(), seed).map_err(err)?;
    let columns: Vec<Vec<f64>> = cols(corpus.features.matrix());
    let records = corpus.item_ids.iter().map(String::as_str).zip(columns.iter().map(Vec::as_slice));
    let features = FeatureMatrix::from_records(spec.feature_dim, records, split.train.items()).map_err(err)?;
    let features = normalize_features(&features, Normalization::UnitL2Column);

    let config = TrainConfig {
        seed,
        iter_max: 200,
        ..TrainConfig::synthetic()
    };
    let protocol = EvalProtocol::default();
    let mut recall = Vec::new();
    for variant in std::iter::once(Variant::Mp).chain(PERSONALIZED) {
        let f = variant.uses_features().then_some(&features);
        let (model, _) = train_model(variant, &split.train, f, &config, None, &|| 0.0).map_err(err)?;
        let scorer = model.scorer(f).map_err(err)?;
        let report = evaluate_model(&scorer, &split.train, &split.test, &[10], &protocol).map_err(err)?;
        recall.push((variant, report.recall[0]));
    }
    Ok(SeedResult { recall })
}

fn directional_reproduction() -> Outcome {
    let start = Instant::now();
    let mut passing = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let res = directional_seed(seed)?;
        let mp = res.get(Variant::Mp);
        let losers: Vec<&str> =
            PERSONALIZED.iter().filter(|&&v| res.get(v) <= mp).map(|v| v.name()).collect();
        let ratio = res.get(Variant::Dcfa) / res.get(Variant::Dcf);
        let ok = losers.is_empty() && ratio >= 1.05;
        passing += usize::from(ok);
        let table: Vec<String> = res.recall.iter().map(|(v, x)| format!("{v}={x:.4}")).collect();
        lines.push(format!(
            "    seed {seed}: {} dcfa/dcf={ratio:.3}{}",
            table.join(" "),
            if losers.is_empty() { String::new() } else { format!(" not above mp: {}", losers.join(",")) }
        ));
    }
    let elapsed = start.elapsed();
    let detail = lines.join("\n");
    ensure(passing >= 4, || format!("{passing}/5 seeds hold both orderings\n{detail}"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}\n{detail}"))?;
    Ok(format!(
        "{passing}/5 seeds hold both orderings, {:.1}s\n{detail}",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 6

fn frequencies(dataset: &Dataset, user: usize, interval: usize, seed: u64) -> Result<Vec<f64>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = sample_negatives(dataset, user, interval, 10_000, &mut rng).map_err(|e| e.to_string())?;
    let mut counts = vec![0usize; dataset.num_items()];
    for q in draws {
        counts[q] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / 10_000.0).collect())
}

fn sampler_frequency() -> Outcome {
    let mut worst = 0.0f64;
    let cases: [SamplerCase; 2] = [
        (4, vec![(0, 0, 0)], vec![0]),
        (10, vec![(0, 1, 0), (1, 2, 0)], vec![1, 2]),
    ];
    for (case, (items, triples, excluded)) in cases.iter().enumerate() {
        let dataset = Dataset::from_triples(
            vocab("u", 2),
            vocab("i", *items),
            1,
            triples.iter().map(|&(p, q, r)| Triple::new(p, q, r)),
        )
        .map_err(|e| e.to_string())?;
        let freq = frequencies(&dataset, 0, 0, 40 + case as u64)?;
        let expected = 1.0 / (items - excluded.len()) as f64;
        for (q, &f) in freq.iter().enumerate() {
            let want = if excluded.contains(&q) { 0.0 } else { expected };
            worst = worst.max((f - want).abs());
            ensure((f - want).abs() <= 0.02, || format!("case {case} item {q}: {f} vs {want}"))?;
        }
    }
    Ok(format!("2 exclusion patterns x 10000 draws, max deviation {worst:.4}"))
}

// ---------------------------------------------------------------- 7

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tensorrec"))
        .args(args)
        .output()
        .map_err(|e| format!("spawn: {e}"))?;
    ensure(out.status.success(), || {
        format!("tensorrec {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn pipeline(dir: &std::path::Path) -> Result<Vec<u8>, String> {
    let data = dir.join("data");
    let d = data.to_str().unwrap();
    let conf = data.join("run.conf");
    let conf = conf.to_str().unwrap();
    run_cli(&["synth", "--seed", "3", "--out", d])?;
    let mut checkpoints = Vec::new();
    for variant in ["mp", "dcf", "dcfa"] {
        let ckpt = dir.join(format!("{variant}.model"));
        let c = ckpt.to_str().unwrap().to_owned();
        run_cli(&["train", "--config", conf, "--variant", variant, "--iter-max", "5", "--out", &c])?;
        checkpoints.push(c);
    }
    let metrics = dir.join("metrics.tsv");
    let mut args = vec!["eval", "--config", conf, "--out", metrics.to_str().unwrap()];
    for c in &checkpoints {
        args.push("--checkpoint");
        args.push(c);
    }
    run_cli(&args)?;
    std::fs::read(&metrics).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    ensure(!first.is_empty(), || "empty metrics file".into())?;
    ensure(first == second, || {
        format!(
            "metrics differ:\n{}\n---\n{}",
            String::from_utf8_lossy(&first),
            String::from_utf8_lossy(&second)
        )
    })?;
    let rows = first.iter().filter(|&&c| c == b'\n').count() - 1;
    Ok(format!("synth -> train mp,dcf,dcfa -> eval twice, {} byte TSV with {rows} rows identical", first.len()))
}

// ---------------------------------------------------------------- 8

fn interactions(edges: &[(&str, &str)]) -> Vec<Interaction> {
    edges
        .iter()
        .enumerate()
        .map(|(i, (u, q))| Interaction::new(*u, *q, 1_300_000_000 + i as i64).unwrap())
        .collect()
}

fn degenerate_inputs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dataset = random_dataset(4, 6, 3, 10, &mut rng);
    let features = FeatureMatrix::from_matrix(random_matrix(3, 6, &mut rng)).unwrap();

    // iter_max = 0 returns the initialization, with and without features
    let config = TrainConfig {
        k1: 3,
        k2: 2,
        iter_max: 0,
        seed: 21,
        ..TrainConfig::default()
    };
    for f in [None, Some(&features)] {
        let (params, trace) = train_bpr(&dataset, f, &config, None).map_err(|e| e.to_string())?;
        let dims = Dims {
            users: 4,
            items: 6,
            intervals: 3,
            k1: 3,
            k2: 2,
            k_features: f.map_or(0, FeatureMatrix::dim),
        };
        ensure(params == init_params(&config, dims, 21), || "iter_max=0 changed the parameters".into())?;
        ensure(trace.records.is_empty(), || format!("{} trace records", trace.records.len()))?;
    }

    // k-core fixed points
    let log = interactions(&[("u1", "i1"), ("u1", "i2"), ("u2", "i1"), ("u3", "i3")]);
    ensure(kcore_filter(&log, 1) == log, || "k=1 is not a no-op".into())?;
    let three = interactions(&[("u1", "i1"), ("u1", "i2"), ("u2", "i1")]);
    let got = kcore_filter(&three, 2);
    ensure(got.is_empty(), || format!("3-edge case kept {} records", got.len()))?;
    let square = interactions(&[("u1", "i1"), ("u1", "i2"), ("u2", "i1"), ("u2", "i2")]);
    ensure(kcore_filter(&square, 2) == square, || "2x2 complete set lost records".into())?;

    // empty holdout
    let scorer = FnScorer {
        num_items: 6,
        score: |_, q, _| q as f64,
    };
    let empty: [Holdout; 0] = [];
    let report =
        evaluate_model(&scorer, &dataset, &empty, &[5, 10], &EvalProtocol::default()).map_err(|e| e.to_string())?;
    ensure(report.users_evaluated == 0, || format!("{} users evaluated", report.users_evaluated))?;
    ensure(report.recall.iter().chain(&report.ndcg).all(|&x| x == 0.0), || format!("{report:?}"))?;

    // NoNegativesAvailable from the sampler and from training
    let full = Dataset::from_triples(
        vocab("u", 2),
        vocab("i", 3),
        1,
        [Triple::new(0, 0, 0), Triple::new(0, 1, 0), Triple::new(1, 2, 0)],
    )
    .map_err(|e| e.to_string())?;
    let sampled = sample_negatives(&full, 0, 0, 1, &mut rng);
    ensure(matches!(sampled, Err(Error::NoNegativesAvailable { user: 0, interval: 0 })), || {
        format!("sampler returned {sampled:?}")
    })?;
    let config = TrainConfig {
        k1: 2,
        k2: 2,
        iter_max: 3,
        ..TrainConfig::default()
    };
    let trained = train_bpr(&full, None, &config, None);
    ensure(matches!(trained, Err(Error::NoNegativesAvailable { .. })), || {
        format!("training returned {:?}", trained.map(|_| ()))
    })?;

    Ok("iter_max=0 identity, 3 k-core cases, empty holdout, NoNegativesAvailable".into())
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("gradient suite", gradient_suite),
        ("predictor oracles", oracle_suite),
        ("objective oracles", objective_oracle),
        ("metric oracles", metric_oracle),
        ("directional synthetic reproduction", directional_reproduction),
        ("negative sampler frequencies", sampler_frequency),
        ("pipeline determinism", determinism),
        ("degenerate inputs", degenerate_inputs),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
