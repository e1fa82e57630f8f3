//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Pass a criterion number (e.g. `cargo test --test acceptance -- 4`) to run a subset.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ventcast::building_sim::{
    run_scenario, scenario_inputs, ventilation_flow, zone_derivative, BuildingSpec, Calendar, HolidayCalendar,
    ScenarioConfig, SimulationOptions, VentilationParams, ZoneInputs, ZoneState,
};
use ventcast::building_sim::signals::{generate_prbs_windows, PULSE_STEPS};
use ventcast::evaluation::{forecast_windows, interval_coverage, per_horizon_cvrmse, ForecastSet};
use ventcast::layers::{lstm_cell_step, BiLstm, Dense, Glu, Grn, LayerNorm, LstmState, LstmWeights, MultiHeadAttention};
use ventcast::model::{build_model, ModelConfig};
use ventcast::numerics::{gradient_check, gradient_check_sampled, GradCheckReport, Graph, ParamSet, Tensor, Var};
use ventcast::pipeline::{
    build_windows, encode_time_features, prepare, split_chronological, window_count, FeatureTable, PipelineConfig,
    ScalerSpec,
};
use ventcast::training::{fit, pinball_loss, total_quantile_loss, TrainConfig, TrainReport};
use ventcast::Result;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn ok<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `sum(out * w)` for a fixed random `w`, so every output element matters.
fn project(g: &mut Graph, out: Var, w: &Tensor) -> Result<Var> {
    let wv = g.input(w.clone());
    let m = g.mul(out, wv)?;
    Ok(g.sum(m))
}

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn check_layer<F>(name: &str, ps: &ParamSet, f: F, worst: &mut (f64, String)) -> std::result::Result<(), String>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let r: GradCheckReport = ok(gradient_check(ps, f, STEP, TOL))?;
    if r.max_rel_err > worst.0 {
        *worst = (r.max_rel_err, format!("{name} {}", r.worst));
    }
    ensure!(r.pass, "{name}: max relative error {:.2e} at {}", r.max_rel_err, r.worst);
    Ok(())
}

fn criterion_1() -> Outcome {
    let mut worst = (0.0, String::new());
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&mut rng, &[5, 3]);

        let mut ps = ParamSet::new();
        let dense = ok(Dense::new(&mut ps, "dense", 3, 4, &mut rng))?;
        let w = random(&mut rng, &[5, 4]);
        check_layer("dense", &ps, |g| { let xv = g.input(x.clone()); let y = dense.forward(g, xv)?; project(g, y, &w) }, &mut worst)?;

        let mut ps = ParamSet::new();
        let cell = ok(LstmWeights::new(&mut ps, "cell", 3, 4, &mut rng))?;
        let (h0, c0) = (random(&mut rng, &[1, 4]), random(&mut rng, &[1, 4]));
        let (wh, wc) = (random(&mut rng, &[1, 4]), random(&mut rng, &[1, 4]));
        check_layer(
            "lstm cell",
            &ps,
            |g| {
                let mut s = LstmState { h: g.input(h0.clone()), c: g.input(c0.clone()) };
                for t in 0..3 {
                    let xt = g.input(Tensor::new(&[1, 3], x.row(t).to_vec())?);
                    s = lstm_cell_step(g, xt, s, &cell)?;
                }
                let a = project(g, s.h, &wh)?;
                let b = project(g, s.c, &wc)?;
                Ok(g.add(a, b)?)
            },
            &mut worst,
        )?;

        let mut ps = ParamSet::new();
        let bi = ok(BiLstm::new(&mut ps, "bilstm", 3, 3, &mut rng))?;
        let w = random(&mut rng, &[5, 6]);
        check_layer("bilstm", &ps, |g| { let xv = g.input(x.clone()); let y = bi.forward(g, xv)?; project(g, y, &w) }, &mut worst)?;

        let mut ps = ParamSet::new();
        let mha = ok(MultiHeadAttention::new(&mut ps, "mha", 4, 2, &mut rng))?;
        let (q, kv, w) = (random(&mut rng, &[3, 4]), random(&mut rng, &[5, 4]), random(&mut rng, &[3, 4]));
        check_layer(
            "mha",
            &ps,
            |g| {
                let (qv, kvv) = (g.input(q.clone()), g.input(kv.clone()));
                let y = mha.forward(g, qv, kvv)?.output;
                project(g, y, &w)
            },
            &mut worst,
        )?;

        let mut ps = ParamSet::new();
        let glu = ok(Glu::new(&mut ps, "glu", 3, 4, &mut rng))?;
        let w = random(&mut rng, &[5, 4]);
        check_layer("glu", &ps, |g| { let xv = g.input(x.clone()); let y = glu.forward(g, xv)?; project(g, y, &w) }, &mut worst)?;

        let mut ps = ParamSet::new();
        let grn = ok(Grn::new(&mut ps, "grn", 3, &mut rng))?;
        let (skip, w) = (random(&mut rng, &[5, 3]), random(&mut rng, &[5, 3]));
        check_layer(
            "grn",
            &ps,
            |g| {
                let (sv, xv) = (g.input(skip.clone()), g.input(x.clone()));
                let y = grn.gated_residual(g, sv, xv)?;
                project(g, y, &w)
            },
            &mut worst,
        )?;

        let mut ps = ParamSet::new();
        let ln = ok(LayerNorm::new(&mut ps, "ln", 3))?;
        // Move gain and bias off their 1 / 0 initial values.
        for p in ps.iter_mut() {
            for v in p.value.data_mut() {
                *v += rng.random_range(-0.5..0.5);
            }
        }
        let w = random(&mut rng, &[5, 3]);
        check_layer("layer norm", &ps, |g| { let xv = g.input(x.clone()); let y = ln.forward(g, xv)?; project(g, y, &w) }, &mut worst)?;

        let mut ps = ParamSet::new();
        let head = ok(Dense::new(&mut ps, "head", 3, 5 * 3, &mut rng))?;
        let target = random(&mut rng, &[5, 5]);
        let levels = [0.05, 0.5, 0.95];
        check_layer(
            "quantile head",
            &ps,
            |g| {
                let xv = g.input(x.clone());
                let y = head.forward(g, xv)?;
                let y = g.reshape(y, &[5, 5, 3])?;
                Ok(g.pinball(y, &target, &levels)?)
            },
            &mut worst,
        )?;

        let cfg = ModelConfig {
            n_past: 8,
            n_future: 4,
            d_model: 8,
            rnn_units: 4,
            mha_heads: 2,
            rng_seed: seed,
            ..ModelConfig::tiny()
        };
        let model = ok(build_model(&cfg))?;
        let (p, f, t) = (random(&mut rng, &[8, 36]), random(&mut rng, &[4, 21]), random(&mut rng, &[4, 5]));
        let r = ok(gradient_check_sampled(
            &model.params,
            |g| model.loss(g, &p, &f, &t, true, &mut ChaCha8Rng::seed_from_u64(seed)),
            STEP,
            TOL,
            6,
            seed,
        ))?;
        if r.max_rel_err > worst.0 {
            worst = (r.max_rel_err, format!("model {}", r.worst));
        }
        ensure!(r.pass, "tiny model seed {seed}: max relative error {:.2e} at {}", r.max_rel_err, r.worst);
    }
    Ok(format!("10 seeds, 9 checks each, worst relative error {:.2e} ({})", worst.0, worst.1))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut detail = Vec::new();
    for cfg in [ModelConfig::full(), ModelConfig::tiny()] {
        let model = ok(build_model(&cfg))?;
        let past = random(&mut rng, &[cfg.n_past, 36]);
        let future = random(&mut rng, &[cfg.n_future, 21]);
        let mut g = Graph::with_params(&model.params);
        let out = ok(model.forward(&mut g, &past, &future, false, &mut rng))?;
        let shape = g.value(out.prediction).shape().to_vec();
        ensure!(shape == [cfg.n_future, 5, 7], "output shape {shape:?} for n_future {}", cfg.n_future);
        for w in &out.cross_attention {
            let w = g.value(*w);
            ensure!(w.shape() == [cfg.n_future, cfg.n_past], "cross-attention shape {:?}", w.shape());
            for r in 0..cfg.n_future {
                let s: f64 = w.row(r).iter().sum();
                ensure!((s - 1.0).abs() < 1e-10, "cross-attention row sums to {s}");
            }
        }
        detail.push(format!("{}x36 + {}x21 -> {:?}", cfg.n_past, cfg.n_future, shape));
    }
    Ok(detail.join("; "))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..1000).map(|_| rng.random_range(-10.0..10.0)).collect();
    let p: Vec<f64> = (0..1000).map(|_| rng.random_range(-10.0..10.0)).collect();
    let mae = y.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum::<f64>() / 1000.0;
    let total = ok(total_quantile_loss(&Tensor::new(&[1000], y).unwrap(), &Tensor::new(&[1000, 1], p).unwrap(), &[0.5]))?;
    let gap = (total - 0.5 * mae).abs();
    ensure!(gap < 1e-12, "median loss differs from half the MAE by {gap:e}");
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (y, a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let (lam, q) = (rng.random_range(0.0..=1.0), rng.random_range(0.001..0.999));
        let mix = ok(pinball_loss(&[y], &[lam * a + (1.0 - lam) * b], q))?;
        let bound = lam * ok(pinball_loss(&[y], &[a], q))? + (1.0 - lam) * ok(pinball_loss(&[y], &[b], q))?;
        worst = worst.max(mix - bound);
        ensure!(mix <= bound + 1e-12, "convexity violated by {:e}", mix - bound);
    }
    Ok(format!("|loss - MAE/2| = {gap:.1e}; 1000 convexity triples, max excess {worst:.1e}"))
}

struct DeskRun {
    report: TrainReport,
    test: ForecastSet,
    seconds: f64,
}

fn desk_run() -> &'static std::result::Result<DeskRun, String> {
    static RUN: OnceLock<std::result::Result<DeskRun, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let (dataset, _) = ok(run_scenario(&ScenarioConfig { days: 60, ..Default::default() }, 7))?;
        let cfg = ModelConfig { rng_seed: 7, ..ModelConfig::tiny() };
        let splits = ok(prepare(&dataset, &ScalerSpec::standard(), cfg.n_past, cfg.n_future, &PipelineConfig::default(), 7))?;
        let mut model = ok(build_model(&cfg))?;
        let train = TrainConfig {
            batch_size: 32,
            learning_rate: 3e-3,
            max_epochs: 30,
            max_batches_per_epoch: Some(40),
            patience: 10,
            seed: 7,
            ..TrainConfig::default()
        };
        let report = ok(fit(&mut model, &splits.train, &splits.validation, &train, |_, _, _| Ok(())))?;
        let ids: Vec<usize> = (0..splits.test.len()).collect();
        let test = ok(forecast_windows(&model, &splits.test, &ids))?;
        Ok(DeskRun { report, test, seconds: start.elapsed().as_secs_f64() })
    })
}

fn criterion_4() -> Outcome {
    let run = desk_run().as_ref()?;
    let r = &run.report;
    let initial = r.initial_val_loss();
    let best = r.epochs.iter().filter(|e| (1..=30).contains(&e.epoch)).map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    let reduction = 1.0 - best / initial;
    let h = ok(per_horizon_cvrmse(&run.test))?;
    let mean_actual =
        run.test.instances.iter().map(|i| i.actual.sum()).sum::<f64>() / (run.test.instances.len() * 12 * 5) as f64;
    ensure!(reduction >= 0.4, "validation loss fell only {:.1}% ({initial:.4} -> {best:.4})", 100.0 * reduction);
    ensure!(h.overall < 5.0, "test CVRMSE {:.2}% is not below 5%", h.overall);
    ensure!(run.seconds < 900.0, "took {:.0} s", run.seconds);
    Ok(format!(
        "val loss {initial:.4} -> {best:.4} ({:.1}% lower, best epoch {}), test median CVRMSE {:.2}% on mean {mean_actual:.1} °C, {:.0} s",
        100.0 * reduction,
        r.best_epoch,
        h.overall,
        run.seconds
    ))
}

fn criterion_5() -> Outcome {
    let run = desk_run().as_ref()?;
    let c = ok(interval_coverage(&run.test, &[0.9, 0.95, 0.99]))?;
    let c90 = c.rows[0].coverage;
    ensure!((0.75..=0.99).contains(&c90), "90% interval coverage {:.3} outside [0.75, 0.99]", c90);
    Ok(format!(
        "coverage 90% {:.3}, 95% {:.3}, 99% {:.3}; quantile crossing frequency {:.3} over {} triples",
        c90, c.rows[1].coverage, c.rows[2].coverage, c.crossing_freq, c.triples
    ))
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_ventcast")
}

/// generate -> train -> predict -> evaluate in `dir` with one seed.
fn run_chain(dir: &Path) -> std::result::Result<PathBuf, String> {
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let common = [
        "--profile", "tiny", "--seed", "11",
        "--set", "simulator.days=21",
        "--set", "model.n_future=96",
        "--set", "pipeline.stride=4",
        "--set", "training.max_epochs=2",
        "--set", "training.max_batches_per_epoch=4",
    ];
    let steps: [&[&str]; 4] = [
        &["generate", "--out", "data.csv"],
        &["train", "--dataset", "data.csv", "--out", "model.hvf"],
        &["predict", "--checkpoint", "model.hvf", "--dataset", "data.csv", "--select", "all-test", "--out", "forecasts.csv"],
        &["evaluate", "--forecasts", "forecasts.csv", "--out", "metrics"],
    ];
    for step in steps {
        let out = Command::new(binary())
            .current_dir(dir)
            .args(step)
            .args(common)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "`{}` failed: {}", step[0], String::from_utf8_lossy(&out.stderr));
    }
    Ok(dir.join("metrics"))
}

fn chain_dirs() -> &'static (tempfile::TempDir, std::result::Result<PathBuf, String>) {
    static FIRST: OnceLock<(tempfile::TempDir, std::result::Result<PathBuf, String>)> = OnceLock::new();
    FIRST.get_or_init(|| {
        let dir = tempfile::tempdir().expect("temp dir");
        let r = run_chain(&dir.path().join("run1"));
        (dir, r)
    })
}

fn criterion_6() -> Outcome {
    let metrics = chain_dirs().1.as_ref()?;
    let text = fs::read_to_string(metrics.join("horizon_cvrmse.csv")).map_err(|e| e.to_string())?;
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let mut per_zone = std::collections::BTreeMap::<String, Vec<usize>>::new();
    for rec in rows.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        per_zone.entry(rec[0].to_string()).or_default().push(rec[1].parse().map_err(|_| "bad step".to_string())?);
    }
    for z in 1..=5 {
        let steps = per_zone.get(&z.to_string()).ok_or(format!("zone {z} missing"))?;
        ensure!(*steps == (1..=96).collect::<Vec<_>>(), "zone {z} has steps {:?}..", &steps[..steps.len().min(3)]);
    }
    let summary = fs::read_to_string(metrics.join("summary.csv")).map_err(|e| e.to_string())?;
    let pick = |key: &str| {
        summary.lines().find_map(|l| l.strip_prefix(&format!("{key},"))).unwrap_or("n/a").to_string()
    };
    Ok(format!(
        "96 rows for each of 5 zones (plus mean); plateau observation: mean CVRMSE steps 1-24 {}%, steps 25-96 {}%, range after step 24 {}% (reported, not asserted)",
        pick("mean_cvrmse_pct_steps_1_24"),
        pick("mean_cvrmse_pct_steps_25_96"),
        pick("cvrmse_range_pct_after_step_24")
    ))
}

fn criterion_7() -> Outcome {
    let spec = BuildingSpec::default();
    let zones = spec.zones();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..100 {
        let zone = &zones[i % 4];
        let t_in = rng.random_range(12.0..35.0);
        let nb = [(50.0, rng.random_range(12.0..35.0))];
        let closed = ZoneInputs {
            step: i,
            t_out: t_in - rng.random_range(0.1..30.0),
            wind: rng.random_range(0.0..10.0),
            irradiance: rng.random_range(0.0..500.0),
            occupants: rng.random_range(0.0..8.0),
            equipment_w: rng.random_range(0.0..1000.0),
            lights_on: rng.random_bool(0.5),
            window_open: false,
            heat_sp: 15.0,
            cool_sp: 30.0,
            neighbors: &nb,
        };
        let open = ZoneInputs { window_open: true, ..closed.clone() };
        let state = ZoneState { hvac_power: rng.random_range(-2000.0..2000.0), ..ZoneState::new(t_in) };
        let (d_open, d_closed) = (zone_derivative(zone, &spec, &state, &open), zone_derivative(zone, &spec, &state, &closed));
        ensure!(d_open < d_closed, "state {i}: dT/dt open {d_open} >= closed {d_closed}");
    }
    let q = ventilation_flow(1.0, 2.0, 22.0, 10.0, &VentilationParams::default());
    ensure!((q - 0.768).abs() < 1e-3, "ventilation flow {q}");
    let base = ScenarioConfig { days: 60, ..Default::default() };
    let halved = ScenarioConfig { options: SimulationOptions { inner_step_s: 30.0, ..Default::default() }, ..base.clone() };
    let (a, _) = ok(run_scenario(&base, 5))?;
    let (b, _) = ok(run_scenario(&halved, 5))?;
    let mut diff = 0.0f64;
    for z in 1..=5 {
        let name = format!("t_in_{z}");
        let (ca, cb) = (ok(a.require(&name))?, ok(b.require(&name))?);
        diff = ca.iter().zip(cb).fold(diff, |m, (x, y)| m.max((x - y).abs()));
    }
    ensure!(diff < 0.05, "halving the inner step moved T_in by {diff:.4} °C");
    Ok(format!("(a) 100/100 states cool faster when open; (b) Q = {q:.4} m³/s; (c) max |ΔT_in| = {diff:.4} °C over 60 days"))
}

fn criterion_8() -> Outcome {
    let cfg = ScenarioConfig { days: 365, ..Default::default() };
    let inputs = ok(scenario_inputs(&cfg, 8))?;
    let cal = cfg.calendar();
    let sp = &inputs.signals.setpoints;
    let mut levels = std::collections::BTreeSet::new();
    for z in 0..5 {
        for s in 0..cal.steps {
            let (h, c) = (sp.heating[z][s], sp.cooling[z][s]);
            if cal.is_occupied(s) {
                let idx = (h - 18.0) / 0.5;
                ensure!(idx.fract() == 0.0 && (0.0..=8.0).contains(&idx), "occupied heating setpoint {h}");
                ensure!(c - h == 5.0, "cooling {c} is not heating {h} + 5");
                levels.insert(idx as usize);
            } else {
                ensure!((h, c) == (15.0, 30.0), "unoccupied setpoints ({h}, {c})");
            }
        }
    }
    for (w, series) in inputs.signals.windows.open.iter().enumerate() {
        let mut run = 0;
        for &o in series {
            if o {
                run += 1;
            } else {
                ensure!(run == 0 || run >= 2, "window {w} has an open run of {run} step");
                run = 0;
            }
        }
    }
    // Triggers per eligible step (steps not inside a running pulse).
    let big = Calendar::new(Calendar::default_start(), 1042, HolidayCalendar::default());
    let sig = ok(generate_prbs_windows(&mut ChaCha8Rng::seed_from_u64(80), &big, 0.05))?;
    let mut rates = Vec::new();
    for w in 0..sig.open.len() {
        let events = sig.event_count(w);
        let eligible = big.steps - events * (PULSE_STEPS - 1);
        let rate = events as f64 / eligible as f64;
        ensure!((rate - 0.05).abs() <= 0.005, "window {w} event rate {rate:.4}");
        rates.push(format!("{rate:.4}"));
    }
    Ok(format!(
        "{} mPRS levels seen, setback and +5 °C cooling hold on 5x{} steps; open runs >= 2 steps; event rates [{}] at p = 0.05 over {} steps",
        levels.len(),
        cal.steps,
        rates.join(", "),
        big.steps
    ))
}

fn criterion_9() -> Outcome {
    let s = ScalerSpec::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let names: Vec<String> = s.features().map(String::from).collect();
    let mut worst = 0.0f64;
    for f in &names {
        let (lo, hi) = ok(s.interval(f))?;
        ensure!(ok(s.scale(f, lo))?.value == -1.0 && ok(s.scale(f, hi))?.value == 1.0, "{f} endpoints");
        for _ in 0..200 {
            let v = rng.random_range(lo..=hi);
            worst = worst.max((ok(s.inverse_scale(f, ok(s.scale(f, v))?.value))? - v).abs());
        }
    }
    ensure!(worst <= 1e-12, "scaling round trip error {worst:e}");
    let start = Calendar::default_start();
    let mut circle = 0.0f64;
    for k in 0..35040 {
        let tf = encode_time_features(start + chrono::Duration::minutes(15 * k), &HolidayCalendar::default());
        for (a, b) in [tf.hour, tf.day_of_week, tf.month] {
            circle = circle.max((a * a + b * b - 1.0).abs());
        }
    }
    ensure!(circle <= 1e-12, "sin²+cos² off by {circle:e}");
    let (dataset, _) = ok(run_scenario(&ScenarioConfig { days: 30, ..Default::default() }, 9))?;
    let table = std::sync::Arc::new(ok(FeatureTable::from_dataset(&dataset, &ScalerSpec::standard()))?);
    let windows = ok(build_windows(table, 96, 24, &PipelineConfig::default(), 9))?;
    let splits = ok(split_chronological(&windows, [0.6, 0.2, 0.2]))?;
    let span = 96 + 24;
    for (part, range) in [&splits.train, &splits.validation, &splits.test].iter().zip(&splits.ranges) {
        for &o in part.origins() {
            ensure!(o >= range.start && o + span <= range.end, "window at {o} crosses {range:?}");
        }
        ensure!(part.len() == window_count(range.len(), 96, 24, 1), "split window count");
    }
    let expect = |n: usize, p: usize, f: usize, s: usize| if n < p + f { 0 } else { (n - p - f) / s + 1 };
    let mut counted = Vec::new();
    for (days, stride) in [(2usize, 1usize), (5, 3), (9, 7), (14, 1), (30, 4)] {
        let rows = days * 96;
        let (ds, _) = ok(run_scenario(&ScenarioConfig { days, ..Default::default() }, 1))?;
        let t = std::sync::Arc::new(ok(FeatureTable::from_dataset(&ds, &ScalerSpec::standard()))?);
        let cfg = PipelineConfig { stride, ..Default::default() };
        let w = ok(build_windows(t, 48, 96, &cfg, 1))?;
        ensure!(w.len() == expect(rows, 48, 96, stride), "{rows} rows stride {stride}: {} windows", w.len());
        counted.push(w.len().to_string());
    }
    Ok(format!(
        "endpoints exact, round trip max {worst:.1e}, circle max {circle:.1e}; splits {}/{}/{} windows, none crossing; counts [{}] match the formula",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len(),
        counted.join(", ")
    ))
}

fn criterion_10() -> Outcome {
    let (root, first) = chain_dirs();
    let first = first.as_ref()?;
    let second = run_chain(&root.path().join("run2"))?;
    for name in ventcast::cli::METRIC_FILES {
        let (a, b) = (fs::read(first.join(name)), fs::read(second.join(name)));
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        ensure!(a == b, "{name} differs between runs");
    }
    let data_equal = fs::read(root.path().join("run1/data.csv")).ok() == fs::read(root.path().join("run2/data.csv")).ok();
    ensure!(data_equal, "datasets differ between runs");
    Ok(format!("{} metric files byte-identical across two full runs", ventcast::cli::METRIC_FILES.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "gradient correctness", criterion_1),
        (2, "shape fidelity", criterion_2),
        (3, "loss identities", criterion_3),
        (4, "desk-scale learning", criterion_4),
        (5, "interval sanity", criterion_5),
        (6, "horizon curve", criterion_6),
        (7, "simulator physics", criterion_7),
        (8, "excitation signals", criterion_8),
        (9, "pipeline exactness", criterion_9),
        (10, "end-to-end determinism", criterion_10),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1} s]"),
            Err(reason) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {reason} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
