//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use rand::Rng;

use pbo_rnn::base::{gaussian_sample, mse, uniform_sample, BudgetMeter, FnObjective, ParameterVector, Purpose, RngStream, Scorer};
use pbo_rnn::cells::{forward_sequence, lstm_bptt_gradient, CellKind, CellSpec, CellState, Network, PlstmParams};
use pbo_rnn::data::{build_dataset, compute_rv, generate_synthetic, DatasetConfig, ReturnSeries, RvSeries, SynthConfig};
use pbo_rnn::harness::{
    emit_results, long_memory_acceptance, run_benchmark, AcceptanceConfig, Axis, CellStatus, ExperimentConfig, Format, SearchSpace,
};
use pbo_rnn::optim::{es_step, npso_step, run_population, EsConfig, EvolutionStrategy, NpsoConfig, RewardShaping, SwarmState, TrainerKind};

type Outcome = (bool, String);

fn rng(case: u64) -> rand_chacha::ChaCha8Rng {
    RngStream::new(2024, case, 0, Purpose::Test).rng()
}

fn sphere(dim: usize) -> FnObjective<impl Fn(&[f64]) -> f64 + Sync> {
    FnObjective::new(dim, |t: &[f64]| t.iter().map(|v| v * v).sum())
}

// 1

fn window_loss(net: &Network, theta: &[f64], inputs: &[f64], targets: &[f64], carried: &CellState) -> f64 {
    let mut state = carried.clone();
    let mut out = Vec::new();
    net.run(theta, &mut state, inputs, None, &mut out).unwrap();
    mse(&out, targets)
}

fn gradient_correctness() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let mut r = rng(case);
        let input_dim = r.random_range(1..=3);
        let hidden = r.random_range(1..=4);
        let output_dim = r.random_range(1..=2);
        let window = r.random_range(1..=5);
        let net = Network::new(CellSpec::lstm(input_dim, hidden, output_dim)).unwrap();
        let theta: Vec<f64> = (0..net.num_params()).map(|_| r.random_range(-0.8..0.8)).collect();
        let inputs: Vec<f64> = (0..window * input_dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let targets: Vec<f64> = (0..window * output_dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut carried = net.zero_state();
        carried.hidden.iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));
        carried.memory.iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));

        let analytic = lstm_bptt_gradient(&net, &theta, &inputs, &targets, &carried).unwrap().gradient;
        let mut numeric = vec![0.0; theta.len()];
        for j in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += h;
            minus[j] -= h;
            numeric[j] = (window_loss(&net, &plus, &inputs, &targets, &carried) - window_loss(&net, &minus, &inputs, &targets, &carried)) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst = worst.max(diff / norm.max(1e-12));
    }
    (worst <= 1e-4, format!("max relative error {worst:.2e} over 20 instances (<= 1e-4)"))
}

// 2

fn es_sphere() -> Outcome {
    let obj = sphere(10);
    let meter = BudgetMeter::unlimited();
    let mut cfg = EsConfig::new(0.2, 0.1, 200, 300);
    cfg.initial_weights = Some(ParameterVector::from_vec(vec![5.0; 10]));
    let out = run_population(&EvolutionStrategy::new(cfg).unwrap(), &Scorer::new(&obj, &meter), 7).unwrap();
    let loss: f64 = out.theta.iter().map(|v| v * v).sum();
    (loss <= 1e-2, format!("final loss {loss:.3e} after {} iterations (<= 1e-2)", out.iterations_run))
}

// 3

fn npso_sphere() -> Outcome {
    let obj = sphere(10);
    let cfg = NpsoConfig::new(0.7, 1.0, 30, 200);
    let mut worst_final: f64 = 0.0;
    let mut monotone = true;
    for seed in 0..5 {
        let meter = BudgetMeter::unlimited();
        let scorer = Scorer::new(&obj, &meter);
        let mut state = SwarmState::initialize(&cfg, 10, seed);
        let mut previous = f64::INFINITY;
        for k in 1..=200 {
            state = npso_step(&state, k, &cfg, &scorer, seed).unwrap().0;
            monotone &= state.global_best_loss <= previous;
            previous = state.global_best_loss;
        }
        worst_final = worst_final.max(state.global_best_loss);
    }
    (
        worst_final <= 1e-3 && monotone,
        format!("worst global best {worst_final:.3e} over 5 runs (<= 1e-3), monotone: {monotone}"),
    )
}

// 4

const TABLE: [f64; 2] = [1.5, 0.25];

/// Weighted quadratic with tabulated weights.
fn tabulated(t: &[f64]) -> f64 {
    TABLE[0] * t[0] * t[0] + TABLE[1] * t[1] * t[1]
}

fn hand_traces() -> Outcome {
    let obj = FnObjective::new(2, tabulated);
    let seed = 31;
    let (n, dim) = (2usize, 2usize);

    // ES with raw rewards
    let (alpha, sigma) = (0.5, 0.25);
    let mut cfg = EsConfig::new(alpha, sigma, n, 2);
    cfg.shaping = RewardShaping::Raw;
    let meter = BudgetMeter::unlimited();
    let scorer = Scorer::new(&obj, &meter);
    let mut theta = ParameterVector::from_vec(vec![1.0, -2.0]);
    let mut manual = [1.0, -2.0];
    let mut es_ok = true;
    for k in 1..=2u64 {
        let eps: Vec<Vec<f64>> = (0..n).map(|i| gaussian_sample(RngStream::new(seed, i as u64, k, Purpose::EsNoise), dim)).collect();
        let rewards: Vec<f64> = eps
            .iter()
            .map(|e| -tabulated(&[manual[0] + sigma * e[0], manual[1] + sigma * e[1]]))
            .collect();
        for j in 0..dim {
            let sum = rewards[0] * eps[0][j] + rewards[1] * eps[1][j];
            manual[j] += alpha / (sigma * n as f64) * sum;
        }
        let out = es_step(&theta, k, &cfg, &scorer, seed).unwrap();
        theta = out.theta;
        es_ok &= theta.as_slice() == manual.as_slice();
        es_ok &= out.losses == rewards.iter().map(|r| -r).collect::<Vec<_>>();
    }

    // NPSO with c1 = c2 = 2
    let ncfg = NpsoConfig::new(0.6, 0.5, n, 2);
    let meter = BudgetMeter::unlimited();
    let scorer = Scorer::new(&obj, &meter);
    let mut state = SwarmState::initialize(&ncfg, dim, seed);
    let mut x: Vec<Vec<f64>> = (0..n)
        .map(|i| gaussian_sample(RngStream::new(seed, i as u64, 0, Purpose::PopulationInit), dim).iter().map(|z| 0.5 * z).collect())
        .collect();
    let mut v = vec![vec![0.0; dim]; n];
    let mut local = vec![vec![0.0; dim]; n];
    let mut local_loss = vec![f64::INFINITY; n];
    let mut global = vec![0.0; dim];
    let mut global_loss = f64::INFINITY;
    let mut npso_ok = true;
    for k in 1..=2u64 {
        let g_prev = global.clone();
        for i in 0..n {
            let u1 = uniform_sample(RngStream::new(seed, i as u64, k, Purpose::SwarmCognitive));
            let u2 = uniform_sample(RngStream::new(seed, i as u64, k, Purpose::SwarmSocial));
            for j in 0..dim {
                v[i][j] = 0.6 * v[i][j] + 2.0 * u1 * (local[i][j] - x[i][j]) + 2.0 * u2 * (g_prev[j] - x[i][j]);
                x[i][j] += v[i][j];
            }
        }
        for i in 0..n {
            let l = tabulated(&x[i]);
            if l < local_loss[i] {
                local[i] = x[i].clone();
                local_loss[i] = l;
                if l < global_loss {
                    global = x[i].clone();
                    global_loss = l;
                }
            }
        }
        state = npso_step(&state, k, &ncfg, &scorer, seed).unwrap().0;
        for i in 0..n {
            let p = &state.particles[i];
            npso_ok &= p.position.as_slice() == x[i].as_slice() && p.velocity == v[i];
            npso_ok &= p.local_best.as_slice() == local[i].as_slice() && p.local_best_loss == local_loss[i];
        }
        npso_ok &= state.global_best.as_slice() == global.as_slice() && state.global_best_loss == global_loss;
    }
    (
        es_ok && npso_ok,
        format!("bit-exact ES trace: {es_ok}, NPSO trace: {npso_ok} (N = 2, K = 2, C = 2)"),
    )
}

// 5

fn tiny_synth(length: usize) -> SynthConfig {
    SynthConfig {
        length,
        long_lag: 25,
        ..SynthConfig::default()
    }
}

fn fixed_hidden(cfg: &mut ExperimentConfig, hidden: f64) {
    for t in TrainerKind::ALL {
        cfg.spaces.insert(t, SearchSpace::default_for(t).with("hidden_dim", Axis::fixed(hidden)));
    }
}

fn budget_parity() -> Outcome {
    // published defaults for budget, population, iterations and trials; a short
    // series and a small hidden layer keep the run cheap
    let mut cfg = ExperimentConfig {
        synth: tiny_synth(250),
        ..ExperimentConfig::default()
    };
    fixed_hidden(&mut cfg, 2.0);
    let table = run_benchmark(&cfg).unwrap();
    let mut ok = table.cells.len() == 9;
    let mut detail = Vec::new();
    for c in &table.cells {
        ok &= c.budget == 30_000 && c.forward_passes <= 30_000;
        match c.trainer {
            TrainerKind::Es | TrainerKind::Npso => ok &= c.forward_passes == 30 * 50 * 20,
            TrainerKind::Sgd if c.architecture == CellKind::Lstm => ok &= c.forward_passes > 0,
            TrainerKind::Sgd => ok &= c.status == CellStatus::NotImplemented && c.forward_passes == 0,
        }
        detail.push(format!("{}/{}={}", c.architecture.name(), c.trainer.name(), c.forward_passes));
    }
    (ok, format!("passes per cell (cap 30000): {}", detail.join(" ")))
}

// 6

fn long_memory_gate() -> Outcome {
    let r = long_memory_acceptance(&AcceptanceConfig::default()).unwrap();
    (
        r.pass == Some(true),
        format!(
            "ES {:.4} vs SGD {:.4} (need <= {:.4}); SGD vs mean baseline {:.4} (need >= {:.4}); window baseline {:.4}, oracle {:.4}",
            r.es_mse,
            r.sgd_mse,
            0.5 * r.sgd_mse,
            r.mean_baseline_mse,
            0.9 * r.mean_baseline_mse,
            r.window_baseline_mse,
            r.oracle_mse
        ),
    )
}

// 7

const SMALL_BENCHMARK: &str = r#"
budget = 600
population = 10
master_seed = 99

[search_iterations]
sgd = 6
es = 3
npso = 3

[synth]
length = 400
long_lag = 25

[spaces.sgd]
hidden_dim = [3.0]
learning_rate = { low = 1e-4, high = 1e-2, scale = "log" }
minibatch_size = [1.0, 2.0, 4.0, 8.0]

[spaces.es]
hidden_dim = [3.0]
learning_rate = { low = 1e-3, high = 1.0, scale = "log" }
noise_std = { low = 1e-3, high = 1.0, scale = "log" }

[spaces.npso]
hidden_dim = [3.0]
inertia = { low = 0.4, high = 0.99, scale = "linear" }
init_std = { low = 0.01, high = 1.0, scale = "log" }
"#;

fn benchmark_files(workers: usize, cfg: &ExperimentConfig) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    let table = pool.install(|| run_benchmark(cfg)).unwrap();
    [Format::Json, Format::Csv, Format::Markdown]
        .into_iter()
        .map(|f| {
            let mut buf = Vec::new();
            emit_results(&table, f, &mut buf).unwrap();
            buf
        })
        .collect()
}

fn cli_benchmark_files(workers: &str, config: &std::path::Path, dir: &std::path::Path) -> Vec<Vec<u8>> {
    ["json", "csv", "markdown"]
        .into_iter()
        .map(|format| {
            let out = dir.join(format!("w{workers}.{format}"));
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_pbo-rnn"))
                .args(["benchmark", "--workers", workers, "--format", format, "--config"])
                .arg(config)
                .arg("--out")
                .arg(&out)
                .env("RUST_LOG", "error")
                .status()
                .unwrap();
            assert!(status.success());
            std::fs::read(out).unwrap()
        })
        .collect()
}

fn parallel_determinism() -> Outcome {
    let cfg = ExperimentConfig::from_toml_str(SMALL_BENCHMARK).unwrap();
    let in_process = benchmark_files(1, &cfg) == benchmark_files(4, &cfg);
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL_BENCHMARK).unwrap();
    let one = cli_benchmark_files("1", &config, dir.path());
    let four = cli_benchmark_files("4", &config, dir.path());
    let files = one == four && one == benchmark_files(1, &cfg);
    (
        in_process && files,
        format!("json/csv/markdown byte-identical at 1 and 4 workers: in-process {in_process}, CLI files {files}"),
    )
}

// 8

fn minute_returns() -> ReturnSeries {
    let mut r = rng(800);
    let mut stamps = Vec::new();
    let mut rets = Vec::new();
    for day in [3, 4] {
        let open = NaiveDate::from_ymd_opt(2018, 7, day).unwrap().and_hms_opt(8, 0, 0).unwrap();
        for m in 1..=510 {
            // a few missing minutes
            if r.random_range(0..20) == 0 {
                continue;
            }
            stamps.push(open + chrono::Duration::minutes(m));
            rets.push(r.random_range(-0.002..0.002));
        }
    }
    ReturnSeries::new(stamps, rets).unwrap()
}

fn group_by_oracle(series: &ReturnSeries, bar_minutes: u32) -> BTreeMap<NaiveDateTime, f64> {
    let mut bars = BTreeMap::new();
    for (ts, r) in series.timestamps().iter().zip(series.returns()) {
        let minute = ts.hour() * 60 + ts.minute();
        let start = minute - minute % bar_minutes;
        let key = ts.date().and_hms_opt(start / 60, start % 60, 0).unwrap();
        *bars.entry(key).or_insert(0.0) += r * r;
    }
    bars
}

fn data_pipeline() -> Outcome {
    let series = minute_returns();
    let rv = compute_rv(&series, 30).unwrap();
    let oracle = group_by_oracle(&series, 30);
    let expected_stamps: Vec<NaiveDateTime> = oracle.keys().copied().collect();
    let expected_rv: Vec<f64> = oracle.values().copied().collect();
    let rv_exact = rv.bar_timestamps == expected_stamps && rv.rv == expected_rv;

    let synth = generate_synthetic(&tiny_synth(500)).unwrap();
    let cfg = DatasetConfig {
        lags: 3,
        ..DatasetConfig::default()
    };
    let base = build_dataset(&synth, &cfg).unwrap();
    let mut leak_free = true;
    // every bar that only validation or test targets depend on
    let first_unseen = base.train_end + cfg.lags;
    for trial in 0..10u64 {
        let mut r = rng(810 + trial);
        let mut mutated = synth.rv.clone();
        for v in &mut mutated[first_unseen..] {
            *v *= r.random_range(0.01..100.0);
        }
        let m = build_dataset(&RvSeries { rv: mutated, ..synth.clone() }, &cfg).unwrap();
        let n = base.train_end;
        leak_free &= m.stats == base.stats;
        leak_free &= m.features[..n * base.n_features] == base.features[..n * base.n_features];
        leak_free &= m.targets[..n] == base.targets[..n];
    }
    (
        rv_exact && leak_free,
        format!(
            "{} bars equal the group-by oracle exactly: {rv_exact}; training rows unchanged under 10 validation mutations: {leak_free}",
            rv.rv.len()
        ),
    )
}

// 9

fn plstm_degeneracy() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..10 {
        let mut r = rng(900 + case);
        let (input_dim, hidden, steps) = (r.random_range(1..=3), r.random_range(1..=6), r.random_range(5..60));
        let lstm = Network::new(CellSpec::lstm(input_dim, hidden, 1)).unwrap();
        let params = PlstmParams {
            force_open: true,
            ..PlstmParams::default()
        };
        let plstm = Network::new(CellSpec::plstm(input_dim, hidden, 1, params)).unwrap();
        let theta_l: Vec<f64> = (0..lstm.num_params()).map(|_| r.random_range(-1.0..1.0)).collect();
        // shared tensors copied by name, time-gate tensors random
        let mut theta_p: Vec<f64> = (0..plstm.num_params()).map(|_| r.random_range(-1.0..1.0)).collect();
        for t in lstm.layout().tensors() {
            theta_p[plstm.layout().range(&t.name)].copy_from_slice(&theta_l[t.range()]);
        }
        let inputs: Vec<f64> = (0..steps * input_dim).map(|_| r.random_range(-2.0..2.0)).collect();
        let a = forward_sequence(&lstm, &theta_l, &inputs, None).unwrap();
        let b = forward_sequence(&plstm, &theta_p, &inputs, None).unwrap();
        worst = worst.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    (worst <= 1e-12, format!("max |P-LSTM - LSTM| {worst:.1e} over 10 random sequences (<= 1e-12)"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("gradient correctness", gradient_correctness),
        ("ES sphere convergence", es_sphere),
        ("NPSO sphere convergence", npso_sphere),
        ("hand-trace equivalence", hand_traces),
        ("budget parity", budget_parity),
        ("long-memory gate", long_memory_gate),
        ("determinism under parallelism", parallel_determinism),
        ("data-pipeline oracle", data_pipeline),
        ("P-LSTM degeneracy", plstm_degeneracy),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(outcome) => outcome,
            Err(_) => (false, "panicked".to_string()),
        };
        failed += usize::from(!ok);
        println!("{label}: {} | {detail}", if ok { "PASS" } else { "FAIL" });
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
