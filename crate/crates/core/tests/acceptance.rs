//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use ddadapt_core::detection::{ca_cfar, CfarConfig};
use ddadapt_core::gram::GramCache;
use ddadapt_core::grid::{materialize_columns, DDGrid, Subset};
use ddadapt_core::harness::{Experiment, ExperimentConfig, Pipeline};
use ddadapt_core::solver::{
    kkt_residuals, solve_dense, weight_split_factorization, GammaWeights, ImplicitFilter,
};
use ddadapt_core::{adapted_response_fast, classical_caf, CafEngine, ComplexSignal};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn gaussian(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

fn signal(len: usize, seed: u64) -> ComplexSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexSignal::new(gaussian(len, &mut rng), 51_200.0).unwrap()
}

fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

/// Eight delays by four Doppler rows, the zero row being clutter:
/// `N_s = 24`, `N_c = 8`.
fn small_grid() -> DDGrid {
    DDGrid::from_rows((0..8).collect(), vec![-200.0, -100.0, 0.0, 100.0], &[2]).unwrap()
}

fn nesting() -> Outcome {
    let x = signal(1024, 11);
    let grid = DDGrid::from_rows(
        (0..16).collect(),
        (-6..=6).map(|k| k as f64 * 50.0).collect(),
        &[],
    )
    .unwrap();
    let y = signal(1024, 12);
    let start = Instant::now();
    let adapted = adapted_response_fast(&x, &y, &grid, 1.0).unwrap();
    let elapsed = start.elapsed();
    let classical = classical_caf(&x, &y, &grid).unwrap();
    let err = rel(adapted.values(), classical.values());
    Outcome {
        pass: err <= 1e-10 && elapsed < Duration::from_secs(1),
        detail: format!("rel Frobenius {err:.2e}, {elapsed:.2?}"),
    }
}

fn constraint() -> Outcome {
    let start = Instant::now();
    let x = signal(512, 21);
    let grid = small_grid();
    let mut worst: f64 = 0.0;
    for g in [0.5, 0.9, 0.98, 1.0] {
        let f = solve_dense(&x, &grid, &GammaWeights::reduced(g).unwrap()).unwrap();
        worst = worst.max(kkt_residuals(&x, &grid, &f).unwrap().constraint);
    }
    let cache = GramCache::new(&x, &grid).unwrap();
    let xc = materialize_columns(&x, &grid, Subset::Clutter).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let rho_c = DVector::from_vec(gaussian(grid.n_clutter(), &mut rng));
    let y =
        ComplexSignal::new((&xc * &rho_c).iter().copied().collect(), x.sample_rate_hz()).unwrap();
    let engine = CafEngine::new(&x, &grid).unwrap();
    let mut leak: f64 = 0.0;
    for g in [0.5, 0.9, 0.98, 1.0] {
        let f = ImplicitFilter::reduced(&cache, g).unwrap();
        let s = f.surface(&engine, &y).unwrap();
        leak = leak.max(s.frobenius() / rho_c.norm());
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-8 && leak <= 1e-8 && elapsed < Duration::from_secs(5),
        detail: format!(
            "max ||X_c* U_s||/||X_s|| {worst:.2e}, clutter leak {leak:.2e}, {elapsed:.2?}"
        ),
    }
}

fn kkt() -> Outcome {
    let x = signal(256, 31);
    let grid = small_grid();
    let mut worst_stat: f64 = 0.0;
    let mut worst_con: f64 = 0.0;
    for g in [0.5, 0.9, 0.98, 1.0] {
        let f = solve_dense(&x, &grid, &GammaWeights::reduced(g).unwrap()).unwrap();
        let r = kkt_residuals(&x, &grid, &f).unwrap();
        worst_stat = worst_stat.max(r.stationarity);
        worst_con = worst_con.max(r.constraint);
    }
    Outcome {
        pass: worst_stat <= 1e-6 && worst_con <= 1e-8,
        detail: format!("max stationarity {worst_stat:.2e}, max constraint {worst_con:.2e}"),
    }
}

fn weight_split() -> Outcome {
    let x = signal(128, 41);
    let grid = small_grid();
    let ws: Vec<_> = [(0.0, 0.5), (0.25, 0.25), (0.5, 0.0)]
        .iter()
        .map(|&(a, b)| GammaWeights::new(a, b, 0.5).unwrap())
        .collect();
    let mut worst: f64 = 0.0;
    let mut ratios_ok = true;
    for a in &ws {
        for b in &ws {
            let r = weight_split_factorization(&x, &grid, a, b).unwrap();
            let want = (2.0 * (a.gamma2 + a.gamma3)) / (2.0 * (b.gamma2 + b.gamma3));
            ratios_ok &= (r.predicted - want).abs() <= 1e-15;
            worst = worst.max(r.max_deviation);
        }
    }
    Outcome {
        pass: ratios_ok && worst <= 1e-8,
        detail: format!("max deviation {worst:.2e}"),
    }
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i);
        let t = 96 + 16 * rng.random_range(0..8usize);
        let n_delay = rng.random_range(3..9usize);
        let n_rows = rng.random_range(3..6usize);
        let dopplers: Vec<f64> = (0..n_rows)
            .map(|k| (k as f64 - (n_rows / 2) as f64) * 173.0)
            .collect();
        let grid = DDGrid::from_rows((0..n_delay).collect(), dopplers, &[n_rows / 2]).unwrap();
        let x = signal(t, 600 + i);
        let y = signal(t, 700 + i);
        let gamma = (i + 1) as f64 / 20.0;
        let dense = solve_dense(&x, &grid, &GammaWeights::reduced(gamma).unwrap())
            .unwrap()
            .respond(&y)
            .unwrap();
        let fast = adapted_response_fast(&x, &y, &grid, gamma)
            .unwrap()
            .surveillance_values(&grid);
        worst = worst.max(rel(&fast, &dense));
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("max rel error over 20 instances {worst:.2e}"),
    }
}

fn cfar_calibration() -> Outcome {
    let start = Instant::now();
    let (rows, cols) = (1000, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let power: Vec<f64> = (0..rows * cols).map(|_| Exp1.sample(&mut rng)).collect();
    let base = CfarConfig::default();
    let (rr, rc) = base.reach();
    let interior = (rows - 2 * rr) * (cols - 2 * rc);
    let mut rates = Vec::new();
    for (pfa, lo, hi) in [(1e-2, 0.5e-2, 2e-2), (1e-4, 0.25e-4, 4e-4)] {
        let mask = ca_cfar(
            &power,
            rows,
            cols,
            &CfarConfig {
                pfa_tuned: pfa,
                ..base.clone()
            },
        )
        .unwrap();
        let hits = (rr..rows - rr)
            .flat_map(|r| (rc..cols - rc).map(move |c| (r, c)))
            .filter(|&(r, c)| mask.get(r, c))
            .count();
        let rate = hits as f64 / interior as f64;
        rates.push((rate, (lo..=hi).contains(&rate)));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: rates.iter().all(|r| r.1) && interior >= 100_000 && elapsed < Duration::from_secs(30),
        detail: format!(
            "{interior} interior cells, observed {:.3e} at 1e-2, {:.3e} at 1e-4, {elapsed:.2?}",
            rates[0].0, rates[1].0
        ),
    }
}

fn roc_csv(cfg: &ExperimentConfig) -> Vec<u8> {
    let r = Experiment::prepare(cfg).unwrap().run();
    let mut out = Vec::new();
    r.table.write_csv(Pipeline::Unadapted, &mut out).unwrap();
    r.table.write_csv(Pipeline::Adapted, &mut out).unwrap();
    out
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "nesting identity", nesting()),
        (2, "constraint satisfaction", constraint()),
        (3, "KKT verification", kkt()),
        (4, "weight-split scaling", weight_split()),
        (5, "fast path vs dense oracle", oracle_equivalence()),
        (6, "CFAR calibration", cfar_calibration()),
    ];

    let cfg = ExperimentConfig::desk();
    let start = Instant::now();
    let run = Experiment::prepare(&cfg).unwrap().run();
    let elapsed = start.elapsed();
    let row = |p, g, pfa| run.table.find(p, g, pfa).unwrap().clone();
    let adapted = row(Pipeline::Adapted, Some(0.98), 1e-2);
    let classical = row(Pipeline::Unadapted, None, 1e-2);
    let ratio = adapted.pfa_observed / 1e-2;
    results.push((
        7,
        "desk-scale detection gap",
        Outcome {
            pass: run.n_failed() == 0
                && adapted.pd >= 0.9
                && classical.pd <= 0.3
                && (0.1..=10.0).contains(&ratio)
                && elapsed < Duration::from_secs(600),
            detail: format!(
                "adapted Pd {:.3}, unadapted Pd {:.3}, adapted Pfa {:.2e}, {} trials, {elapsed:.1?}",
                adapted.pd, classical.pd, adapted.pfa_observed, adapted.n_trials
            ),
        },
    ));

    let sweep: Vec<_> = [1e-2, 1e-4]
        .iter()
        .map(|&pfa| {
            (
                pfa,
                row(Pipeline::Adapted, Some(0.98), pfa).pd,
                row(Pipeline::Adapted, Some(0.5), pfa).pd,
            )
        })
        .collect();
    results.push((
        8,
        "gamma-sweep direction",
        Outcome {
            pass: sweep.iter().all(|&(_, hi, lo)| hi >= lo),
            detail: sweep
                .iter()
                .map(|(p, hi, lo)| format!("pfa {p:e}: Pd(0.98) {hi:.3} vs Pd(0.5) {lo:.3}"))
                .collect::<Vec<_>>()
                .join("; "),
        },
    ));

    let small = ExperimentConfig {
        n_trials: 24,
        ..ExperimentConfig::desk()
    };
    let (a, b) = (roc_csv(&small), roc_csv(&small));
    results.push((
        9,
        "deterministic CSV",
        Outcome {
            pass: a == b && !a.is_empty(),
            detail: format!("{} bytes, identical: {}", a.len(), a == b),
        },
    ));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!(
            "criterion {n} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
