use ddadapt_core::gram::{gram, GramCache};
use ddadapt_core::grid::{materialize_columns, Cell};
use ddadapt_core::harness::{run_montecarlo_with, ExperimentConfig};
use ddadapt_core::scene::{complex_noise, ClutterScatterer, Target};
use ddadapt_core::solver::ImplicitFilter;
use ddadapt_core::*;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FS: f64 = 102_400.0;

fn reference(symbols: usize) -> ComplexSignal {
    let cfg = OfdmConfig {
        num_subcarriers: 60,
        cp_length: 4,
        num_symbols: symbols,
        ..OfdmConfig::default()
    };
    generate_ofdm_reference(&cfg, FS).unwrap()
}

fn grid() -> DDGrid {
    build_default_grid(FS, 10.0 / FS, 0.0, 500.0, 100.0).unwrap()
}

#[test]
fn classical_surface_decomposes_into_gram_and_noise() {
    let x = reference(8);
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho: Vec<Complex64> = (0..g.n_cells())
        .map(|_| Complex64::new(rng.random(), rng.random()))
        .collect();
    let cols = materialize_columns(&x, &g, Subset::All).unwrap();
    let z = complex_noise(x.len(), 6);
    let y: Vec<Complex64> = (&cols * DVector::from_column_slice(&rho))
        .iter()
        .zip(&z)
        .map(|(a, b)| a + b)
        .collect();
    let y = ComplexSignal::new(y, FS).unwrap();

    let engine = CafEngine::new(&x, &g).unwrap();
    let got = engine.correlate(&y).unwrap();
    let gm = gram(&x, &g, Subset::All, Subset::All).unwrap().values;
    let xz = cols.ad_mul(&DVector::from_column_slice(&z));
    let want = &gm * DVector::from_column_slice(&rho) + xz;
    let scale = want.norm();
    for (a, b) in got.iter().zip(want.iter()) {
        assert!((a - b).norm() <= 1e-10 * scale);
    }
}

#[test]
fn caf_superposition_over_scene_components() {
    let x = reference(8);
    let g = grid();
    let truth = SceneTruth {
        clutter: vec![ClutterScatterer {
            delay_samples: 3,
            amplitude: Complex64::new(0.4, -1.0),
        }],
        targets: vec![Target {
            delay_s: 4.3 / FS,
            doppler_hz: 210.0,
            snr_db: 0.0,
            amplitude: Complex64::new(0.0, 2.0),
        }],
        noise_seed: Some(9),
    };
    let parts = [
        SceneTruth {
            targets: vec![],
            noise_seed: None,
            ..truth.clone()
        },
        SceneTruth {
            clutter: vec![],
            noise_seed: None,
            ..truth.clone()
        },
        SceneTruth {
            clutter: vec![],
            targets: vec![],
            ..truth.clone()
        },
    ];
    let total = classical_caf(&x, &synthesize_capture(&x, &truth).unwrap(), &g).unwrap();
    let mut sum = vec![Complex64::new(0.0, 0.0); total.values().len()];
    for p in &parts {
        let s = classical_caf(&x, &synthesize_capture(&x, p).unwrap(), &g).unwrap();
        for (acc, v) in sum.iter_mut().zip(s.values()) {
            *acc += v;
        }
    }
    for (a, b) in total.values().iter().zip(&sum) {
        assert!((a - b).norm() <= 1e-9 * total.frobenius());
    }
}

#[test]
fn peak_location_ignores_weight_split() {
    let x = reference(4);
    let g = grid();
    let cache = GramCache::new(&x, &g).unwrap();
    let engine = CafEngine::new(&x, &g).unwrap();
    let y = synthesize_capture(
        &x,
        &SceneTruth {
            clutter: vec![ClutterScatterer {
                delay_samples: 1,
                amplitude: Complex64::new(3.0, 0.0),
            }],
            targets: vec![Target {
                delay_s: 6.0 / FS,
                doppler_hz: -300.0,
                snr_db: 0.0,
                amplitude: Complex64::new(0.5, 0.0),
            }],
            noise_seed: Some(2),
        },
    )
    .unwrap();
    let peaks: Vec<_> = [(0.0, 0.7), (0.35, 0.35), (0.7, 0.0)]
        .iter()
        .map(|&(a, b)| {
            let f =
                ImplicitFilter::build(&cache, &GammaWeights::new(a, b, 0.3).unwrap(), 0.0).unwrap();
            let (r, c, _) = f.surface(&engine, &y).unwrap().peak();
            (r, c)
        })
        .collect();
    assert!(peaks.windows(2).all(|w| w[0] == w[1]), "{peaks:?}");
}

#[test]
fn on_grid_target_power_matches_snr() {
    let x = reference(16);
    let g = grid();
    let e = x.energy();
    let snr_db = 10.0;
    let cell = Cell {
        doppler: g
            .doppler_bins_hz()
            .iter()
            .position(|&f| f == 300.0)
            .unwrap(),
        delay: 5,
    };
    let k = g.flat_index(cell).unwrap();
    let engine = CafEngine::new(&x, &g).unwrap();
    let target = |seed| SceneTruth {
        clutter: vec![],
        targets: vec![Target {
            delay_s: 5.0 / FS,
            doppler_hz: 300.0,
            snr_db,
            amplitude: Complex64::new(10f64.powf(snr_db / 20.0) / e.sqrt(), 0.0),
        }],
        noise_seed: seed,
    };

    let clean = engine
        .correlate(&synthesize_capture(&x, &target(None)).unwrap())
        .unwrap();
    // The delayed replica loses its first five samples.
    let ek = shift_replica(&x, 5, 300.0).unwrap().energy();
    let want = ek * ek / e * 10f64.powf(snr_db / 10.0);
    assert!((clean[k].norm_sqr() - want).abs() <= 1e-9 * want);

    // Monte Carlo: target cell power over mean noise-only cell power.
    let (mut peak, mut floor, mut n_floor) = (0.0, 0.0, 0usize);
    for seed in 0..200 {
        let r = engine
            .correlate(&synthesize_capture(&x, &target(Some(seed))).unwrap())
            .unwrap();
        peak += r[k].norm_sqr();
        let far = g
            .cells(Subset::All)
            .into_iter()
            .filter(|c| c.delay.abs_diff(5) > 3 || c.doppler.abs_diff(cell.doppler) > 2);
        for c in far {
            floor += r[g.flat_index(c).unwrap()].norm_sqr();
            n_floor += 1;
        }
    }
    let floor = floor / n_floor as f64;
    let ratio_db = 10.0 * (peak / 200.0 / floor).log10();
    assert!((ratio_db - snr_db).abs() <= 1.0, "{ratio_db} dB");
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let fs = 25_600.0;
    let cfg = ExperimentConfig {
        sample_rate_hz: fs,
        waveform: OfdmConfig {
            num_subcarriers: 60,
            cp_length: 4,
            num_symbols: 4,
            ..OfdmConfig::default()
        },
        grid: harness::GridConfig {
            max_delay_seconds: 12.0 / fs,
            doppler_max_hz: 900.0,
            ..Default::default()
        },
        clutter: ClutterParams {
            n_c: 8,
            max_delay_seconds: 12.0 / fs,
            ..Default::default()
        },
        target: TargetParams {
            delay_min_s: 2.0 / fs,
            delay_max_s: 10.0 / fs,
            doppler_abs_max_hz: 800.0,
            snr_mean_db: 15.0,
            ..Default::default()
        },
        gamma_list: vec![0.5, 0.98],
        pfa_list: vec![1e-2],
        n_trials: 10,
        ..ExperimentConfig::default()
    };
    let par = run_montecarlo_with(&cfg, Exec::Parallel).unwrap();
    let seq = run_montecarlo_with(&cfg, Exec::Sequential).unwrap();
    assert_eq!(par.table, seq.table);
    assert_eq!(par.records, seq.records);
}
