//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use pbc_core::cdf::{debiased_baseline, CdfForecast, CdfSeries, Provenance, SeriesEntry, TrainingKey};
use pbc_core::climatology::{ClimatologyField, IndicatorField};
use pbc_core::correction::{lag_dates, persistencepp};
use pbc_core::floods::{filter_by_issuance, flood_bss, AlertLevel, FloodEvent, GdacsClient};
use pbc_core::griddata::{generate_synthetic_world, BiasProfile, SynthConfig, SyntheticWorld};
use pbc_core::pipeline::{
    prepare_replay, replay_prepared, run_replay, write_outputs, CutoffRule, PipelineConfig, ReplayInputs,
    ScoringSettings,
};
use pbc_core::projection::project_bins;
use pbc_core::scoring::{bss_extreme, rps_cell, rpss_aggregated, rpss_global, rpss_spatial, EvalMask, ExtremeBin};
use pbc_core::{CalendarDate, Error, GridSpec, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- 1

/// Exact minimiser of `sum (x - f)^2` over `0 <= x1 <= .. <= xn <= 1` by
/// enumeration: the solution is constant on consecutive blocks, each block
/// sitting at its mean or at a bound.
fn qp_oracle(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for cuts in 0u32..(1 << (n - 1)) {
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 0..n - 1 {
            if cuts & (1 << i) != 0 {
                blocks.push(start..i + 1);
                start = i + 1;
            }
        }
        blocks.push(start..n);
        for choice in 0..3u32.pow(blocks.len() as u32) {
            let mut c = choice;
            let mut x = vec![0.0; n];
            for b in &blocks {
                let v = match c % 3 {
                    0 => f[b.clone()].iter().sum::<f64>() / b.len() as f64,
                    1 => 0.0,
                    _ => 1.0,
                };
                c /= 3;
                x[b.clone()].iter_mut().for_each(|s| *s = v);
            }
            if x.iter().any(|v| !(0.0..=1.0).contains(v)) || x.windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
            let obj: f64 = x.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        }
    }
    best.expect("zero vector is always feasible").1
}

fn c1_pava_vs_oracle() -> Outcome {
    let mut r = rng(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut f: Vec<f64> = (0..5).map(|_| r.random_range(-0.3..1.3)).collect();
        let oracle = qp_oracle(&f[..4]);
        project_bins(&mut f);
        if f[4] != 1.0 {
            return Err(format!("F(K) = {} after projection", f[4]));
        }
        for k in 0..4 {
            worst = worst.max((f[k] - oracle[k]).abs());
        }
    }
    let el = start.elapsed();
    check(
        worst <= 1e-6 && el < Duration::from_secs(5),
        format!(
            "max |PAVA - QP| = {worst:.2e} (tol 1e-6), {:.2?} for 1000 inputs (limit 5 s)",
            el
        ),
    )
}

// ---------------------------------------------------------------- 2

fn c2_projection_never_hurts() -> Outcome {
    let mut r = rng(2);
    let mut violations = 0;
    let mut pairs = 0;
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..5).map(|_| r.random_range(-0.2..1.2)).collect();
        let mut proj = raw.clone();
        project_bins(&mut proj);
        for bin in 0..5 {
            let o: Vec<f64> = (0..5).map(|k| if k >= bin { 1.0 } else { 0.0 }).collect();
            pairs += 1;
            if rps_cell(&proj, &o) > rps_cell(&raw, &o) + 1e-12 {
                violations += 1;
            }
        }
    }
    check(
        violations == 0,
        format!("{violations} violations in {pairs} forecast/outcome pairs (slack 1e-12)"),
    )
}

// ---------------------------------------------------------------- 3

fn c3_scoring_identities() -> Outcome {
    let grid = Arc::new(GridSpec::regular(60.0, -15.0, 9, 0.0, 20.0, 18).unwrap());
    let dates: Vec<CalendarDate> = (0..40).map(|i| CalendarDate::ymd(2021, 1, 4).add_days(7 * i)).collect();
    let n = grid.n_cells();
    let mut r = rng(3);
    let mut ov = Vec::new();
    for _ in 0..dates.len() * n {
        let bin = r.random_range(0..5);
        ov.extend((0..5).map(|k| if k >= bin { 1.0 } else { 0.0 }));
    }
    let o = IndicatorField::new(grid.clone(), Variable::Mslp, 5, dates.clone(), ov.clone()).unwrap();
    let mask = EvalMask::new(grid.clone(), Variable::Mslp).unwrap();
    let clim = CdfForecast::climatological(grid.clone(), Variable::Mslp, 19, 5, dates.clone()).unwrap();
    let perfect = CdfForecast::new(
        grid.clone(),
        Variable::Mslp,
        19,
        Provenance::Custom,
        5,
        dates.clone(),
        ov,
    )
    .unwrap();

    let all_skills = |f: &CdfForecast| -> Vec<f64> {
        let mut v: Vec<f64> = rpss_global(f, &o, &mask)
            .unwrap()
            .values
            .into_iter()
            .map(|x| x.unwrap())
            .collect();
        v.extend(
            rpss_spatial(f, &o, &mask, &dates)
                .unwrap()
                .values
                .into_iter()
                .map(|x| x.unwrap()),
        );
        v.push(rpss_aggregated(f, &o, &mask, &dates).unwrap().unwrap());
        for bin in [ExtremeBin::Top, ExtremeBin::Bottom] {
            v.extend(bss_extreme(f, &o, &mask, bin).unwrap().values.into_iter().flatten());
        }
        v
    };
    let c = all_skills(&clim);
    let p = all_skills(&perfect);
    let dc = c.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let dp = p.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    check(
        dc <= 1e-12 && dp <= 1e-12,
        format!(
            "climatological max |skill| = {dc:.1e}, perfect max |skill - 1| = {dp:.1e} over {} scores each (tol 1e-12)",
            c.len()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn world_config(seed: u64, n_lat: usize, n_lon: usize, bias: BiasProfile) -> SynthConfig {
    let mut cfg = SynthConfig::new(seed, GridSpec::patch(60.0, 0.0, n_lat, n_lon).unwrap(), 23, bias);
    cfg.members = 11;
    cfg.hindcast_members = 5;
    cfg
}

fn biased_inputs(seed: u64, n_lat: usize, n_lon: usize, bias: BiasProfile) -> ReplayInputs {
    ReplayInputs::from_world(&generate_synthetic_world(&world_config(seed, n_lat, n_lon, bias)).unwrap())
}

fn held_out_year() -> PipelineConfig {
    PipelineConfig {
        start: Some(CalendarDate::ymd(2022, 1, 1)),
        end: Some(CalendarDate::ymd(2022, 12, 31)),
        scoring: ScoringSettings {
            bootstrap_replicates: 200,
            ..ScoringSettings::default()
        },
        ..PipelineConfig::default()
    }
}

fn bin_mean_corrections(out: &pbc_core::pipeline::ReplayOutput) -> Vec<f64> {
    (0..4)
        .map(|k| {
            let v: Vec<f64> = out.params.iter().filter_map(|p| p.debias_mean_correction[k]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect()
}

fn add_to_free_bins(values: &mut [f64], bins: usize, delta: f64) {
    for (i, v) in values.iter_mut().enumerate() {
        if i % bins != bins - 1 {
            *v += delta;
        }
    }
}

fn c4_debias_recovery() -> Outcome {
    let start = Instant::now();
    let mut cfg = held_out_year();
    cfg.debias.candidates = vec![[35, 1]];
    cfg.debias.training_years = 20;
    let exec = pbc_core::Exec::default();

    // +0.2 added to F(1..4) of every raw forecast and training CDF
    let inputs = biased_inputs(40, 10, 20, BiasProfile::zero());
    let mut prep = prepare_replay(exec, &inputs, &cfg).map_err(|e| e.to_string())?;
    add_to_free_bins(prep.raw.values_mut(), 5, 0.2);
    add_to_free_bins(prep.observed_series.values_mut(), 5, 0.2);
    let out = replay_prepared(exec, &prep).map_err(|e| e.to_string())?;
    let el = start.elapsed();
    let per_bin = bin_mean_corrections(&out);
    let agg = |m: &str| {
        out.score("rpss_aggregated", m)
            .and_then(|r| r.value)
            .unwrap_or(f64::NAN)
    };
    let gain = agg("pbc") - agg("raw");
    let within = per_bin.iter().all(|c| (c + 0.2).abs() <= 0.02);

    // for reference: the same shift applied to members in percentile space
    let shifted = biased_inputs(
        40,
        10,
        20,
        BiasProfile {
            quantile_shift: 0.2,
            ..BiasProfile::zero()
        },
    );
    let member_space = run_replay(&shifted, &cfg)
        .map(|o| bin_mean_corrections(&o))
        .map_err(|e| e.to_string())?;
    let fmt = |v: &[f64]| v.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(", ");
    check(
        within && gain > 0.05 && el < Duration::from_secs(120),
        format!(
            "mean correction per bin [{}] (target -0.2 +- 0.02); RPSS pbc - raw = {gain:.3} (> 0.05); {:.1?} on 10x20 (< 2 min); member-space shift gives [{}]",
            fmt(&per_bin),
            el,
            fmt(&member_space)
        ),
    )
}

// ---------------------------------------------------------------- 5

fn c5_persistence_recovery() -> Outcome {
    let lead = 19;
    let grid = Arc::new(GridSpec::regular(10.0, -1.5, 2, 0.0, 1.5, 2).unwrap());
    let n = grid.n_cells();
    let bins = 5;
    let mut r = rng(5);
    let t0 = CalendarDate::ymd(2010, 1, 1);
    // verifying dates 60 days apart, so no lag date is another row's outcome
    let train: Vec<CalendarDate> = (0..40).map(|i| t0.add_days(60 * i)).collect();
    let t_star = t0.add_days(60 * 40);

    let mut obs: BTreeMap<CalendarDate, Vec<f64>> = BTreeMap::new();
    let mut clim: BTreeMap<CalendarDate, Vec<f64>> = BTreeMap::new();
    let mut fvals = Vec::new();
    let random_row = |r: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n * bins)
            .map(|i| if i % bins == bins - 1 { 1.0 } else { r.random::<f64>() })
            .collect()
    };
    for &t in train.iter().chain([&t_star]) {
        let (a, b) = lag_dates(t, lead);
        obs.insert(a, random_row(&mut r));
        obs.insert(b, random_row(&mut r));
        clim.insert(t, random_row(&mut r));
    }
    for &t in &train {
        let f = random_row(&mut r);
        let c = &clim[&t];
        obs.insert(t, f.iter().zip(c).map(|(f, c)| 0.3 * c + 0.7 * f).collect());
        fvals.extend(f);
    }
    let entries: Vec<SeriesEntry> = train
        .iter()
        .map(|&t| SeriesEntry {
            key: TrainingKey {
                forecast_date: t,
                year_offset: 0,
            },
            verifying: t,
            issued: t.add_days(-lead),
        })
        .collect();
    let series = CdfSeries::new(grid.clone(), Variable::Temperature, lead, bins, entries, fvals.clone()).unwrap();
    let ind = IndicatorField::new(
        grid.clone(),
        Variable::Temperature,
        bins,
        obs.keys().copied().collect(),
        obs.values().flatten().copied().collect(),
    )
    .unwrap();
    let cl = ClimatologyField::new(
        grid.clone(),
        Variable::Temperature,
        bins,
        clim.keys().copied().collect(),
        clim.values().flatten().copied().collect(),
    )
    .unwrap();
    let target = CdfForecast::new(
        grid.clone(),
        Variable::Temperature,
        lead,
        Provenance::Raw,
        bins,
        vec![t_star],
        random_row(&mut r),
    )
    .unwrap();
    let out = persistencepp(&target, t_star, &series, &ind, &cl).map_err(|e| e.to_string())?;

    let expected = [0.0, 0.3, 0.0, 0.0, 0.7];
    let mut coef_err: f64 = 0.0;
    let mut fit_err: f64 = 0.0;
    for g in 0..n {
        for k in 0..bins - 1 {
            let beta = out.weights.get(g, k).ok_or("a (cell, bin) fell back")?;
            for (b, e) in beta.iter().zip(expected) {
                coef_err = coef_err.max((b - e).abs());
            }
            for (i, &t) in train.iter().enumerate() {
                let (a, b) = lag_dates(t, lead);
                let x = [
                    1.0,
                    clim[&t][g * bins + k],
                    obs[&a][g * bins + k],
                    obs[&b][g * bins + k],
                    fvals[(i * n + g) * bins + k],
                ];
                let pred: f64 = x.iter().zip(&beta).map(|(x, b)| x * b).sum();
                fit_err = fit_err.max((pred - obs[&t][g * bins + k]).abs());
            }
        }
    }
    check(
        coef_err <= 1e-6 && fit_err <= 1e-9,
        format!("max coefficient error {coef_err:.1e} (tol 1e-6), max in-sample residual {fit_err:.1e}"),
    )
}

// ---------------------------------------------------------------- 6

fn c6_shift_invariance() -> Outcome {
    let mut cfg = SynthConfig::new(
        6,
        GridSpec::patch(45.0, 0.0, 3, 4).unwrap(),
        23,
        BiasProfile::constant(1.0),
    );
    cfg.members = 9;
    cfg.hindcast_members = 3;
    let w: SyntheticWorld = generate_synthetic_world(&cfg).unwrap();
    // keep every member inside one float binade so dyadic shifts are exact
    let all = w
        .forecasts
        .values()
        .iter()
        .chain(w.hindcasts.iter().flat_map(|h| h.values()));
    if !all.filter(|v| !v.is_nan()).all(|v| (264.0..500.0).contains(v)) {
        return Err("synthetic members leave [264, 500); shifts would not be exact".into());
    }
    let avail = w.forecasts.target_dates().to_vec();
    let base = debiased_baseline(&w.forecasts, &w.hindcasts, &avail, 5).unwrap();
    let base_bits: Vec<u64> = base.values().iter().map(|v| v.to_bits()).collect();
    let mut r = rng(6);
    let mut differing = 0;
    for _ in 0..100 {
        let offset = r.random_range(-2048i32..=2048) as f32 / 256.0;
        let fc = w.forecasts.shifted(offset);
        let hc: Vec<_> = w.hindcasts.iter().map(|h| h.shifted(offset)).collect();
        let f = debiased_baseline(&fc, &hc, &avail, 5).unwrap();
        if f.values().iter().map(|v| v.to_bits()).ne(base_bits.iter().copied()) {
            differing += 1;
        }
    }
    check(
        differing == 0,
        format!("{differing} of 100 dyadic offsets in [-8, 8] changed the debiased CDF bits"),
    )
}

// ---------------------------------------------------------------- 7

fn c7_leakage_guard() -> Outcome {
    let inputs = biased_inputs(7, 3, 4, BiasProfile::constant(1.0));
    let cfg = held_out_year();
    let out = run_replay(&inputs, &cfg).map_err(|e| format!("strict replay failed: {e}"))?;
    let mut bad = cfg.clone();
    bad.cutoff_rule = CutoffRule::Widened { days: 7 };
    let caught = match run_replay(&inputs, &bad) {
        Err(e @ Error::Leakage(_)) => Some(e.to_string()),
        _ => None,
    };
    check(
        out.guard_checks > 0 && caught.is_some(),
        format!(
            "strict: {} audited accesses over {} dates, 0 violations; widened cutoff: {}",
            out.guard_checks,
            out.dates.len(),
            caught.unwrap_or_else(|| "NOT caught".into())
        ),
    )
}

// ---------------------------------------------------------------- 8

fn feature(id: u64, date: CalendarDate, kind: &str, lat: f64, lon: f64) -> String {
    format!(
        r#"{{"type":"Feature","geometry":{{"type":"Point","coordinates":[{lon},{lat}]}},"properties":{{"eventtype":"{kind}","eventid":{id},"alertlevel":"Green","fromdate":"{date}T00:00:00","name":"synthetic"}}}}"#
    )
}

/// One page list per year: `keep` Monday/Friday floods plus midweek floods
/// and earthquakes that the filters must drop.
fn catalog_pages(year: i32, keep: usize, r: &mut ChaCha8Rng) -> Vec<String> {
    let mut days: Vec<CalendarDate> = (0..365).map(|d| CalendarDate::ymd(year, 1, 1).add_days(d)).collect();
    days.retain(|d| d.year() == year);
    let monfri: Vec<CalendarDate> = days
        .iter()
        .copied()
        .filter(|d| matches!(d.weekday().number_from_monday(), 1 | 5))
        .collect();
    let mid: Vec<CalendarDate> = days
        .iter()
        .copied()
        .filter(|d| matches!(d.weekday().number_from_monday(), 2..=4))
        .collect();
    let mut feats = Vec::new();
    let mut id = year as u64 * 10_000;
    for i in 0..keep {
        id += 1;
        feats.push(feature(
            id,
            monfri[i % monfri.len()],
            "FL",
            r.random_range(-60.0..60.0),
            r.random_range(-180.0..180.0),
        ));
    }
    for i in 0..57 {
        id += 1;
        feats.push(feature(id, mid[(i * 7) % mid.len()], "FL", 10.0, 10.0));
        id += 1;
        feats.push(feature(id, monfri[i % monfri.len()], "EQ", 10.0, 10.0));
    }
    feats
        .chunks(100)
        .map(|c| format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, c.join(",")))
        .collect()
}

fn c8_flood_harness() -> Outcome {
    // hand-built two-cell box on the equator
    let grid = Arc::new(GridSpec::new(vec![0.0], vec![10.0, 11.5], vec![1.0, 1.0]).unwrap());
    let d = CalendarDate::ymd(2022, 6, 6);
    let f = CdfForecast::new(
        grid.clone(),
        Variable::Precipitation,
        19,
        Provenance::Pbc,
        5,
        vec![d],
        vec![0.2, 0.4, 0.6, 0.9, 1.0, 0.0, 0.0, 0.0, 0.1, 1.0],
    )
    .unwrap();
    let o = IndicatorField::new(
        grid.clone(),
        Variable::Precipitation,
        5,
        vec![d],
        vec![0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    )
    .unwrap();
    let ev = FloodEvent {
        id: 1,
        lat: 0.0,
        lon: 10.5,
        start: d,
        alert: AlertLevel::Orange,
        name: None,
    };
    let bss =
        flood_bss(&ev, &f, &o, &EvalMask::all(grid.clone(), Variable::Precipitation)).map_err(|e| e.to_string())?;
    let hand = 1.0 - (0.01 + 0.01) / (0.04 + 0.64);
    let bss_err = (bss - hand).abs();

    // paged catalog served by a counting stub
    let mut r = rng(8);
    let pages: BTreeMap<(i32, usize), String> = [(2022, 178), (2023, 166), (2024, 199)]
        .into_iter()
        .flat_map(|(y, n)| {
            catalog_pages(y, n, &mut r)
                .into_iter()
                .enumerate()
                .map(move |(p, body)| ((y, p + 1), body))
        })
        .collect();
    let calls = Cell::new(0usize);
    let transport = |url: &str| -> pbc_core::Result<String> {
        calls.set(calls.get() + 1);
        let year: i32 = url.split("fromDate=").nth(1).unwrap()[..4].parse().unwrap();
        let page: usize = url.rsplit("pagenumber=").next().unwrap().parse().unwrap();
        Ok(pages
            .get(&(year, page))
            .cloned()
            .unwrap_or_else(|| r#"{"type":"FeatureCollection","features":[]}"#.into()))
    };
    let cache = tempfile::tempdir().unwrap();
    let client = GdacsClient::new(&transport, cache.path());
    let events = client.fetch_events(2022..=2024).map_err(|e| e.to_string())?;
    let first_calls = calls.get();
    let again = client.fetch_events(2022..=2024).map_err(|e| e.to_string())?;
    let warm_calls = calls.get() - first_calls;
    let kept = filter_by_issuance(&events, &[chrono::Weekday::Mon, chrono::Weekday::Fri]);
    let counts: Vec<usize> = (2022..=2024)
        .map(|y| kept.iter().filter(|e| e.start.year() == y).count())
        .collect();
    check(
        bss_err <= 1e-12 && counts == [178, 166, 199] && warm_calls == 0 && again == events,
        format!(
            "2-cell BSS {bss:.15} vs hand {hand:.15} (|diff| {bss_err:.1e}, tol 1e-12); Mon/Fri counts {counts:?} = {} total (want 178/166/199); warm-cache calls {warm_calls}",
            counts.iter().sum::<usize>()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c9_determinism() -> Outcome {
    let mut cfg = held_out_year();
    cfg.seed = 99;
    cfg.end = Some(CalendarDate::ymd(2022, 6, 30));
    let run = || -> Result<BTreeMap<String, Vec<u8>>, String> {
        let inputs = biased_inputs(9, 4, 5, BiasProfile::constant(1.0));
        let out = run_replay(&inputs, &cfg).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&out, dir.path()).map_err(|e| e.to_string())?;
        Ok(read_tree(dir.path()))
    };
    let a = run()?;
    let b = run()?;
    let bytes: usize = a.values().map(Vec::len).sum();
    check(
        a == b && !a.is_empty(),
        format!("{} files, {bytes} bytes, identical: {}", a.len(), a == b),
    )
}

// ---------------------------------------------------------------- 10

/// The biased world used for the skill ordering: a latitude-dependent mean
/// bias with a seasonal cycle, under-dispersion and a probability shift.
fn ordering_bias() -> BiasProfile {
    BiasProfile {
        constant: 1.0,
        latitude_gradient: 1.0,
        seasonal_amplitude: 1.0,
        seasonal_period_days: 365.242199,
        spread_inflation: 0.6,
        quantile_shift: 0.1,
    }
}

fn c10_skill_ordering() -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for seed in [101, 102, 103] {
        let inputs = biased_inputs(seed, 6, 10, ordering_bias());
        let out = run_replay(&inputs, &held_out_year()).map_err(|e| e.to_string())?;
        let agg = |m: &str| {
            out.score("rpss_aggregated", m)
                .and_then(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        let (raw, dpp, pbc) = (agg("raw"), agg("debiaspp"), agg("pbc"));
        ok &= pbc - dpp > 0.01 && dpp - raw > 0.01;
        rows.push(format!("seed {seed}: raw {raw:.3} < debias++ {dpp:.3} < pbc {pbc:.3}"));
    }
    check(ok, format!("{} (each gap > 0.01)", rows.join("; ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("PAVA matches the exact QP oracle", c1_pava_vs_oracle),
        ("projection never increases RPS", c2_projection_never_hurts),
        ("climatological and perfect scoring identities", c3_scoring_identities),
        ("Debias++ recovers an injected +0.2 bias", c4_debias_recovery),
        ("Persistence++ recovers exact linear data", c5_persistence_recovery),
        ("debiased baseline is shift invariant", c6_shift_invariance),
        ("leakage guard", c7_leakage_guard),
        ("flood harness", c8_flood_harness),
        ("byte-identical replays", c9_determinism),
        ("skill ordering PBC > Debias++ > raw", c10_skill_ordering),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {:>2}", i + 1);
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.contains(f.as_str()) || id.ends_with(f.as_str()))
        {
            continue;
        }
        let start = Instant::now();
        let res = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let el = start.elapsed();
        match res {
            Ok(d) => println!("{id} PASS  {name} [{el:.1?}]: {d}"),
            Err(d) => {
                failed += 1;
                println!("{id} FAIL  {name} [{el:.1?}]: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
