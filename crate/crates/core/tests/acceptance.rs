//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use gazeshift::clustering::{dbscan, ClusterParams};
use gazeshift::fixation::{coefficient_of_variation, detect_fixations, FixationParams};
use gazeshift::ingest::write_gaze_csv;
use gazeshift::markov::{build_transition_matrix, StateSequence};
use gazeshift::stats::{
    histogram_2d, jensen_shannon_distance, js_divergence, kolmogorov_survival, ks_statistic, ks_two_sample,
    shared_histograms,
};
use gazeshift::synth::{generate_synthetic_session, presets};
use gazeshift::{analyze_recording, analyze_session, compare_sessions, emit_report, PipelineConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Half the values at `mu - sigma`, half at `mu + sigma`.
fn two_point(mu: f64, sigma: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i % 2 == 0 { mu - sigma } else { mu + sigma })
        .collect()
}

fn criterion_1() -> Outcome {
    let clear = coefficient_of_variation(&two_point(0.25, 0.12, 10_000)).map_err(|e| e.to_string())?;
    let rainy = coefficient_of_variation(&two_point(0.53, 0.19, 10_000)).map_err(|e| e.to_string())?;
    check(
        (clear - 0.48).abs() <= 0.01 && (rainy - 0.358).abs() <= 0.01,
        format!("CV clear {clear:.4} (0.48 +/- 0.01), rainy {rainy:.4} (0.358 +/- 0.01)"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut agree = 0;
    for _ in 0..100 {
        let (points, eps, min_pts) = common::random_instance(&mut rng);
        let params = ClusterParams::new(eps, min_pts).map_err(|e| e.to_string())?;
        let got = dbscan(&points, &params).map_err(|e| e.to_string())?;
        let want = common::reference_dbscan(&points, eps, min_pts);
        if common::partition(got.labels()) == common::partition(&want)
            && got.noise() == want.iter().map(Option::is_none).collect::<Vec<_>>()
        {
            agree += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        agree == 100 && elapsed < Duration::from_secs(5),
        format!("{agree}/100 instances match the reference, {elapsed:.2?} (< 5 s)"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let spec = presets::clear_weather(1800.0, 1);
    let (session, truth) = generate_synthetic_session(&spec).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let report = analyze_recording(&session, 0, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let k = report.meta_clusters.len();
    if k != truth.regions.len() {
        return Err(format!("{k} meta-clusters, expected {}", truth.regions.len()));
    }
    let meta_eps = report.config.meta_eps_px.expect("resolved config");
    // Planted region -> nearest meta-cluster.
    let map: Vec<usize> = truth
        .regions
        .iter()
        .map(|r| {
            report
                .meta_clusters
                .iter()
                .min_by(|a, b| a.center.dist(&r.center_px).total_cmp(&b.center.dist(&r.center_px)))
                .expect("k > 0")
                .id
        })
        .collect();
    let mut distinct = map.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let center_err = truth
        .regions
        .iter()
        .zip(&map)
        .map(|(r, &m)| report.meta_clusters[m].center.dist(&r.center_px))
        .fold(0.0, f64::max);
    let probs = &report.transitions.matrix.probs;
    let mut max_dev: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            max_dev = max_dev.max((probs[map[i]][map[j]] - truth.chain[i][j]).abs());
        }
    }
    check(
        distinct.len() == k && center_err <= meta_eps && max_dev <= 0.05 && elapsed < Duration::from_secs(10),
        format!(
            "{} samples, {k} meta-clusters, max center error {center_err:.1} px (<= {meta_eps}), \
             max |P - planted| {max_dev:.4} (<= 0.05), {elapsed:.2?} (< 10 s)",
            session.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let period = 1.0 / 30.0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 1..=20u64 {
        let spec = if seed % 2 == 0 {
            presets::rainy_weather(120.0, seed)
        } else {
            presets::clear_weather(120.0, seed)
        };
        let (session, truth) = generate_synthetic_session(&spec).map_err(|e| e.to_string())?;
        let found = detect_fixations(&session, &FixationParams::default()).map_err(|e| e.to_string())?;
        if found.len() != truth.fixations.len() {
            failures.push(format!(
                "seed {seed}: {} detected vs {} planted",
                found.len(),
                truth.fixations.len()
            ));
            continue;
        }
        for (f, p) in found.iter().zip(&truth.fixations) {
            worst = worst.max((f.duration - p.duration()).abs());
        }
    }
    check(
        failures.is_empty() && worst <= period,
        if failures.is_empty() {
            format!("20/20 scenarios: counts equal, max duration error {worst:.2e} s (<= 1/30 s)")
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_5() -> Outcome {
    let mut bad = Vec::new();
    let a = [0.3, 0.1, 0.7, 1.2];
    let same = ks_two_sample(&a, &a).map_err(|e| e.to_string())?;
    if (same.statistic, same.p_value) != (0.0, 1.0) {
        bad.push("K-S identity");
    }
    if ks_statistic(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).ok() != Some(1.0) {
        bad.push("K-S disjoint");
    }
    if ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[1.5, 2.5, 3.5, 4.5]).ok() != Some(0.25) {
        bad.push("K-S fixture");
    }
    let pts = [(0.5f64, 0.5f64), (1.5, 2.5), (-3.0, 1.0)];
    let h = histogram_2d(&pts, 1.0).map_err(|e| e.to_string())?;
    if jensen_shannon_distance(&h, &h).ok() != Some(0.0) {
        bad.push("JSD identity");
    }
    let far = [(40.5, 40.5), (41.5, 40.5)];
    let (ha, hb) = shared_histograms(&pts, &far, 1.0).map_err(|e| e.to_string())?;
    let disjoint = jensen_shannon_distance(&ha, &hb).map_err(|e| e.to_string())?;
    if (disjoint - 1.0).abs() > 1e-6 {
        bad.push("JSD disjoint");
    }
    let hand = js_divergence(&[0.5f64, 0.5], &[1.0, 0.0]).sqrt();
    if (hand - 0.5579).abs() > 1e-4 {
        bad.push("JSD hand case");
    }

    // Row sums and histogram mass over a batch of random inputs.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst_row: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    for _ in 0..200 {
        use rand::Rng;
        let k = rng.random_range(1..8);
        let labels: Vec<usize> = (0..rng.random_range(2..300)).map(|_| rng.random_range(0..k)).collect();
        let m = build_transition_matrix::<f64>(&StateSequence::from_labels(labels), k).map_err(|e| e.to_string())?;
        for (i, row) in m.probs.iter().enumerate() {
            if !m.zero_rows.contains(&i) {
                worst_row = worst_row.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
        let pts: Vec<(f64, f64)> = (0..rng.random_range(1..500))
            .map(|_| (rng.random_range(-60.0..60.0), rng.random_range(-30.0..30.0)))
            .collect();
        let h = histogram_2d(&pts, rng.random_range(0.2..4.0)).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((h.total_mass() - 1.0).abs());
    }
    if worst_row > 1e-9 {
        bad.push("row sums");
    }
    if worst_mass > 1e-9 {
        bad.push("histogram mass");
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "K-S and JSD fixtures exact; JSD hand case {hand:.5}; max row-sum error {worst_row:.1e}, \
                 max mass error {worst_mass:.1e} (<= 1e-9)"
            )
        } else {
            format!("failed: {}", bad.join(", "))
        },
    )
}

fn criterion_6() -> Outcome {
    let cfg = PipelineConfig::default();
    let (clear, _) = generate_synthetic_session(&presets::clear_weather(900.0, 61)).map_err(|e| e.to_string())?;
    let (rainy, _) = generate_synthetic_session(&presets::rainy_weather(900.0, 62)).map_err(|e| e.to_string())?;
    let a = analyze_recording(&clear, 0, &cfg).map_err(|e| e.to_string())?;
    let b = analyze_recording(&rainy, 0, &cfg).map_err(|e| e.to_string())?;
    let cmp = compare_sessions(&a, &b).map_err(|e| e.to_string())?;

    // Independent check: D from explicit ECDFs, p from the plain alternating series.
    let (da, db) = (a.filtered_durations(), b.filtered_durations());
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    let d_oracle = da
        .iter()
        .chain(&db)
        .map(|&x| (cdf(&da, x) - cdf(&db, x)).abs())
        .fold(0.0, f64::max);
    let lambda = ((da.len() * db.len()) as f64 / (da.len() + db.len()) as f64).sqrt() * d_oracle;
    let p_oracle = (2.0
        * (1..=100)
            .map(|k| {
                let k = f64::from(k);
                (if k % 2.0 == 1.0 { 1.0 } else { -1.0 }) * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum::<f64>())
    .clamp(0.0, 1.0);

    let ratio = b.fixation_stats.mean_s / a.fixation_stats.mean_s;
    let p = cmp.ks_durations.p_value;
    check(
        da.len() >= 1000
            && db.len() >= 1000
            && p < 1e-4
            && p_oracle < 1e-4
            && (cmp.ks_durations.statistic - d_oracle).abs() < 1e-12
            && (1.8..=2.4).contains(&ratio)
            && kolmogorov_survival(lambda) < 1e-4,
        format!(
            "n = {} / {}, D = {:.4}, p = {p:.1e} (oracle {p_oracle:.1e}, < 1e-4), mean {:.4} s vs {:.4} s, \
             ratio {ratio:.3} (in [1.8, 2.4])",
            da.len(),
            db.len(),
            cmp.ks_durations.statistic,
            a.fixation_stats.mean_s,
            b.fixation_stats.mean_s
        ),
    )
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("drive.csv");
    let (session, _) = generate_synthetic_session(&presets::clear_weather(300.0, 7)).map_err(|e| e.to_string())?;
    write_gaze_csv(&session, fs::File::create(&input).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let mut outputs = Vec::new();
    for run in 0..3 {
        let out = dir.path().join(format!("run{run}"));
        let report = analyze_session(&input, &cfg).map_err(|e| e.to_string())?;
        emit_report(&report, &out).map_err(|e| e.to_string())?;
        outputs.push(fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    check(
        outputs.windows(2).all(|w| w[0] == w[1]),
        format!("3 runs, report.json {} bytes each, identical", outputs[0].len()),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 CV arithmetic anchors", criterion_1),
        ("2 clustering oracle equivalence", criterion_2),
        ("3 planted-truth end-to-end", criterion_3),
        ("4 fixation recovery", criterion_4),
        ("5 statistical machinery", criterion_5),
        ("6 clear vs rainy comparison", criterion_6),
        ("7 determinism", criterion_7),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
