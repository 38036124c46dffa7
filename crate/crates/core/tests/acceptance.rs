//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Reference values come from independent scalar or brute-force
//! implementations written here, never from the library under test.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use textsignal::cascade::{run_cascade, CascadeConfig, CascadeInput, LocalPopulation};
use textsignal::manifold::{epsilon_edges, twonn_estimate, NeighborIndex, PointCloud};
use textsignal::partition::{density_core_label, kmeans_fit, kmeans_fit_best, KMeansConfig};
use textsignal::pipeline::{artifact_checksums, synthetic_corpus, Pipeline, PipelineConfig, DEMO_CORPUS_SIZE};
use textsignal::semantics::{band_of, band_profile, read_scores_csv, score_dimension, ProfilePopulation};
use textsignal::{PositionalDictionary, ScoreVector};

/// Writes straight to stderr so the line shows up even when libtest captures output.
fn verdict(n: u8, name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let line = format!("[{}] criterion {n}: {name} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------- 1

#[test]
fn c1_scoring_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_complement = 0.0f64;
    let mut worst_shift = 0.0f64;
    for _ in 0..10_000 {
        let scale = [1.0, 10.0, 100.0, 1e4][rng.random_range(0..4)];
        let a = rng.random_range(-scale..scale);
        let b = rng.random_range(-scale..scale);
        let c = rng.random_range(-100.0..100.0);
        let s = score_dimension(a, b).unwrap();
        let t = score_dimension(b, a).unwrap();
        worst_complement = worst_complement.max((s + t - 1.0).abs());
        if (b - a).abs() < 700.0 {
            let shifted = score_dimension(a + c, b + c).unwrap();
            worst_shift = worst_shift.max((shifted - s).abs());
        }
    }
    let saturate = [(0.0, 1000.0), (-1e6, -1e6 + 1000.0), (1e300, 1e300 + 1e290)]
        .iter()
        .all(|&(lo, hi)| score_dimension(lo, hi).unwrap() == 1.0 && score_dimension(hi, lo).unwrap() == 0.0);
    let elapsed = start.elapsed();
    let pass = worst_complement <= 1e-12 && worst_shift <= 1e-12 && saturate && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "scoring identities",
        pass,
        &format!("complement err {worst_complement:.1e}, shift err {worst_shift:.1e}, saturation {saturate}, {elapsed:.2?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

struct Scene {
    ids: Vec<String>,
    xy: Vec<[f64; 2]>,
    core: Vec<bool>,
    regions: Vec<usize>,
    k: usize,
}

fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let n_target = rng.random_range(50..=2000);
    let mut xy = Vec::with_capacity(n_target);
    let mut core = Vec::with_capacity(n_target);
    let n_blobs = rng.random_range(1..=3);
    let scatter_share = rng.random_range(0.0..0.15);
    let n_scatter = (n_target as f64 * scatter_share) as usize;
    let n_islands = rng.random_range(0..=2);
    let island_size = rng.random_range(3..=25);
    let n_blob_total = n_target.saturating_sub(n_scatter + n_islands * island_size).max(n_blobs * 5);
    for b in 0..n_blobs {
        let cx = rng.random_range(-10.0..10.0);
        let cy = rng.random_range(-10.0..10.0);
        let sd = rng.random_range(0.3..2.0);
        let normal = Normal::new(0.0, sd).unwrap();
        for _ in 0..n_blob_total / n_blobs + usize::from(b == 0) {
            xy.push([cx + normal.sample(rng), cy + normal.sample(rng)]);
            core.push(rng.random::<f64>() < 0.8);
        }
    }
    for _ in 0..n_scatter {
        xy.push([rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)]);
        core.push(rng.random::<f64>() < 0.05);
    }
    for _ in 0..n_islands {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(25.0..45.0);
        let (cx, cy) = (r * angle.cos(), r * angle.sin());
        for _ in 0..island_size {
            xy.push([cx + rng.random_range(-0.5..0.5), cy + rng.random_range(-0.5..0.5)]);
            core.push(rng.random::<f64>() < 0.5);
        }
    }
    if !core.iter().any(|&c| c) {
        core[0] = true;
    }
    // Voronoi regions around random sites; some end up tiny or empty.
    let k = rng.random_range(1..=12);
    let sites: Vec<[f64; 2]> = (0..k)
        .map(|_| [rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)])
        .collect();
    let regions = xy
        .iter()
        .map(|p| {
            (0..k)
                .min_by(|&a, &b| dist(p, &sites[a]).total_cmp(&dist(p, &sites[b])))
                .unwrap()
        })
        .collect();
    let mut ids: Vec<String> = (0..xy.len()).map(|i| format!("doc-{i:05}")).collect();
    ids.shuffle(rng);
    Scene { ids, xy, core, regions, k }
}

fn scalar_mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

fn scalar_sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = scalar_mean(v);
    let mut ss = 0.0;
    for x in v {
        ss += (x - m) * (x - m);
    }
    (ss / (v.len() - 1) as f64).sqrt()
}

fn scalar_centroid(points: &[[f64; 2]]) -> [f64; 2] {
    let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
    [scalar_mean(&xs), scalar_mean(&ys)]
}

/// G, L and R by direct recomputation; R by breadth-first search over all pairs.
fn oracle_flags(s: &Scene, cfg: &CascadeConfig) -> (Vec<bool>, Vec<bool>, Vec<bool>) {
    let n = s.xy.len();
    let core_pts: Vec<[f64; 2]> = (0..n).filter(|&i| s.core[i]).map(|i| s.xy[i]).collect();
    let c = scalar_centroid(&core_pts);
    let d: Vec<f64> = s.xy.iter().map(|p| dist(p, &c)).collect();
    let t = scalar_mean(&d) + cfg.global_sigma * scalar_sample_std(&d);
    let g: Vec<bool> = d.iter().map(|&x| x <= t).collect();

    let mut l = vec![true; n];
    for r in 0..s.k {
        let members: Vec<usize> = (0..n).filter(|&i| s.regions[i] == r).collect();
        let calib: Vec<usize> = match cfg.local_stats_population {
            LocalPopulation::FullRegion => members.clone(),
            LocalPopulation::GSurvivors => members.iter().copied().filter(|&i| g[i]).collect(),
        };
        if calib.len() <= 2 {
            continue;
        }
        let rc = scalar_centroid(&calib.iter().map(|&i| s.xy[i]).collect::<Vec<_>>());
        let cd: Vec<f64> = calib.iter().map(|&i| dist(&s.xy[i], &rc)).collect();
        let rt = scalar_mean(&cd) + cfg.local_sigma * scalar_sample_std(&cd);
        for &i in &members {
            l[i] = dist(&s.xy[i], &rc) <= rt;
        }
    }

    let cand: Vec<usize> = (0..n).filter(|&i| g[i] && l[i]).collect();
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for &start in &cand {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &cand {
                if comp[v] == usize::MAX && dist(&s.xy[u], &s.xy[v]) < cfg.eps_kmeans_graph {
                    comp[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        comps.push(members);
    }
    let best = comps
        .iter()
        .max_by(|a, b| {
            let min_a = a.iter().map(|&i| &s.ids[i]).min().unwrap();
            let min_b = b.iter().map(|&i| &s.ids[i]).min().unwrap();
            a.len().cmp(&b.len()).then(min_b.cmp(min_a))
        })
        .unwrap();
    let mut r = vec![false; n];
    for &i in best {
        r[i] = true;
    }
    (g, l, r)
}

#[test]
fn c2_cascade_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatched_scenes = 0;
    let mut total_points = 0;
    for scene_no in 0..200 {
        let scene = random_scene(&mut rng);
        let cfg = CascadeConfig {
            local_stats_population: if scene_no % 2 == 0 {
                LocalPopulation::FullRegion
            } else {
                LocalPopulation::GSurvivors
            },
            ..CascadeConfig::default()
        };
        total_points += scene.xy.len();
        let input = CascadeInput {
            doc_ids: scene.ids.clone(),
            points: PointCloud::from_rows(&scene.xy).unwrap(),
            density_core: scene.core.clone(),
            regions: scene.regions.clone(),
            n_regions: scene.k,
        };
        let out = run_cascade(&input, &cfg).unwrap();
        let (g, l, r) = oracle_flags(&scene, &cfg);
        let ok = out
            .verdicts
            .iter()
            .enumerate()
            .all(|(i, v)| v.g_pass() == g[i] && v.l_pass() == l[i] && v.r_pass() == r[i]);
        if !ok {
            mismatched_scenes += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatched_scenes == 0 && elapsed < Duration::from_secs(60);
    verdict(
        2,
        "cascade oracle equivalence",
        pass,
        &format!("200 scenes, {total_points} points, {mismatched_scenes} mismatched, {elapsed:.2?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 3

#[test]
fn c3_planted_structure_recovery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let radius = 3.0;
    let mut xy = Vec::new();
    // Uniform disc: 1000 points.
    while xy.len() < 1000 {
        let p = [rng.random_range(-radius..radius), rng.random_range(-radius..radius)];
        if dist(&p, &[0.0, 0.0]) <= radius {
            xy.push(p);
        }
    }
    // 5% scatter at 10 to 20 blob radii.
    for _ in 0..50 {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(10.0 * radius..20.0 * radius);
        xy.push([r * angle.cos(), r * angle.sin()]);
    }
    // 20-point island whose nearest point sits 2 units (> eps) off the disc.
    for _ in 0..20 {
        xy.push([radius + 2.5 + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]);
    }
    let n = xy.len();
    let ids: Vec<String> = (0..n).map(|i| format!("p{i:04}")).collect();
    let points = PointCloud::from_rows(&xy).unwrap();
    let core = density_core_label(&points, 0.5, 15).unwrap();
    // One K-Means region per planted structure.
    let fit = kmeans_fit(&points, &KMeansConfig { k: 3, seed: 3, ..KMeansConfig::default() }).unwrap();
    let input = CascadeInput {
        doc_ids: ids,
        points,
        density_core: core,
        regions: fit.labels,
        n_regions: 3,
    };
    let out = run_cascade(&input, &CascadeConfig::default()).unwrap();
    let removed = |range: std::ops::Range<usize>| range.clone().filter(|&i| !out.verdicts[i].retained()).count();
    let blob_removed = removed(0..1000);
    let scatter_removed = removed(1000..1050);
    let island_removed = removed(1050..1070);
    let elapsed = start.elapsed();
    let pass = scatter_removed as f64 >= 0.95 * 50.0
        && island_removed == 20
        && blob_removed as f64 <= 0.02 * 1000.0
        && elapsed < Duration::from_secs(5);
    verdict(
        3,
        "planted structure recovery",
        pass,
        &format!(
            "scatter {scatter_removed}/50, island {island_removed}/20, blob {blob_removed}/1000 removed, {elapsed:.2?}"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

/// Adjusted Rand index from the pair-counting definition.
fn oracle_ari(a: &[usize], b: &[usize]) -> f64 {
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ra: HashMap<usize, u64> = HashMap::new();
    let mut rb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&n| c2(n)).sum();
    let sa: f64 = ra.values().map(|&n| c2(n)).sum();
    let sb: f64 = rb.values().map(|&n| c2(n)).sum();
    let expected = sa * sb / c2(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[test]
fn c4_kmeans_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let centers = [[0.0; 5], [10.0, 0.0, 0.0, 0.0, 0.0], [0.0, 10.0, 0.0, 0.0, 0.0]];
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..300 {
            rows.push(c.map(|x| x + normal.sample(&mut rng)));
            truth.push(label);
        }
    }
    let points = PointCloud::from_rows(&rows).unwrap();
    let cfg = KMeansConfig { k: 3, seed: 4, ..KMeansConfig::default() };
    let fit = kmeans_fit_best(&points, &cfg, 10).unwrap();
    let again = kmeans_fit_best(&points, &cfg, 10).unwrap();
    let ari = oracle_ari(&truth, &fit.labels);
    let monotone = fit.inertia_trace.windows(2).all(|w| w[1] <= w[0]);
    let bits = |f: &textsignal::partition::KMeansFit| {
        f.model
            .centroids
            .iter()
            .flatten()
            .map(|x| x.to_bits())
            .collect::<Vec<_>>()
    };
    let reproducible = fit.labels == again.labels
        && bits(&fit) == bits(&again)
        && fit.model.inertia.to_bits() == again.model.inertia.to_bits();
    let elapsed = start.elapsed();
    let pass = ari == 1.0 && monotone && reproducible && elapsed < Duration::from_secs(5);
    verdict(
        4,
        "k-means correctness",
        pass,
        &format!(
            "ARI {ari}, {} iterations monotone {monotone}, bit-reproducible {reproducible}, {elapsed:.2?}",
            fit.inertia_trace.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5

/// TwoNN by exhaustive neighbour search: d = N' / sum ln(r2 / r1).
fn oracle_twonn(rows: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut valid = 0usize;
    for (i, p) in rows.iter().enumerate() {
        let (mut r1, mut r2) = (f64::INFINITY, f64::INFINITY);
        for (j, q) in rows.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = dist(p, q);
            if d < r1 {
                r2 = r1;
                r1 = d;
            } else if d < r2 {
                r2 = d;
            }
        }
        if r1 > 0.0 {
            sum += (r2 / r1).ln();
            valid += 1;
        }
    }
    valid as f64 / sum
}

#[test]
fn c5_twonn_calibration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cube: Vec<Vec<f64>> = (0..10_000)
        .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
        .collect();
    let dir = [0.3, -0.5, 0.1, 0.7, 0.4];
    let norm = dir.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
    let segment: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            let t: f64 = rng.random();
            dir.iter().map(|d| 1.0 + t * d / norm).collect()
        })
        .collect();
    let d_cube = twonn_estimate(&PointCloud::from_rows(&cube).unwrap()).unwrap().dimension;
    let d_seg = twonn_estimate(&PointCloud::from_rows(&segment).unwrap()).unwrap().dimension;
    let lib_elapsed = start.elapsed();
    let oracle_cube = oracle_twonn(&cube);
    let oracle_seg = oracle_twonn(&segment);
    let agree = (d_cube - oracle_cube).abs() < 1e-9 && (d_seg - oracle_seg).abs() < 1e-9;
    let pass = (3.6..=4.4).contains(&d_cube)
        && (0.85..=1.15).contains(&d_seg)
        && agree
        && lib_elapsed < Duration::from_secs(30);
    verdict(
        5,
        "TwoNN calibration",
        pass,
        &format!("4D cube {d_cube:.3}, 1D segment {d_seg:.3}, matches brute force {agree}, {lib_elapsed:.2?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

fn oracle_band(s: f64) -> usize {
    if s <= 0.25 {
        0
    } else if s <= 0.5 {
        1
    } else if s <= 0.75 {
        2
    } else {
        3
    }
}

fn oracle_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 0 {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    } else {
        s[n / 2]
    }
}

#[test]
fn c6_profiler_exactness() {
    let mut dict = PositionalDictionary::ai_news();
    dict.centrality_target = None;
    let dims: Vec<String> = dict.dim_ids().map(str::to_owned).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();

    // Hand-built: exact edges land in the lower band.
    let edge_values = [0.0, 0.25, 0.2500001, 0.5, 0.75, 0.7500001, 1.0, 0.5000001];
    // {0, .25} {.2500001, .5} {.5000001, .75} {.7500001, 1}
    let expected_edges = [0.25; 4];
    for (i, &v) in edge_values.iter().enumerate() {
        if band_of(v) != oracle_band(v) {
            failures.push(format!("band_of({v}) at {i}"));
        }
    }

    for trial in 0..50 {
        let n = if trial == 0 { edge_values.len() } else { rng.random_range(1..400) };
        let scores: Vec<ScoreVector> = (0..n)
            .map(|i| {
                let map = dims
                    .iter()
                    .map(|d| {
                        let v = if trial == 0 {
                            edge_values[i]
                        } else if rng.random::<f64>() < 0.2 {
                            [0.0, 0.25, 0.5, 0.75, 1.0][rng.random_range(0..5)]
                        } else {
                            rng.random::<f64>()
                        };
                        (d.clone(), v)
                    })
                    .collect();
                ScoreVector::new(format!("d{i}"), map, None).unwrap()
            })
            .collect();
        let refs: Vec<&ScoreVector> = scores.iter().collect();
        let profile = band_profile(&refs, &dict, ProfilePopulation::All, 3.0).unwrap();
        for d in &dims {
            let values: Vec<f64> = scores.iter().map(|s| s.score(d).unwrap()).collect();
            let mut counts = [0usize; 4];
            for &v in &values {
                counts[oracle_band(v)] += 1;
            }
            let fractions = counts.map(|c| c as f64 / n as f64);
            let got = profile.band_fractions[d];
            if got != fractions {
                failures.push(format!("trial {trial} {d}: fractions {got:?} != {fractions:?}"));
            }
            if trial == 0 && got != expected_edges {
                failures.push(format!("edge fixture {got:?}"));
            }
            if (got.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                failures.push(format!("trial {trial} {d}: row sums to {}", got.iter().sum::<f64>()));
            }
            let st = profile.stats[d];
            let checks = [
                (st.mean, scalar_mean(&values)),
                (st.continuous_median, oracle_median(&values)),
                (st.sample_std, scalar_sample_std(&values)),
            ];
            if checks.iter().any(|(a, b)| (a - b).abs() > 1e-9) {
                failures.push(format!("trial {trial} {d}: stats {checks:?}"));
            }
        }
    }

    // Stored snapshot reproducing the published opportunity/risk row.
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/opportunity_risk_snapshot.csv");
    let snapshot = read_scores_csv(std::path::Path::new(data)).unwrap();
    let mut one = PositionalDictionary::ai_news();
    one.dimensions.retain(|d| d.dim_id == "opportunity_risk");
    let refs: Vec<&ScoreVector> = snapshot.iter().collect();
    let golden = band_profile(&refs, &one, ProfilePopulation::All, 3.0).unwrap();
    let golden_row = golden.band_fractions["opportunity_risk"];
    if golden_row != [0.03, 0.89, 0.08, 0.0] {
        failures.push(format!("snapshot row {golden_row:?}"));
    }

    let pass = failures.is_empty();
    verdict(
        6,
        "profiler exactness",
        pass,
        &if pass {
            format!("50 score sets x {} dimensions, snapshot row {golden_row:?}", dims.len())
        } else {
            failures.join("; ")
        },
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7

#[test]
fn c7_end_to_end_determinism() {
    let scratch = tempfile::tempdir().unwrap();
    let source = scratch.path().join("demo.jsonl");
    textsignal::io::write_jsonl(&source, &synthetic_corpus(DEMO_CORPUS_SIZE, 42)).unwrap();

    let mut runs = Vec::new();
    let mut timings = Vec::new();
    for run in 0..2 {
        let workdir = scratch.path().join(format!("run{run}"));
        let start = Instant::now();
        let pipeline = Pipeline::new(&workdir, PipelineConfig::default()).unwrap();
        let report = pipeline.run_all(&source).unwrap();
        timings.push(start.elapsed());
        let checksums = artifact_checksums(pipeline.workdir()).unwrap();
        let verdicts =
            textsignal::cascade::read_verdicts_csv(&pipeline.workdir().path("verdicts.csv")).unwrap();
        runs.push((report, checksums, verdicts));
    }
    let (report, sums_a, verdicts) = &runs[0];
    let identical = sums_a == &runs[1].1 && sums_a.len() >= 20;

    // Recount the report from the verdict file.
    let removed = verdicts.iter().filter(|v| !v.retained()).count();
    let not_g = verdicts.iter().filter(|v| !v.g_pass()).count();
    let not_l = verdicts.iter().filter(|v| !v.l_pass()).count();
    let structural = verdicts.iter().filter(|v| v.g_pass() && v.l_pass() && !v.r_pass()).count();
    let consistent = report.n_total == DEMO_CORPUS_SIZE
        && report.n_unique_removed == removed
        && report.n_global_outliers == not_g
        && report.n_local_mavericks == not_l
        && report.n_structural_outliers == structural
        && report.n_unique_removed
            <= report.n_global_outliers + report.n_local_mavericks + report.n_structural_outliers
        && (report.removal_fraction - removed as f64 / DEMO_CORPUS_SIZE as f64).abs() < 1e-15;
    let fast = timings.iter().all(|t| *t < Duration::from_secs(120));
    let pass = identical && consistent && fast;
    verdict(
        7,
        "end-to-end determinism",
        pass,
        &format!(
            "{} artifacts identical {identical}, report consistent {consistent}, removed {removed}/{}, runs {:.1?} and {:.1?}",
            sums_a.len(),
            report.n_total,
            timings[0],
            timings[1]
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 8

fn brute_knn(rows: &[Vec<f64>], q: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = rows.iter().enumerate().map(|(i, p)| (i, dist(p, q))).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

#[test]
fn c8_index_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut knn_queries = 0usize;
    let mut knn_mismatch = 0usize;
    let mut edge_mismatch = 0usize;
    let mut edges_checked = 0usize;
    for trial in 0..100 {
        let n = rng.random_range(1..=500);
        let dim = if trial % 2 == 0 { 2 } else { rng.random_range(3..=6) };
        // Every fourth trial snaps coordinates to a coarse lattice so ties and
        // exact-eps pairs actually occur.
        let lattice = trial % 4 == 1;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        if lattice {
                            f64::from(rng.random_range(0..8)) * 0.5
                        } else {
                            rng.random_range(-5.0..5.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let index = NeighborIndex::build(cloud.clone()).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = if rng.random::<bool>() {
                rows[rng.random_range(0..n)].clone()
            } else {
                (0..dim).map(|_| rng.random_range(-6.0..6.0)).collect()
            };
            let k = rng.random_range(1..=n.min(25));
            let got: Vec<(usize, f64)> = index.knn(&q, k).unwrap().iter().map(|nb| (nb.index, nb.distance)).collect();
            knn_queries += 1;
            if got != brute_knn(&rows, &q, k) {
                knn_mismatch += 1;
            }
        }
        let eps = if lattice { 1.0 } else { rng.random_range(0.2..2.5) };
        let got: BTreeSet<(usize, usize)> = epsilon_edges(&cloud, eps).unwrap().into_iter().collect();
        let mut want = BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                if dist(&rows[i], &rows[j]) < eps {
                    want.insert((i, j));
                }
            }
        }
        edges_checked += want.len();
        if got != want {
            edge_mismatch += 1;
        }
    }
    let pass = knn_mismatch == 0 && edge_mismatch == 0;
    verdict(
        8,
        "kNN and epsilon-graph index correctness",
        pass,
        &format!(
            "100 trials, {knn_queries} kNN queries ({knn_mismatch} wrong), {edges_checked} edges ({edge_mismatch} trials wrong)"
        ),
    );
    assert!(pass);
}
