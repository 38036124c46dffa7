//! Three-pass noise reduction over the 2D map.
//!
//! 1. Global: distance to the centroid of the density core, thresholded at
//!    `mean + global_sigma * std` of the distances of *all* points.
//! 2. Local: distance to the document's own K-Means region centroid,
//!    thresholded at `mean_K + local_sigma * std_K` within that region.
//! 3. Structural: documents surviving both are linked when closer than
//!    `eps_kmeans_graph`; only the largest connected component is kept.
//!
//! A document is retained iff it passes all three. Standard deviations use
//! the `n - 1` denominator.

mod stats;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::epsilon_components;
use crate::io::{csv_bytes, write_atomic};
use crate::manifold::{euclidean, PointCloud};
use crate::model::{FilterVerdict, RegionAssignment};
use crate::partition::DensityCoreLabel;

use stats::{centroid2, mean, sample_std};

/// Which region members calibrate the local filter's centroid and spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LocalPopulation {
    #[default]
    FullRegion,
    GSurvivors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    pub global_sigma: f64,
    pub local_sigma: f64,
    pub eps_kmeans_graph: f64,
    pub eps_density_graph: f64,
    pub local_stats_population: LocalPopulation,
    /// Regions keeping less than this fraction of their members are flagged unstable.
    pub min_region_survival: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            global_sigma: 1.2,
            local_sigma: 1.8,
            eps_kmeans_graph: 1.2,
            eps_density_graph: 1.0,
            local_stats_population: LocalPopulation::FullRegion,
            min_region_survival: 0.5,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("global_sigma", self.global_sigma),
            ("local_sigma", self.local_sigma),
            ("eps_kmeans_graph", self.eps_kmeans_graph),
            ("eps_density_graph", self.eps_density_graph),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.min_region_survival) {
            return Err(Error::Parameter("min_region_survival must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn check_2d(points: &PointCloud) -> Result<()> {
    if points.dim() != 2 {
        return Err(Error::Parameter(format!("map points must be 2D, got {}D", points.dim())));
    }
    Ok(())
}

fn xy(points: &PointCloud, i: usize) -> [f64; 2] {
    let r = points.row(i);
    [r[0], r[1]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPass {
    pub centroid: [f64; 2],
    pub mean: f64,
    pub std: f64,
    pub threshold: f64,
    pub distances: Vec<f64>,
    pub pass: Vec<bool>,
}

/// Global outlier filter. The centroid is taken over the density core only;
/// distance statistics are taken over every point.
pub fn global_filter(points: &PointCloud, core: &[bool], sigma_mult: f64) -> Result<GlobalPass> {
    check_2d(points)?;
    if core.len() != points.len() {
        return Err(Error::Parameter("core labels and points differ in length".into()));
    }
    let members: Vec<usize> = (0..points.len()).filter(|&i| core[i]).collect();
    if members.is_empty() {
        return Err(Error::Configuration(
            "density core is empty; loosen the density parameters (larger eps or smaller min_pts)".into(),
        ));
    }
    let centroid = centroid2(members.iter().map(|&i| xy(points, i)));
    let distances: Vec<f64> = points.rows().map(|p| euclidean(p, &centroid)).collect();
    let mu = mean(&distances);
    let sd = sample_std(&distances, mu);
    let threshold = mu + sigma_mult * sd;
    let pass = distances.iter().map(|&d| d <= threshold).collect();
    Ok(GlobalPass {
        centroid,
        mean: mu,
        std: sd,
        threshold,
        distances,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub members: usize,
    pub population: usize,
    pub centroid: Option<[f64; 2]>,
    pub mean: f64,
    pub std: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalPass {
    pub distances: Vec<f64>,
    pub pass: Vec<bool>,
    pub regions: BTreeMap<usize, RegionStats>,
}

/// Local-maverick filter. With [`LocalPopulation::GSurvivors`], `g_pass`
/// selects which members calibrate each region; it is ignored otherwise.
/// Regions whose calibrating population has two or fewer members pass whole.
pub fn local_filter(
    points: &PointCloud,
    regions: &[usize],
    sigma_mult: f64,
    population: LocalPopulation,
    g_pass: Option<&[bool]>,
) -> Result<LocalPass> {
    check_2d(points)?;
    if regions.len() != points.len() {
        return Err(Error::Parameter("regions and points differ in length".into()));
    }
    if population == LocalPopulation::GSurvivors && g_pass.is_none_or(|g| g.len() != points.len()) {
        return Err(Error::Parameter("g_survivors population needs one global flag per point".into()));
    }
    let mut by_region: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &r) in regions.iter().enumerate() {
        by_region.entry(r).or_default().push(i);
    }
    let mut distances = vec![0.0; points.len()];
    let mut pass = vec![true; points.len()];
    let mut stats = BTreeMap::new();
    for (&region, members) in &by_region {
        let calib: Vec<usize> = match population {
            LocalPopulation::FullRegion => members.clone(),
            LocalPopulation::GSurvivors => {
                let g = g_pass.expect("checked above");
                members.iter().copied().filter(|&i| g[i]).collect()
            }
        };
        if calib.is_empty() {
            stats.insert(
                region,
                RegionStats {
                    members: members.len(),
                    population: 0,
                    centroid: None,
                    mean: 0.0,
                    std: 0.0,
                    threshold: f64::INFINITY,
                },
            );
            continue;
        }
        let c = centroid2(calib.iter().map(|&i| xy(points, i)));
        for &i in members {
            distances[i] = euclidean(points.row(i), &c);
        }
        let calib_d: Vec<f64> = calib.iter().map(|&i| distances[i]).collect();
        let mu = mean(&calib_d);
        let sd = sample_std(&calib_d, mu);
        let threshold = if calib.len() <= 2 {
            f64::INFINITY
        } else {
            mu + sigma_mult * sd
        };
        for &i in members {
            pass[i] = distances[i] <= threshold;
        }
        stats.insert(
            region,
            RegionStats {
                members: members.len(),
                population: calib.len(),
                centroid: Some(c),
                mean: mu,
                std: sd,
                threshold,
            },
        );
    }
    Ok(LocalPass {
        distances,
        pass,
        regions: stats,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralPass {
    pub pass: Vec<bool>,
    /// Component sizes, largest first.
    pub component_sizes: Vec<usize>,
}

/// Keeps the largest connected component of the ε-graph over `candidates`.
/// Equal-size components are ranked by their smallest `doc_id`. Points that
/// are not candidates never pass.
pub fn structural_filter(
    points: &PointCloud,
    doc_ids: &[String],
    candidates: &[bool],
    eps: f64,
) -> Result<StructuralPass> {
    check_2d(points)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Parameter(format!("eps {eps} must be positive")));
    }
    if candidates.len() != points.len() || doc_ids.len() != points.len() {
        return Err(Error::Parameter("structural filter inputs differ in length".into()));
    }
    let members: Vec<usize> = (0..points.len()).filter(|&i| candidates[i]).collect();
    if members.is_empty() {
        return Err(Error::Configuration(
            "no documents reach the structural pass; thresholds remove everything".into(),
        ));
    }
    let comps = epsilon_components(&points.subset(&members), eps)?;
    let mut ranked: Vec<(usize, &str, &Vec<usize>)> = comps
        .iter()
        .map(|c| {
            let min_id = c.iter().map(|&k| doc_ids[members[k]].as_str()).min().unwrap();
            (c.len(), min_id, c)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    let mut pass = vec![false; points.len()];
    for &k in ranked[0].2 {
        pass[members[k]] = true;
    }
    Ok(StructuralPass {
        pass,
        component_sizes: ranked.iter().map(|r| r.0).collect(),
    })
}

/// Documents aligned for the cascade: 2D position, density flag, region.
#[derive(Debug, Clone)]
pub struct CascadeInput {
    pub doc_ids: Vec<String>,
    pub points: PointCloud,
    pub density_core: Vec<bool>,
    pub regions: Vec<usize>,
    /// K of the partition, so empty regions still show up in the report.
    pub n_regions: usize,
}

impl CascadeInput {
    /// Aligns density labels and region assignments to `doc_ids` by id.
    pub fn align(
        doc_ids: Vec<String>,
        points: PointCloud,
        core_labels: &[DensityCoreLabel],
        regions: &[RegionAssignment],
        n_regions: usize,
    ) -> Result<Self> {
        check_2d(&points)?;
        if doc_ids.len() != points.len() {
            return Err(Error::Parameter("doc ids and points differ in length".into()));
        }
        let core: HashMap<&str, bool> = core_labels
            .iter()
            .map(|l| (l.doc_id.as_str(), l.is_core_member))
            .collect();
        let reg: HashMap<&str, usize> = regions.iter().map(|r| (r.doc_id.as_str(), r.region_id)).collect();
        let mut density_core = Vec::with_capacity(doc_ids.len());
        let mut region_ids = Vec::with_capacity(doc_ids.len());
        for id in &doc_ids {
            density_core.push(
                *core
                    .get(id.as_str())
                    .ok_or_else(|| Error::Data(format!("no density label for {id}")))?,
            );
            let r = *reg
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("no region for {id}")))?;
            if r >= n_regions {
                return Err(Error::Data(format!("region {r} of {id} is outside K = {n_regions}")));
            }
            region_ids.push(r);
        }
        Ok(Self {
            doc_ids,
            points,
            density_core,
            regions: region_ids,
            n_regions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub centroid: [f64; 2],
    pub mean: f64,
    pub std: f64,
    pub threshold: f64,
}

/// Components of the ε-graph over density-core members. Reported only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGraphDiagnostic {
    pub eps: f64,
    pub n_vertices: usize,
    pub n_components: usize,
    pub largest_component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub n_total: usize,
    pub n_global_outliers: usize,
    pub n_local_mavericks: usize,
    /// Passed G and L but fell outside the largest component.
    pub n_structural_outliers: usize,
    pub n_unique_removed: usize,
    pub removal_fraction: f64,
    pub n_density_noise: usize,
    pub per_region_size: BTreeMap<usize, usize>,
    pub per_region_survivors: BTreeMap<usize, usize>,
    pub unstable_regions: Vec<usize>,
    pub n_stable_regions: usize,
    pub global: GlobalSummary,
    pub structural_components: usize,
    pub density_graph: DensityGraphDiagnostic,
}

#[derive(Debug, Clone)]
pub struct CascadeOutcome {
    pub verdicts: Vec<FilterVerdict>,
    pub report: CascadeReport,
}

pub fn run_cascade(input: &CascadeInput, cfg: &CascadeConfig) -> Result<CascadeOutcome> {
    cfg.validate()?;
    let n = input.points.len();
    if n == 0 {
        return Err(Error::Configuration("cascade input is empty".into()));
    }
    let g = global_filter(&input.points, &input.density_core, cfg.global_sigma)?;
    let l = local_filter(
        &input.points,
        &input.regions,
        cfg.local_sigma,
        cfg.local_stats_population,
        Some(&g.pass),
    )?;
    let candidates: Vec<bool> = (0..n).map(|i| g.pass[i] && l.pass[i]).collect();
    let r = structural_filter(&input.points, &input.doc_ids, &candidates, cfg.eps_kmeans_graph)?;

    let verdicts = (0..n)
        .map(|i| {
            FilterVerdict::new(
                input.doc_ids[i].clone(),
                g.distances[i],
                l.distances[i],
                g.pass[i],
                l.pass[i],
                r.pass[i],
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let core_idx: Vec<usize> = (0..n).filter(|&i| input.density_core[i]).collect();
    let density_comps = epsilon_components(&input.points.subset(&core_idx), cfg.eps_density_graph)?;

    let mut per_region_size: BTreeMap<usize, usize> = (0..input.n_regions).map(|r| (r, 0)).collect();
    let mut per_region_survivors = per_region_size.clone();
    for (v, &reg) in verdicts.iter().zip(&input.regions) {
        *per_region_size.entry(reg).or_default() += 1;
        if v.retained() {
            *per_region_survivors.entry(reg).or_default() += 1;
        }
    }
    let unstable_regions: Vec<usize> = per_region_size
        .iter()
        .filter(|&(reg, &size)| {
            let kept = per_region_survivors[reg];
            kept == 0 || (kept as f64) < cfg.min_region_survival * size as f64
        })
        .map(|(&reg, _)| reg)
        .collect();

    let count = |f: &dyn Fn(&FilterVerdict) -> bool| verdicts.iter().filter(|v| f(v)).count();
    let n_unique_removed = count(&|v| !v.retained());
    let report = CascadeReport {
        n_total: n,
        n_global_outliers: count(&|v| !v.g_pass()),
        n_local_mavericks: count(&|v| !v.l_pass()),
        n_structural_outliers: count(&|v| v.g_pass() && v.l_pass() && !v.r_pass()),
        n_unique_removed,
        removal_fraction: n_unique_removed as f64 / n as f64,
        n_density_noise: n - core_idx.len(),
        n_stable_regions: per_region_size.len() - unstable_regions.len(),
        per_region_size,
        per_region_survivors,
        unstable_regions,
        global: GlobalSummary {
            centroid: g.centroid,
            mean: g.mean,
            std: g.std,
            threshold: g.threshold,
        },
        structural_components: r.component_sizes.len(),
        density_graph: DensityGraphDiagnostic {
            eps: cfg.eps_density_graph,
            n_vertices: core_idx.len(),
            n_components: density_comps.len(),
            largest_component: density_comps.iter().map(Vec::len).max().unwrap_or(0),
        },
    };
    Ok(CascadeOutcome { verdicts, report })
}

pub const VERDICT_HEADER: [&str; 7] = ["doc_id", "d_global", "d_local", "g_pass", "l_pass", "r_pass", "retained"];

pub fn write_verdicts_csv(path: &Path, verdicts: &[FilterVerdict]) -> Result<()> {
    let bytes = csv_bytes(&VERDICT_HEADER.map(String::from), |w| {
        for v in verdicts {
            w.write_record([
                v.doc_id().to_owned(),
                v.d_global().to_string(),
                v.d_local().to_string(),
                v.g_pass().to_string(),
                v.l_pass().to_string(),
                v.r_pass().to_string(),
                v.retained().to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

pub fn read_verdicts_csv(path: &Path) -> Result<Vec<FilterVerdict>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let bad = |what: &str| Error::Ingestion(format!("{}: bad {what}", path.display()));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad("distance"));
        let b = |i: usize| rec[i].parse::<bool>().map_err(|_| bad("flag"));
        let v = FilterVerdict::new(&rec[0], f(1)?, f(2)?, b(3)?, b(4)?, b(5)?)?;
        if v.retained() != b(6)? {
            return Err(bad("retained flag"));
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("d{i:04}")).collect()
    }

    fn disc(n: usize, radius: f64, center: [f64; 2]) -> Vec<[f64; 2]> {
        // deterministic sunflower layout
        (0..n)
            .map(|i| {
                let r = radius * ((i as f64 + 0.5) / n as f64).sqrt();
                let a = i as f64 * 2.399_963_229_728_653;
                [center[0] + r * a.cos(), center[1] + r * a.sin()]
            })
            .collect()
    }

    #[test]
    fn far_points_fail_global() {
        let mut rows = disc(100, 1.0, [0.0, 0.0]);
        for k in 0..5 {
            let a = k as f64;
            rows.push([50.0 * a.cos(), 50.0 * a.sin()]);
        }
        let core: Vec<bool> = (0..105).map(|i| i < 100).collect();
        let g = global_filter(&PointCloud::from_rows(&rows).unwrap(), &core, 1.2).unwrap();
        assert!(g.pass[..100].iter().all(|&p| p));
        assert!(g.pass[100..].iter().all(|&p| !p));
        // scalar reference
        let d: Vec<f64> = rows.iter().map(|p| (p[0] - g.centroid[0]).hypot(p[1] - g.centroid[1])).collect();
        let mu = d.iter().sum::<f64>() / 105.0;
        let sd = (d.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 104.0).sqrt();
        assert!((g.threshold - (mu + 1.2 * sd)).abs() < 1e-9);
    }

    #[test]
    fn identical_points_all_pass() {
        let rows = vec![[0.1, 0.7]; 20];
        let g = global_filter(&PointCloud::from_rows(&rows).unwrap(), &[true; 20], 1.2).unwrap();
        assert_eq!(g.std, 0.0);
        assert!(g.pass.iter().all(|&p| p));
    }

    #[test]
    fn single_point() {
        let g = global_filter(&PointCloud::from_rows(&[[3.0, 4.0]]).unwrap(), &[true], 1.2).unwrap();
        assert_eq!(g.distances, vec![0.0]);
        assert!(g.pass[0]);
    }

    #[test]
    fn empty_core_is_configuration_error() {
        let p = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(global_filter(&p, &[false, false], 1.2), Err(Error::Configuration(_))));
    }

    #[test]
    fn local_maverick_detected() {
        let mut rows = disc(50, 0.5, [3.0, 3.0]);
        rows.push([43.0, 3.0]);
        let regions = vec![4; 51];
        let l = local_filter(&PointCloud::from_rows(&rows).unwrap(), &regions, 1.8, LocalPopulation::FullRegion, None)
            .unwrap();
        assert!(l.pass[..50].iter().all(|&p| p));
        assert!(!l.pass[50]);
    }

    #[test]
    fn small_regions_auto_pass() {
        let rows = [[0.0, 0.0], [100.0, 0.0], [5.0, 5.0]];
        let l = local_filter(&PointCloud::from_rows(&rows).unwrap(), &[0, 0, 1], 0.1, LocalPopulation::FullRegion, None)
            .unwrap();
        assert!(l.pass.iter().all(|&p| p));
    }

    #[test]
    fn translated_regions_behave_identically() {
        let mut rows = disc(30, 1.0, [0.0, 0.0]);
        rows.push([6.0, 0.0]);
        let mut shifted: Vec<[f64; 2]> = rows.iter().map(|p| [p[0] + 100.0, p[1]]).collect();
        let n = rows.len();
        rows.append(&mut shifted);
        let regions: Vec<usize> = (0..2 * n).map(|i| i / n).collect();
        let l = local_filter(&PointCloud::from_rows(&rows).unwrap(), &regions, 1.8, LocalPopulation::FullRegion, None)
            .unwrap();
        assert_eq!(l.pass[..n], l.pass[n..]);
        assert!(!l.pass[n - 1]);
    }

    #[test]
    fn two_chains_keep_longer() {
        let mut rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 0.5, 0.0]).collect();
        rows.extend((0..4).map(|i| [9.5 + i as f64 * 0.5, 0.0]));
        let r = structural_filter(&PointCloud::from_rows(&rows).unwrap(), &ids(14), &[true; 14], 1.2).unwrap();
        assert_eq!(r.pass, (0..14).map(|i| i < 10).collect::<Vec<_>>());
        assert_eq!(r.component_sizes, vec![10, 4]);
    }

    #[test]
    fn equal_components_tie_on_smallest_doc_id() {
        let rows = [[0.0, 0.0], [0.5, 0.0], [10.0, 0.0], [10.5, 0.0]];
        let doc_ids: Vec<String> = ["m", "z", "b", "y"].iter().map(|s| s.to_string()).collect();
        let r = structural_filter(&PointCloud::from_rows(&rows).unwrap(), &doc_ids, &[true; 4], 1.2).unwrap();
        assert_eq!(r.pass, vec![false, false, true, true]);
    }

    #[test]
    fn non_candidates_never_pass() {
        let rows = [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]];
        let r = structural_filter(&PointCloud::from_rows(&rows).unwrap(), &ids(3), &[true, false, true], 1.2).unwrap();
        assert_eq!(r.pass, vec![true, false, true]);
        assert!(structural_filter(&PointCloud::from_rows(&rows).unwrap(), &ids(3), &[false; 3], 1.2).is_err());
    }

    #[test]
    fn clean_blob_has_no_removals() {
        let rows = disc(200, 1.0, [0.0, 0.0]);
        let n = rows.len();
        let input = CascadeInput {
            doc_ids: ids(n),
            points: PointCloud::from_rows(&rows).unwrap(),
            density_core: vec![true; n],
            regions: vec![0; n],
            n_regions: 1,
        };
        // the sunflower disc has no distance tail beyond 1.2 sigma only if thresholds are loose
        let cfg = CascadeConfig {
            global_sigma: 3.0,
            local_sigma: 3.0,
            ..Default::default()
        };
        let out = run_cascade(&input, &cfg).unwrap();
        assert_eq!(out.report.n_unique_removed, 0);
        assert_eq!(out.report.removal_fraction, 0.0);
        assert!(out.verdicts.iter().all(FilterVerdict::retained));
    }

    #[test]
    fn verdict_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        let v = vec![
            FilterVerdict::new("a", 0.1, 0.30000000000000004, true, false, false).unwrap(),
            FilterVerdict::new("b", 2.0, 0.0, true, true, true).unwrap(),
        ];
        write_verdicts_csv(&p, &v).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("doc_id,d_global,d_local,g_pass,l_pass,r_pass,retained\n"));
        assert_eq!(read_verdicts_csv(&p).unwrap(), v);
    }

    #[test]
    fn config_rejects_nonpositive() {
        let cfg = CascadeConfig { local_sigma: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
