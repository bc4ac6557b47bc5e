//! Campaign files: a problem set, a technology and a list of studies, each
//! emitting one CSV. A manifest records hashes and seeds of every artifact.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use fpia_core::cluster::{ffd_pack, utilization, ClusterParams};
use fpia_core::cost::{sweep, sweep_csv, SweepProblem, TechParams, TechPreset};
use fpia_core::place_route::DEFAULT_WIDTH_CAP;
use fpia_core::sat::{gen_random_3sat, quadratize, DEFAULT_PENALTY};
use fpia_core::search::{
    evaluate_with, landscape_csv, shared_vs_custom, ArchParams, EvalResult, Evaluator, GridAxes,
    SearchSpace, SmboConfig,
};
use fpia_core::Qubo;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load, Problem, ProblemSpec};

fn default_penalty() -> i64 {
    DEFAULT_PENALTY
}

fn default_ratio() -> f64 {
    4.26
}

fn default_fraction() -> Vec<f64> {
    vec![0.2]
}

fn default_full() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub name: String,
    pub tech: TechPreset,
    pub seeds: Vec<u64>,
    #[serde(default = "default_penalty")]
    pub penalty: i64,
    #[serde(default)]
    pub problems: Vec<ProblemSpec>,
    /// Output directory, relative to the campaign file.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub width_cap: Option<usize>,
    /// Worker threads; all cores when unset.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Base architecture for studies that vary only some parameters.
    #[serde(default)]
    pub arch: Option<ArchParams>,
    #[serde(default)]
    pub utilization: Option<UtilizationStudy>,
    #[serde(default)]
    pub landscape: Option<LandscapeStudy>,
    #[serde(default)]
    pub fi_fo: Option<FiFoStudy>,
    #[serde(default)]
    pub shared_vs_custom: Option<SvcStudy>,
    #[serde(default)]
    pub occupancy: Option<OccupancyStudy>,
    #[serde(default)]
    pub adc_cell: Option<AdcCellStudy>,
}

/// Packing-only study on generated random 3SAT of nominal size `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilizationStudy {
    /// Overrides the campaign seeds for this study.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    pub sizes: Vec<usize>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeStudy {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    #[serde(default = "default_fraction")]
    pub f_in: Vec<f64>,
    #[serde(default = "default_fraction")]
    pub f_out: Vec<f64>,
    #[serde(default = "default_full")]
    pub occupancy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiFoStudy {
    /// Overrides the campaign seeds for this study.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    pub f_in: Vec<f64>,
    pub f_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvcStudy {
    pub budget: usize,
    #[serde(default)]
    pub space: Option<SearchSpace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupancyStudy {
    /// Overrides the campaign seeds for this study.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    pub occupancy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcCellStudy {
    pub adc: Vec<u64>,
    pub cell: Vec<u64>,
}

impl Campaign {
    /// TOML unless the extension is `.json`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let c: Campaign = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("campaign {:?} has no seeds", self.name);
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("bad campaign name {:?}", self.name);
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("campaign serialization is infallible");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn arch(&self) -> ArchParams {
        self.arch.unwrap_or_else(ArchParams::shared)
    }

    pub fn tech_params(&self) -> TechParams {
        self.tech.params()
    }

    fn evaluator(&self) -> Evaluator {
        let mut ev = Evaluator::new(self.tech_params());
        ev.embed.width_cap = self.width_cap.unwrap_or(DEFAULT_WIDTH_CAP);
        ev
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub seeds: Vec<u64>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub study: String,
    pub item: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub tech: TechPreset,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<Artifact>,
    pub failures: Vec<Failure>,
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn inf(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "inf".into()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn status(r: &EvalResult) -> String {
    r.reason.clone().unwrap_or_else(|| "ok".into())
}

fn to_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub const UTILIZATION_HEADER: [&str; 13] = [
    "N_nominal",
    "N",
    "vars",
    "clauses",
    "I",
    "O",
    "seed",
    "clusters",
    "used_cells",
    "improvement",
    "used_cells_external",
    "improvement_external",
    "status",
];

pub const FI_FO_HEADER: [&str; 12] = [
    "problem",
    "seed",
    "I",
    "O",
    "F_I",
    "F_O",
    "W",
    "M",
    "routing_area",
    "fpia_area",
    "TA",
    "status",
];

pub const SVC_HEADER: [&str; 14] = [
    "problem",
    "shared_I",
    "shared_O",
    "shared_F_I",
    "shared_F_O",
    "shared_occupancy",
    "custom_I",
    "custom_O",
    "custom_F_I",
    "custom_F_O",
    "custom_occupancy",
    "shared_area",
    "custom_area",
    "ratio",
];

pub const OCCUPANCY_HEADER: [&str; 11] = [
    "problem",
    "seed",
    "occupancy",
    "I",
    "O",
    "clusters",
    "W",
    "M",
    "fpia_area",
    "TA",
    "status",
];

struct Run<'a> {
    campaign: &'a Campaign,
    problems: Vec<Problem>,
    failures: Vec<Failure>,
}

impl Run<'_> {
    fn evaluate_all(&self, points: &[ArchParams], seeds: &[u64]) -> Vec<EvalResult> {
        let ev = self.campaign.evaluator();
        let items: Vec<(&Problem, ArchParams, u64)> = self
            .problems
            .iter()
            .flat_map(|p| {
                points
                    .iter()
                    .flat_map(move |a| seeds.iter().map(move |&s| (p, *a, s)))
            })
            .collect();
        items
            .par_iter()
            .map(|(p, a, s)| evaluate_with(&p.name, &p.qubo, a, &ev, *s))
            .collect()
    }

    fn utilization(&mut self, s: &UtilizationStudy, seeds: &[u64]) -> String {
        let mut items = Vec::new();
        for &n in &s.sizes {
            for &seed in seeds {
                items.push((n, seed));
            }
        }
        let penalty = self.campaign.penalty;
        let generated: Vec<_> = items
            .par_iter()
            .map(|&(n, seed)| {
                let vars = ((n as f64) / (1.0 + s.ratio)).round().max(3.0) as usize;
                let r = gen_random_3sat(vars, s.ratio, seed)
                    .map_err(anyhow::Error::from)
                    .and_then(|c| Ok((c.num_vars, c.clauses.len(), quadratize(&c, penalty)?.0)));
                (n, seed, r)
            })
            .collect();
        let mut rows = Vec::new();
        for (n, seed, r) in generated {
            let (vars, clauses, q) = match r {
                Ok(v) => v,
                Err(e) => {
                    self.failures.push(Failure {
                        study: "utilization".into(),
                        item: format!("N={n} seed={seed}"),
                        reason: format!("{e:#}"),
                    });
                    continue;
                }
            };
            for &i in &s.inputs {
                for &o in &s.outputs {
                    let mut row = vec![
                        n.to_string(),
                        q.n().to_string(),
                        vars.to_string(),
                        clauses.to_string(),
                        i.to_string(),
                        o.to_string(),
                        seed.to_string(),
                    ];
                    match ffd_pack(&q, &ClusterParams::new(i, o)) {
                        Ok(c) => {
                            let u = utilization(&c, q.n());
                            row.extend([
                                c.len().to_string(),
                                u.used_cells.to_string(),
                                inf(u.improvement),
                                u.used_cells_external.to_string(),
                                inf(u.improvement_external),
                                "ok".into(),
                            ]);
                        }
                        Err(e) => {
                            row.extend(["", "", "", "", ""].map(String::from));
                            row.push(e.to_string());
                        }
                    }
                    rows.push(row);
                }
            }
        }
        to_csv(&UTILIZATION_HEADER, &rows)
    }

    fn landscape(&self, s: &LandscapeStudy) -> String {
        let axes = GridAxes {
            inputs: s.inputs.clone(),
            outputs: s.outputs.clone(),
            f_in: s.f_in.clone(),
            f_out: s.f_out.clone(),
            occupancy: s.occupancy.clone(),
        };
        let rows = self.evaluate_all(&axes.points(), &self.campaign.seeds[..1]);
        landscape_csv(&rows, &self.campaign.tech_params())
    }

    fn fi_fo(&self, s: &FiFoStudy, seeds: &[u64]) -> String {
        let base = self.campaign.arch();
        let mut points = Vec::new();
        for &f_in in &s.f_in {
            for &f_out in &s.f_out {
                points.push(ArchParams {
                    f_in,
                    f_out,
                    ..base
                });
            }
        }
        let rows: Vec<Vec<String>> = self
            .evaluate_all(&points, seeds)
            .iter()
            .zip(self.item_seeds(points.len(), seeds))
            .map(|(r, seed)| {
                vec![
                    r.problem.clone(),
                    seed.to_string(),
                    r.params.inputs.to_string(),
                    r.params.outputs.to_string(),
                    r.params.f_in.to_string(),
                    r.params.f_out.to_string(),
                    opt(r.channel_width),
                    opt(r.grid),
                    opt(r.routing_area),
                    inf(r.loss),
                    opt(r.tiling_advantage),
                    status(r),
                ]
            })
            .collect();
        to_csv(&FI_FO_HEADER, &rows)
    }

    fn occupancy(&self, s: &OccupancyStudy, seeds: &[u64]) -> String {
        let base = self.campaign.arch();
        let points: Vec<ArchParams> = s
            .occupancy
            .iter()
            .map(|&occupancy| ArchParams { occupancy, ..base })
            .collect();
        let rows: Vec<Vec<String>> = self
            .evaluate_all(&points, seeds)
            .iter()
            .zip(self.item_seeds(points.len(), seeds))
            .map(|(r, seed)| {
                vec![
                    r.problem.clone(),
                    seed.to_string(),
                    r.params.occupancy.to_string(),
                    r.params.inputs.to_string(),
                    r.params.outputs.to_string(),
                    opt(r.clusters),
                    opt(r.channel_width),
                    opt(r.grid),
                    inf(r.loss),
                    opt(r.tiling_advantage),
                    status(r),
                ]
            })
            .collect();
        to_csv(&OCCUPANCY_HEADER, &rows)
    }

    /// Seed of each row produced by `evaluate_all`.
    fn item_seeds<'s>(&self, points: usize, seeds: &'s [u64]) -> impl Iterator<Item = u64> + 's {
        (0..self.problems.len() * points * seeds.len()).map(move |k| seeds[k % seeds.len()])
    }

    fn shared_vs_custom(&mut self, s: &SvcStudy) -> Option<String> {
        let set: Vec<(String, Arc<Qubo<i64>>)> = self
            .problems
            .iter()
            .map(|p| (p.name.clone(), p.qubo.clone()))
            .collect();
        let cfg = SmboConfig::default()
            .with_budget(s.budget)
            .with_seed(self.campaign.seeds[0]);
        let space = s.space.unwrap_or_default();
        match shared_vs_custom(&set, &space, &self.campaign.evaluator(), &cfg) {
            Ok(svc) => {
                let params = |p: Option<ArchParams>| -> Vec<String> {
                    match p {
                        Some(p) => vec![
                            p.inputs.to_string(),
                            p.outputs.to_string(),
                            p.f_in.to_string(),
                            p.f_out.to_string(),
                            p.occupancy.to_string(),
                        ],
                        None => vec![String::new(); 5],
                    }
                };
                let rows: Vec<Vec<String>> = svc
                    .rows
                    .iter()
                    .map(|r| {
                        let mut row = vec![r.problem.clone()];
                        row.extend(params(svc.shared));
                        row.extend(params(r.custom));
                        row.extend([inf(r.shared_area), inf(r.custom_area), inf(r.ratio)]);
                        row
                    })
                    .collect();
                Some(to_csv(&SVC_HEADER, &rows))
            }
            Err(e) => {
                self.failures.push(Failure {
                    study: "shared_vs_custom".into(),
                    item: self.campaign.name.clone(),
                    reason: e.to_string(),
                });
                None
            }
        }
    }

    fn adc_cell(&self, s: &AdcCellStudy) -> String {
        let arch = self.campaign.arch();
        let rows = self.evaluate_all(&[arch], &self.campaign.seeds[..1]);
        let problems: Vec<SweepProblem> = rows
            .iter()
            .map(|r| SweepProblem {
                name: r.problem.clone(),
                n: r.n,
                fabric: match (r.grid, r.channel_width) {
                    (Some(m), Some(w)) => Some(
                        arch.fabric(
                            self.campaign.evaluator().r_tile,
                            self.campaign.evaluator().fs,
                        )
                        .with_grid(m)
                        .with_channel_width(w),
                    ),
                    _ => None,
                },
            })
            .collect();
        sweep_csv(&sweep(
            &self.campaign.tech_params(),
            &s.adc,
            &s.cell,
            &problems,
        ))
    }
}

pub struct Outcome {
    pub manifest: Manifest,
    pub dir: PathBuf,
}

impl Outcome {
    pub fn failed(&self) -> bool {
        !self.manifest.failures.is_empty()
    }
}

/// Runs every configured study and writes CSVs plus `manifest.json` into
/// `out` (or the campaign's own output directory). Relative problem paths
/// resolve against `base`.
pub fn run(c: &Campaign, base: &Path, out: Option<&Path>) -> Result<Outcome> {
    c.check()?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => base.join(
            c.output
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{}-out", c.name))),
        ),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let body = || run_in(c, base, &dir);
    let manifest = match c.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(body)?,
        None => body()?,
    };
    Ok(Outcome { manifest, dir })
}

fn run_in(c: &Campaign, base: &Path, dir: &Path) -> Result<Manifest> {
    let hash = c.config_hash();
    let loaded: Vec<(String, Result<Problem>)> = c
        .problems
        .par_iter()
        .map(|p| (p.name(), load(&p.rebased(base), c.penalty)))
        .collect();
    let mut run = Run {
        campaign: c,
        problems: Vec::new(),
        failures: Vec::new(),
    };
    for (name, r) in loaded {
        match r {
            Ok(p) => run.problems.push(p),
            Err(e) => run.failures.push(Failure {
                study: "load".into(),
                item: name,
                reason: format!("{e:#}"),
            }),
        }
    }

    let all = c.seeds.clone();
    let first = vec![c.seeds[0]];
    let mut outputs: Vec<(&str, String, Vec<u64>)> = Vec::new();
    let pick = |o: &Option<Vec<u64>>| {
        o.clone()
            .filter(|v| !v.is_empty())
            .unwrap_or_else(|| all.clone())
    };
    if let Some(s) = &c.utilization {
        let seeds = pick(&s.seeds);
        outputs.push(("fig3_utilization.csv", run.utilization(s, &seeds), seeds));
    }
    if let Some(s) = &c.landscape {
        outputs.push(("fig5_landscape.csv", run.landscape(s), first.clone()));
    }
    if let Some(s) = &c.fi_fo {
        let seeds = pick(&s.seeds);
        outputs.push(("fig7_fi_fo.csv", run.fi_fo(s, &seeds), seeds));
    }
    if let Some(s) = &c.shared_vs_custom {
        if let Some(csv) = run.shared_vs_custom(s) {
            outputs.push(("fig8_shared_vs_custom.csv", csv, first.clone()));
        }
    }
    if let Some(s) = &c.occupancy {
        let seeds = pick(&s.seeds);
        outputs.push(("fig9_occupancy.csv", run.occupancy(s, &seeds), seeds));
    }
    if let Some(s) = &c.adc_cell {
        outputs.push(("fig_adc_cell_sweep.csv", run.adc_cell(s), first.clone()));
    }

    let mut artifacts = Vec::new();
    for (file, csv, seeds) in outputs {
        write_atomic(&dir.join(file), csv.as_bytes())?;
        artifacts.push(Artifact {
            file: file.to_string(),
            sha256: hex::encode(Sha256::digest(csv.as_bytes())),
            rows: csv.lines().count().saturating_sub(1),
            seeds,
            config_hash: hash.clone(),
        });
    }
    let manifest = Manifest {
        name: c.name.clone(),
        config_hash: hash,
        tech: c.tech,
        seeds: c.seeds.clone(),
        artifacts,
        failures: run.failures,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    write_atomic(&dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Campaign {
        toml::from_str(
            r#"
name = "tiny"
tech = "eflash_optimistic"
seeds = [1]
problems = [{ kind = "uniform", vars = 20, clauses = 91, seed = 1 }]

[landscape]
inputs = [140]
outputs = [40]
"#,
        )
        .unwrap()
    }

    #[test]
    fn one_point_gives_one_row() {
        let dir = std::env::temp_dir().join(format!("fpia-campaign-{}", std::process::id()));
        let o = run(&tiny(), Path::new("."), Some(&dir)).unwrap();
        assert!(!o.failed());
        let csv = std::fs::read_to_string(dir.join("fig5_landscape.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(o.manifest.artifacts[0].rows, 1);
        assert_eq!(o.manifest.artifacts[0].config_hash, tiny().config_hash());
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn seeds_are_required_and_unknown_keys_rejected() {
        let mut c = tiny();
        c.seeds.clear();
        assert!(c.check().is_err());
        assert!(toml::from_str::<Campaign>("name='x'\ntech='sram'\nseeds=[1]\nbogus=1").is_err());
    }

    #[test]
    fn json_and_toml_agree() {
        let c = tiny();
        let back: Campaign = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.config_hash(), c.config_hash());
    }

    #[test]
    fn missing_problem_is_recorded() {
        let mut c = tiny();
        c.problems.push(ProblemSpec::File {
            path: "does/not/exist.cnf".into(),
            name: None,
        });
        let dir = std::env::temp_dir().join(format!("fpia-campaign-miss-{}", std::process::id()));
        let o = run(&c, Path::new("."), Some(&dir)).unwrap();
        assert!(o.failed());
        assert_eq!(o.manifest.failures[0].item, "exist");
        let csv = std::fs::read_to_string(dir.join("fig5_landscape.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
