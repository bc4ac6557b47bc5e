//! Architecture design-space exploration: exhaustive grids and
//! surrogate-guided search.

pub mod forest;
pub mod smbo;

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{baseline_area, to_f64, TechParams};
use crate::fabric::FabricParams;
use crate::pipeline::{embed, EmbedConfig};
use crate::qubo::Qubo;

pub use smbo::{
    shared_vs_custom, smbo, smbo_optimize, SharedVsCustom, SmboConfig, SmboResult, SvcRow,
    TraceEntry,
};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("problem set is empty")]
    EmptyProblemSet,
    #[error("need at least {need} problems, got {got}")]
    TooFewProblems { need: usize, got: usize },
    #[error("budget {0} is below the minimum of 10 evaluations")]
    BudgetTooSmall(usize),
    #[error("empty search range for {0}")]
    EmptyRange(&'static str),
}

/// The searched architecture knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchParams {
    #[serde(rename = "I")]
    pub inputs: usize,
    #[serde(rename = "O")]
    pub outputs: usize,
    #[serde(rename = "F_I")]
    pub f_in: f64,
    #[serde(rename = "F_O")]
    pub f_out: f64,
    pub occupancy: f64,
}

impl ArchParams {
    pub fn shared() -> Self {
        Self {
            inputs: 140,
            outputs: 40,
            f_in: 0.15,
            f_out: 0.2,
            occupancy: 1.0,
        }
    }

    pub fn fabric(&self, r_tile: usize, fs: usize) -> FabricParams {
        FabricParams {
            inputs: self.inputs,
            outputs: self.outputs,
            f_in: self.f_in,
            f_out: self.f_out,
            r_tile,
            fs,
            grid: 0,
            channel_width: 0,
        }
    }

    /// Lexicographic order on `(I, O, F_I, F_O, occupancy)`.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.inputs
            .cmp(&other.inputs)
            .then(self.outputs.cmp(&other.outputs))
            .then(self.f_in.total_cmp(&other.f_in))
            .then(self.f_out.total_cmp(&other.f_out))
            .then(self.occupancy.total_cmp(&other.occupancy))
    }

    /// Exact identity key (bit patterns of the reals).
    pub fn key(&self) -> (usize, usize, u64, u64, u64) {
        (
            self.inputs,
            self.outputs,
            self.f_in.to_bits(),
            self.f_out.to_bits(),
            self.occupancy.to_bits(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub inputs: (usize, usize),
    pub outputs: (usize, usize),
    pub f_in: (f64, f64),
    pub f_out: (f64, f64),
    pub occupancy: (f64, f64),
    pub r_tile: usize,
    pub fs: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            inputs: (16, 512),
            outputs: (8, 256),
            f_in: (0.05, 1.0),
            f_out: (0.05, 1.0),
            occupancy: (0.5, 1.0),
            r_tile: 4,
            fs: 3,
        }
    }
}

impl SearchSpace {
    pub fn check(&self) -> Result<(), SearchError> {
        if self.inputs.0 == 0 || self.inputs.0 > self.inputs.1 {
            return Err(SearchError::EmptyRange("I"));
        }
        if self.outputs.0 == 0 || self.outputs.0 > self.outputs.1 {
            return Err(SearchError::EmptyRange("O"));
        }
        for (name, (lo, hi)) in [
            ("F_I", self.f_in),
            ("F_O", self.f_out),
            ("occupancy", self.occupancy),
        ] {
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return Err(SearchError::EmptyRange(name));
            }
        }
        Ok(())
    }

    /// Same space with `I` restricted to at least `min_inputs`.
    pub fn with_min_inputs(mut self, min_inputs: usize) -> Self {
        self.inputs.0 = self.inputs.0.max(min_inputs);
        self
    }

    pub fn contains(&self, p: &ArchParams) -> bool {
        (self.inputs.0..=self.inputs.1).contains(&p.inputs)
            && (self.outputs.0..=self.outputs.1).contains(&p.outputs)
            && (self.f_in.0..=self.f_in.1).contains(&p.f_in)
            && (self.f_out.0..=self.f_out.1).contains(&p.f_out)
            && (self.occupancy.0..=self.occupancy.1).contains(&p.occupancy)
    }
}

/// Everything an evaluation needs besides the problem and the point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluator {
    pub tech: TechParams,
    pub embed: EmbedConfig,
    pub r_tile: usize,
    pub fs: usize,
}

impl Evaluator {
    pub fn new(tech: TechParams) -> Self {
        Self {
            tech,
            embed: EmbedConfig::default(),
            r_tile: 4,
            fs: 3,
        }
    }
}

pub(crate) mod loss_format {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad loss {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub problem: String,
    pub params: ArchParams,
    /// FPIA area in λ², or infinity when the problem cannot be embedded.
    #[serde(with = "loss_format")]
    pub loss: f64,
    pub reason: Option<String>,
    pub n: usize,
    #[serde(rename = "W")]
    pub channel_width: Option<usize>,
    #[serde(rename = "M")]
    pub grid: Option<usize>,
    pub clusters: Option<usize>,
    pub critical_path: Option<f64>,
    pub routing_area: Option<f64>,
    pub baseline_area: f64,
    pub tiling_advantage: Option<f64>,
}

impl EvalResult {
    pub fn is_feasible(&self) -> bool {
        self.loss.is_finite()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("result serialization is infallible")
    }
}

/// Full pipeline at one point with default settings.
pub fn evaluate(q: &Qubo<i64>, params: &ArchParams, t: &TechParams, seed: u64) -> EvalResult {
    evaluate_with("", q, params, &Evaluator::new(*t), seed)
}

/// Packs, places, routes at minimum channel width and reports the FPIA area
/// as the loss.
pub fn evaluate_with(
    problem: &str,
    q: &Qubo<i64>,
    params: &ArchParams,
    ev: &Evaluator,
    seed: u64,
) -> EvalResult {
    let baseline = to_f64(baseline_area(&ev.tech, q.n()));
    let mut r = EvalResult {
        problem: problem.to_string(),
        params: *params,
        loss: f64::INFINITY,
        reason: None,
        n: q.n(),
        channel_width: None,
        grid: None,
        clusters: None,
        critical_path: None,
        routing_area: None,
        baseline_area: baseline,
        tiling_advantage: None,
    };
    let arch = params.fabric(ev.r_tile, ev.fs);
    match embed(q, &arch, params.occupancy, seed, &ev.embed) {
        Ok(e) => match e.cost(&ev.tech, q.n()) {
            Ok(c) => {
                r.loss = c.fpia_area;
                r.channel_width = Some(c.channel_width);
                r.grid = Some(c.grid);
                r.clusters = Some(e.clustering.len());
                r.critical_path = Some(c.critical_path);
                r.routing_area = Some(c.routing_area);
                r.tiling_advantage = Some(c.tiling_advantage);
            }
            Err(err) => r.reason = Some(err.to_string()),
        },
        Err(err) => r.reason = Some(err.to_string()),
    }
    r
}

/// Axis values of an exhaustive grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub f_in: Vec<f64>,
    pub f_out: Vec<f64>,
    pub occupancy: Vec<f64>,
}

impl GridAxes {
    pub fn single(p: ArchParams) -> Self {
        Self {
            inputs: vec![p.inputs],
            outputs: vec![p.outputs],
            f_in: vec![p.f_in],
            f_out: vec![p.f_out],
            occupancy: vec![p.occupancy],
        }
    }

    /// Cartesian product in `(I, O, F_I, F_O, occupancy)` nesting order.
    pub fn points(&self) -> Vec<ArchParams> {
        let mut out = Vec::new();
        for &inputs in &self.inputs {
            for &outputs in &self.outputs {
                for &f_in in &self.f_in {
                    for &f_out in &self.f_out {
                        for &occupancy in &self.occupancy {
                            out.push(ArchParams {
                                inputs,
                                outputs,
                                f_in,
                                f_out,
                                occupancy,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub rows: Vec<EvalResult>,
    /// Index into `rows` of the lowest finite loss, ties going to the
    /// lexicographically smallest parameters. `None` if nothing is feasible.
    pub argmin: Option<usize>,
}

pub fn argmin(rows: &[EvalResult]) -> Option<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.is_feasible())
        .min_by(|(_, a), (_, b)| a.loss.total_cmp(&b.loss).then(a.params.lex_cmp(&b.params)))
        .map(|(k, _)| k)
}

/// Evaluates every grid point (in parallel, results in grid order).
pub fn grid_search(
    problem: &str,
    q: &Qubo<i64>,
    axes: &GridAxes,
    ev: &Evaluator,
    seed: u64,
) -> GridSearch {
    let rows: Vec<EvalResult> = axes
        .points()
        .par_iter()
        .map(|p| evaluate_with(problem, q, p, ev, seed))
        .collect();
    let argmin = argmin(&rows);
    GridSearch { rows, argmin }
}

pub const LANDSCAPE_HEADER: &str =
    "problem,I,O,F_I,F_O,occupancy,A_ADC,A_cell,W,M,fpia_area,baseline_area,TA,clusters,critical_path_ps,status";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// One CSV row per result; infeasible rows carry `inf` area and the reason.
pub fn landscape_csv(rows: &[EvalResult], t: &TechParams) -> String {
    let mut out = format!("{LANDSCAPE_HEADER}\n");
    for r in rows {
        let status = match &r.reason {
            None => "ok".to_string(),
            Some(why) => format!("\"{}\"", why.replace('"', "'")),
        };
        let loss = if r.is_feasible() {
            r.loss.to_string()
        } else {
            "inf".into()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.problem,
            r.params.inputs,
            r.params.outputs,
            r.params.f_in,
            r.params.f_out,
            r.params.occupancy,
            t.a_adc,
            t.a_cell,
            opt(r.channel_width),
            opt(r.grid),
            loss,
            r.baseline_area,
            opt(r.tiling_advantage),
            opt(r.clusters),
            opt(r.critical_path),
            status
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{fpia_area, routing_area, TechPreset};
    use crate::qubo::QuboBuilder;

    fn two_cluster_problem() -> Qubo<i64> {
        let mut b = QuboBuilder::<i64>::new(4);
        for (i, j) in [(0, 1), (1, 2), (2, 3)] {
            b.add_coupling(i, j, 1).unwrap();
        }
        b.build()
    }

    fn generous() -> ArchParams {
        ArchParams {
            inputs: 4,
            outputs: 2,
            f_in: 0.5,
            f_out: 0.5,
            occupancy: 1.0,
        }
    }

    #[test]
    fn evaluate_matches_manual_composition() {
        let q = two_cluster_problem();
        let t = TechPreset::Sram.params();
        let r = evaluate(&q, &generous(), &t, 5);
        assert!(r.is_feasible());
        assert_eq!(r.clusters, Some(2));
        let f = generous()
            .fabric(4, 3)
            .with_grid(r.grid.unwrap())
            .with_channel_width(r.channel_width.unwrap());
        let manual = fpia_area(&t, 4, 2, f.grid, routing_area(&f, &t));
        assert_eq!(r.loss, to_f64(manual));
        assert_eq!(r, evaluate(&q, &generous(), &t, 5));
    }

    #[test]
    fn fan_in_above_inputs_is_infinite() {
        let q = two_cluster_problem();
        let p = ArchParams {
            inputs: 1,
            ..generous()
        };
        let r = evaluate(&q, &p, &TechPreset::Sram.params(), 0);
        assert!(!r.is_feasible());
        assert!(r.reason.unwrap().contains("fan-in"));
        let line = evaluate(&q, &p, &TechPreset::Sram.params(), 0).to_json_line();
        assert!(line.contains("\"loss\":\"inf\""));
        let back: EvalResult = serde_json::from_str(&line).unwrap();
        assert!(back.loss.is_infinite());
    }

    #[test]
    fn grid_argmin_rules() {
        let q = two_cluster_problem();
        let ev = Evaluator::new(TechPreset::Sram.params());
        let one = grid_search("p", &q, &GridAxes::single(generous()), &ev, 1);
        assert_eq!(one.argmin, Some(0));
        let bad = GridAxes {
            inputs: vec![1],
            ..GridAxes::single(generous())
        };
        assert_eq!(grid_search("p", &q, &bad, &ev, 1).argmin, None);
        let csv = landscape_csv(&one.rows, &ev.tech);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with(LANDSCAPE_HEADER));
    }

    #[test]
    fn argmin_breaks_ties_lexicographically() {
        let q = two_cluster_problem();
        let t = TechPreset::Sram.params();
        let mut a = evaluate(&q, &generous(), &t, 1);
        let mut b = a.clone();
        a.params.inputs = 9;
        b.params.inputs = 5;
        assert_eq!(argmin(&[a.clone(), b.clone()]), Some(1));
        b.loss = a.loss + 1.0;
        assert_eq!(argmin(&[a, b]), Some(0));
    }

    #[test]
    fn space_checks() {
        assert!(SearchSpace::default().check().is_ok());
        let s = SearchSpace {
            f_in: (0.5, 0.2),
            ..Default::default()
        };
        assert_eq!(s.check(), Err(SearchError::EmptyRange("F_I")));
        let r = SearchSpace::default().with_min_inputs(100);
        assert_eq!(r.inputs, (100, 512));
        assert!(r.contains(&ArchParams::shared()));
    }
}
