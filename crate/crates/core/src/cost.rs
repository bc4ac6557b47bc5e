//! Die-area models for the FPIA fabric and the monolithic tiled baseline.
//!
//! Areas are in λ² and computed exactly as rationals; technology parameters
//! are integral λ² values.

use std::fmt::Write as _;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::FabricParams;

pub type Area = Ratio<i128>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CostError {
    #[error("FPIA area is zero")]
    ZeroFpiaArea,
    #[error("unknown technology preset {0:?}")]
    UnknownPreset(String),
}

/// Technology parameters, all in λ² except the sharing factor `S_pe` and
/// the baseline sub-array side `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TechParams {
    #[serde(rename = "A_fetmin")]
    pub a_fetmin: u64,
    #[serde(rename = "A_cell")]
    pub a_cell: u64,
    #[serde(rename = "A_sense")]
    pub a_sense: u64,
    #[serde(rename = "A_wl")]
    pub a_wl: u64,
    #[serde(rename = "A_bl")]
    pub a_bl: u64,
    #[serde(rename = "A_pewl")]
    pub a_pewl: u64,
    #[serde(rename = "A_pebl")]
    pub a_pebl: u64,
    #[serde(rename = "S_pe")]
    pub s_pe: u64,
    #[serde(rename = "S")]
    pub s: u64,
    #[serde(rename = "A_ADC")]
    pub a_adc: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechPreset {
    EflashOptimistic,
    EflashPessimistic,
    Sram,
}

impl TechPreset {
    pub const ALL: [TechPreset; 3] = [
        TechPreset::EflashOptimistic,
        TechPreset::EflashPessimistic,
        TechPreset::Sram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TechPreset::EflashOptimistic => "eflash_optimistic",
            TechPreset::EflashPessimistic => "eflash_pessimistic",
            TechPreset::Sram => "sram",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, CostError> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| CostError::UnknownPreset(name.to_string()))
    }

    pub fn params(self) -> TechParams {
        let (a_cell, a_sense, a_pewl, a_pebl) = match self {
            TechPreset::EflashOptimistic => (60, 500, 11300, 7700),
            TechPreset::EflashPessimistic => (180, 2500, 11300, 7700),
            TechPreset::Sram => (600, 2500, 1550, 1550),
        };
        TechParams {
            a_fetmin: 50,
            a_cell,
            a_sense,
            a_wl: 1500,
            a_bl: 1550,
            a_pewl,
            a_pebl,
            s_pe: 1000,
            s: 256,
            a_adc: 1_000_000,
        }
    }
}

impl TechParams {
    pub fn preset(name: &str) -> Result<Self, CostError> {
        TechPreset::from_name(name).map(TechPreset::params)
    }

    pub fn with_adc(mut self, a_adc: u64) -> Self {
        self.a_adc = a_adc;
        self
    }

    pub fn with_cell(mut self, a_cell: u64) -> Self {
        self.a_cell = a_cell;
        self
    }

    /// Every area parameter multiplied by `k` (sharing factors untouched).
    pub fn scaled(mut self, k: u64) -> Self {
        for a in [
            &mut self.a_fetmin,
            &mut self.a_cell,
            &mut self.a_sense,
            &mut self.a_wl,
            &mut self.a_bl,
            &mut self.a_pewl,
            &mut self.a_pebl,
            &mut self.a_adc,
        ] {
            *a *= k;
        }
        self
    }
}

fn int(v: impl Into<i128>) -> Area {
    Area::from_integer(v.into())
}

fn us(v: usize) -> Area {
    Area::from_integer(v as i128)
}

/// Die area of an `M × M` FPIA with `I`-input, `O`-output blocks.
pub fn fpia_area(t: &TechParams, inputs: usize, outputs: usize, m: usize, routing: Area) -> Area {
    let (i, o, m) = (us(inputs), us(outputs), us(m));
    let tile = i * o * int(t.a_cell) + i * int(t.a_wl) + o * (int(t.a_bl) + int(t.a_sense));
    let prog = m * i * int(t.a_pewl) / int(t.s_pe) + m * o * int(t.a_pebl) / int(t.s_pe);
    m * m * tile + routing + prog
}

/// Die area of the monolithic baseline for an `N`-spin problem, built from
/// `S × S` sub-arrays each with its own ADC.
pub fn baseline_area(t: &TechParams, n: usize) -> Area {
    let s = int(t.s);
    let groups = us(n.div_ceil(t.s as usize));
    let sub = s * s * int(t.a_cell) + s * int(t.a_wl) + s * int(t.a_bl) + int(t.a_adc);
    groups * groups * sub
        + us(n) * int(t.a_pewl) / int(t.s_pe)
        + us(n) * int(t.a_pebl) / int(t.s_pe)
}

/// Transistor-count multipliers of `A_fetmin` for routing components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingAreaParams {
    /// Per track per tile: segment driver.
    pub buffer_fets: u64,
    /// Per switch-block connection.
    pub switch_fets: u64,
    /// Per connection-block pin-to-track link.
    pub mux_fets: u64,
}

impl Default for RoutingAreaParams {
    fn default() -> Self {
        Self {
            buffer_fets: 10,
            switch_fets: 6,
            mux_fets: 4,
        }
    }
}

/// `M²·W·(a_buf + Fs·a_sw) + M²·(⌈F_I·W⌉·I + ⌈F_O·W⌉·O)·a_mux`.
pub fn routing_area(f: &FabricParams, t: &TechParams) -> Area {
    routing_area_with(f, t, &RoutingAreaParams::default())
}

pub fn routing_area_with(f: &FabricParams, t: &TechParams, r: &RoutingAreaParams) -> Area {
    let fet = int(t.a_fetmin);
    let (a_buf, a_sw, a_mux) = (
        int(r.buffer_fets) * fet,
        int(r.switch_fets) * fet,
        int(r.mux_fets) * fet,
    );
    let m2 = us(f.grid) * us(f.grid);
    let w = us(f.channel_width);
    let pins = us(f.input_tracks() * f.inputs + f.output_tracks() * f.outputs);
    m2 * w * (a_buf + us(f.fs) * a_sw) + m2 * pins * a_mux
}

pub fn tiling_advantage(baseline: Area, fpia: Area) -> Result<Area, CostError> {
    if fpia.is_zero() {
        return Err(CostError::ZeroFpiaArea);
    }
    Ok(baseline / fpia)
}

/// `N²(A_cell + Ã_ADC) / (N²·C·A_cell + A_routing)` where `C` is the
/// fraction of crossbar cells kept and `Ã_ADC` the ADC area per cell.
pub fn approx_tiling_advantage(
    n: usize,
    a_cell: f64,
    a_adc_amortized: f64,
    c: f64,
    routing_area: f64,
) -> f64 {
    let n2 = (n as f64).powi(2);
    n2 * (a_cell + a_adc_amortized) / (n2 * c * a_cell + routing_area)
}

/// `A_ADC / S²`.
pub fn amortized_adc(t: &TechParams) -> f64 {
    t.a_adc as f64 / (t.s as f64).powi(2)
}

pub fn to_f64(a: Area) -> f64 {
    a.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub fpia_area: f64,
    pub baseline_area: f64,
    pub routing_area: f64,
    pub tiling_advantage: f64,
    /// Critical path delay, picoseconds.
    pub critical_path: f64,
    #[serde(rename = "W")]
    pub channel_width: usize,
    #[serde(rename = "M")]
    pub grid: usize,
}

impl CostReport {
    /// Costs a routed fabric (`f` carries the achieved grid and width).
    pub fn new(
        t: &TechParams,
        f: &FabricParams,
        n: usize,
        critical_path: f64,
    ) -> Result<Self, CostError> {
        let routing = routing_area(f, t);
        let fpia = fpia_area(t, f.inputs, f.outputs, f.grid, routing);
        let base = baseline_area(t, n);
        let ta = tiling_advantage(base, fpia)?;
        Ok(Self {
            fpia_area: to_f64(fpia),
            baseline_area: to_f64(base),
            routing_area: to_f64(routing),
            tiling_advantage: to_f64(ta),
            critical_path,
            channel_width: f.channel_width,
            grid: f.grid,
        })
    }
}

/// A problem's embedding result as needed by the technology sweep. The
/// embedding itself does not depend on technology parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepProblem {
    pub name: String,
    pub n: usize,
    /// Achieved fabric, or `None` when the problem could not be embedded.
    pub fabric: Option<FabricParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub problem: String,
    pub a_adc: u64,
    pub a_cell: u64,
    pub fabric: Option<FabricParams>,
    pub fpia_area: Option<Area>,
    pub baseline_area: Area,
    pub ta: Option<Area>,
}

/// Full-model tiling advantage over the `(A_ADC, A_cell)` grid, rows in
/// problem, then ADC, then cell order.
pub fn sweep(
    base: &TechParams,
    adc: &[u64],
    cell: &[u64],
    problems: &[SweepProblem],
) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for p in problems {
        for &a in adc {
            for &c in cell {
                let t = base.with_adc(a).with_cell(c);
                let baseline = baseline_area(&t, p.n);
                let fpia = p
                    .fabric
                    .map(|f| fpia_area(&t, f.inputs, f.outputs, f.grid, routing_area(&f, &t)));
                let ta = fpia.and_then(|f| tiling_advantage(baseline, f).ok());
                rows.push(SweepRow {
                    problem: p.name.clone(),
                    a_adc: a,
                    a_cell: c,
                    fabric: p.fabric,
                    fpia_area: fpia,
                    baseline_area: baseline,
                    ta,
                });
            }
        }
    }
    rows
}

pub const SWEEP_HEADER: &str = "problem,A_ADC,A_cell,W,M,fpia_area,baseline_area,TA";

/// CSV with [`SWEEP_HEADER`]; unroutable rows leave `W`, `M` and `TA`
/// empty and put `unroutable` in `fpia_area`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = write!(out, "{},{},{},", r.problem, r.a_adc, r.a_cell);
        match (r.fabric, r.fpia_area, r.ta) {
            (Some(f), Some(fa), Some(ta)) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    f.channel_width,
                    f.grid,
                    to_f64(fa),
                    to_f64(r.baseline_area),
                    to_f64(ta)
                );
            }
            _ => {
                let _ = writeln!(out, ",,unroutable,{},", to_f64(r.baseline_area));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(num: i128, den: i128) -> Area {
        Area::new(num, den)
    }

    #[test]
    fn presets_match_table() {
        let o = TechPreset::EflashOptimistic.params();
        assert_eq!(
            (o.a_cell, o.a_sense, o.a_pewl, o.a_pebl, o.a_wl, o.a_bl),
            (60, 500, 11300, 7700, 1500, 1550)
        );
        let p = TechPreset::EflashPessimistic.params();
        assert_eq!((p.a_cell, p.a_sense), (180, 2500));
        let s = TechPreset::Sram.params();
        assert_eq!(
            (s.a_cell, s.a_sense, s.a_pewl, s.a_pebl),
            (600, 2500, 1550, 1550)
        );
        for t in [o, p, s] {
            assert_eq!(
                (t.a_fetmin, t.s_pe, t.s, t.a_adc),
                (50, 1000, 256, 1_000_000)
            );
        }
    }

    #[test]
    fn presets_round_trip() {
        for p in TechPreset::ALL {
            let t = p.params();
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<TechParams>(&json).unwrap(), t);
            assert_eq!(TechParams::preset(p.name()).unwrap(), t);
            let tag = serde_json::to_string(&p).unwrap();
            assert_eq!(tag, format!("\"{}\"", p.name()));
        }
        assert!(TechParams::preset("dram").is_err());
    }

    #[test]
    fn fpia_hand_value() {
        let t = TechPreset::Sram.params();
        assert_eq!(fpia_area(&t, 140, 40, 2, Area::zero()), int(14_928_558));
        assert_eq!(fpia_area(&t, 140, 40, 0, Area::zero()), Area::zero());
    }

    #[test]
    fn fpia_cell_term_is_linear() {
        let zero = TechParams {
            a_fetmin: 0,
            a_cell: 7,
            a_sense: 0,
            a_wl: 0,
            a_bl: 0,
            a_pewl: 0,
            a_pebl: 0,
            s_pe: 1,
            s: 1,
            a_adc: 0,
        };
        let a = fpia_area(&zero, 3, 5, 2, Area::zero());
        assert_eq!(a, int(4 * 15 * 7));
        assert_eq!(
            fpia_area(&zero.with_cell(14), 3, 5, 2, Area::zero()),
            a * int(2)
        );
    }

    #[test]
    fn baseline_hand_value() {
        let t = TechPreset::Sram.params();
        assert_eq!(baseline_area(&t, 256), r(411_031_936, 10));
        let one = baseline_area(&t, 256) - r(2 * 256 * 1550, 1000);
        let jump = baseline_area(&t, 257) - r(2 * 257 * 1550, 1000);
        assert_eq!(jump, one * int(4));
    }

    #[test]
    fn baseline_unit_case() {
        let t = TechParams {
            s: 1,
            ..TechPreset::Sram.params()
        };
        let expect = int(600 + 1500 + 1550 + 1_000_000) + r(1550 + 1550, 1000);
        assert_eq!(baseline_area(&t, 1), expect);
    }

    #[test]
    fn routing_hand_value() {
        let t = TechPreset::Sram.params();
        let f = FabricParams {
            inputs: 1,
            outputs: 1,
            f_in: 1.0,
            f_out: 1.0,
            r_tile: 1,
            fs: 3,
            grid: 1,
            channel_width: 1,
        };
        assert_eq!(routing_area(&f, &t), int(1800));
        assert_eq!(routing_area(&f.with_channel_width(0), &t), Area::zero());
        // ceil(F·W) fixed at 1 for both W=4 and W=5 when F=0.2.
        let g = FabricParams {
            f_in: 0.2,
            f_out: 0.2,
            ..f
        };
        let a4 = routing_area(&g.with_channel_width(4), &t);
        let a5 = routing_area(&g.with_channel_width(5), &t);
        let a3 = routing_area(&g.with_channel_width(3), &t);
        assert_eq!(a5 - a4, a4 - a3);
    }

    #[test]
    fn tiling_advantage_ratio() {
        assert_eq!(tiling_advantage(int(5), int(5)).unwrap(), int(1));
        assert_eq!(tiling_advantage(int(600), int(10)).unwrap(), int(60));
        assert!(tiling_advantage(int(1), int(2)).unwrap() < int(1));
        assert_eq!(
            tiling_advantage(int(1), Area::zero()),
            Err(CostError::ZeroFpiaArea)
        );
    }

    #[test]
    fn approx_examples() {
        assert_eq!(approx_tiling_advantage(100, 60.0, 0.0, 1.0, 0.0), 1.0);
        let adc = 1e6 / 65536.0;
        let v = approx_tiling_advantage(4000, 60.0, adc, 0.1, 0.0);
        assert!((v - (60.0 + adc) / 6.0).abs() < 1e-9);
        assert!((v - 12.54).abs() < 0.01);
        assert!(approx_tiling_advantage(4000, 60.0, 2.0 * adc, 0.1, 5e5) > v);
        assert_eq!(amortized_adc(&TechPreset::Sram.params()), adc);
    }

    #[test]
    fn scale_invariance() {
        let t = TechPreset::EflashOptimistic.params();
        let f = FabricParams::shared(5, 12);
        let ta = |t: &TechParams| {
            let fa = fpia_area(t, f.inputs, f.outputs, f.grid, routing_area(&f, t));
            tiling_advantage(baseline_area(t, 900), fa).unwrap()
        };
        assert_eq!(ta(&t), ta(&t.scaled(7)));
    }

    #[test]
    fn sweep_single_point_and_crossover() {
        let base = TechPreset::EflashOptimistic.params();
        let f = FabricParams::shared(8, 16);
        let probs = vec![SweepProblem {
            name: "p".into(),
            n: 4000,
            fabric: Some(f),
        }];
        let rows = sweep(&base, &[base.a_adc], &[base.a_cell], &probs);
        let direct = tiling_advantage(
            baseline_area(&base, 4000),
            fpia_area(&base, 140, 40, 8, routing_area(&f, &base)),
        )
        .unwrap();
        assert_eq!(rows[0].ta, Some(direct));

        let adc = [1_000, 100_000, 1_000_000, 100_000_000];
        let cell = [10, 60, 180, 600, 2000];
        let rows = sweep(&base, &adc, &cell, &probs);
        let ta = |ai: usize, ci: usize| rows[ai * cell.len() + ci].ta.unwrap();
        for ci in 0..cell.len() {
            for ai in 1..adc.len() {
                assert!(ta(ai, ci) >= ta(ai - 1, ci));
            }
        }
        let slope_sign = |ai: usize| ta(ai, cell.len() - 1) > ta(ai, 0);
        assert!(slope_sign(0) != slope_sign(adc.len() - 1));
    }

    #[test]
    fn sweep_csv_marks_unroutable() {
        let base = TechPreset::Sram.params();
        let probs = vec![SweepProblem {
            name: "bad".into(),
            n: 256,
            fabric: None,
        }];
        let csv = sweep_csv(&sweep(&base, &[1_000_000], &[600], &probs));
        assert_eq!(
            csv,
            format!("{SWEEP_HEADER}\nbad,1000000,600,,,unroutable,41103193.6,\n")
        );
    }
}
