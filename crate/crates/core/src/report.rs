//! CSV rows emitted by the command-line front end.
//!
//! Every row carries the full configuration that produced it plus the code
//! version, so a single line is enough to reproduce a result. Output is
//! UTF-8 with LF line endings, a header row and `.` as decimal separator.

use crate::bounds::BoundReport;
use crate::model::{DefectiveSet, NoiseModel};
use crate::montecarlo::{ErrorEstimate, MinimalTResult, PeiProfile};
use crate::VERSION;
use serde::Serialize;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundRow {
    pub kind: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub p: f64,
    pub channel: &'static str,
    pub param: Option<f64>,
    /// `-1` on the summary row.
    pub i: i64,
    pub numerator_bits: Option<f64>,
    pub mi_bits: Option<f64>,
    /// Per-partition ratio, or the bound itself on the summary row.
    pub ratio_tests: f64,
    pub argmax_i: Option<usize>,
    pub zero_information: bool,
    pub version: &'static str,
}

/// Per-`i` rows followed by the `i = -1` summary row.
pub fn bound_rows(report: &BoundReport) -> Vec<BoundRow> {
    let base = |i: i64| BoundRow {
        kind: report.kind.to_string(),
        n: report.n,
        k: report.k,
        p: report.p,
        channel: report.channel.name(),
        param: report.channel.param(),
        i,
        numerator_bits: None,
        mi_bits: None,
        ratio_tests: 0.0,
        argmax_i: None,
        zero_information: false,
        version: VERSION,
    };
    let mut rows: Vec<BoundRow> = report
        .per_i
        .iter()
        .map(|e| BoundRow {
            numerator_bits: Some(e.numerator_bits),
            mi_bits: Some(e.mutual_info_bits),
            ratio_tests: e.ratio_tests,
            zero_information: e.zero_information,
            ..base(e.i as i64)
        })
        .collect();
    rows.push(BoundRow {
        ratio_tests: report.bound_tests,
        argmax_i: Some(report.argmax_i),
        zero_information: report.is_infinite(),
        ..base(-1)
    });
    rows
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EstimateRow {
    pub criterion: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub p: f64,
    pub channel: &'static str,
    pub param: Option<f64>,
    pub alpha: Option<f64>,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci: f64,
    pub seed: u64,
    pub version: &'static str,
}

pub fn estimate_row(e: &ErrorEstimate) -> EstimateRow {
    EstimateRow {
        criterion: e.criterion.name(),
        n: e.scenario.n_items,
        k: e.scenario.k,
        t: e.scenario.n_tests,
        p: e.scenario.p,
        channel: e.scenario.noise.name(),
        param: e.scenario.noise.param(),
        alpha: e.criterion.alpha(),
        trials: e.trials,
        errors: e.errors,
        p_hat: e.p_hat,
        ci: e.ci_half_width,
        seed: e.seed,
        version: VERSION,
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ProfileRow {
    pub criterion: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub p: f64,
    pub channel: &'static str,
    pub param: Option<f64>,
    pub alpha: Option<f64>,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci: f64,
    pub seed: u64,
    pub i: usize,
    pub version: &'static str,
}

pub fn profile_rows(profile: &PeiProfile) -> Vec<ProfileRow> {
    let s = &profile.scenario;
    profile
        .counts
        .iter()
        .enumerate()
        .map(|(j, &errors)| {
            let ci = crate::stats::error_interval(errors, profile.trials);
            ProfileRow {
                criterion: "pei",
                n: s.n_items,
                k: s.k,
                t: s.n_tests,
                p: s.p,
                channel: s.noise.name(),
                param: s.noise.param(),
                alpha: None,
                trials: profile.trials,
                errors,
                p_hat: errors as f64 / profile.trials as f64,
                ci: ci.half_width,
                seed: profile.seed,
                i: j + 1,
                version: VERSION,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MinimalTRow {
    pub criterion: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub p: f64,
    pub channel: &'static str,
    pub param: Option<f64>,
    pub alpha: Option<f64>,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci: f64,
    pub seed: u64,
    pub target: f64,
    pub t_star: Option<usize>,
    pub resolution: usize,
    pub ambiguous: bool,
    pub version: &'static str,
}

/// One row per probe, each repeating the search outcome.
pub fn minimal_t_rows(result: &MinimalTResult) -> Vec<MinimalTRow> {
    result
        .probed
        .iter()
        .map(|(_, e)| {
            let r = estimate_row(e);
            MinimalTRow {
                criterion: r.criterion,
                n: r.n,
                k: r.k,
                t: r.t,
                p: r.p,
                channel: r.channel,
                param: r.param,
                alpha: r.alpha,
                trials: r.trials,
                errors: r.errors,
                p_hat: r.p_hat,
                ci: r.ci,
                seed: r.seed,
                target: result.target_error,
                t_star: result.t_star,
                resolution: result.resolution,
                ambiguous: result.ambiguous,
                version: VERSION,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TraceRow {
    pub candidate: String,
    pub log2_likelihood: f64,
    pub channel: &'static str,
    pub param: Option<f64>,
    pub version: &'static str,
}

pub fn trace_rows(trace: &[(DefectiveSet, f64)], noise: &NoiseModel) -> Vec<TraceRow> {
    trace
        .iter()
        .map(|(set, ll)| TraceRow {
            candidate: set.to_string(),
            log2_likelihood: *ll,
            channel: noise.name(),
            param: noise.param(),
            version: VERSION,
        })
        .collect()
}

/// Serializes rows with a header line.
pub fn to_csv<R: Serialize>(rows: &[R]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("rows serialize to CSV");
    }
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("UTF-8 output")
}
