//! CSV and JSON emission for divergence profiles and redirect sweeps.
//!
//! CSV is UTF-8 with a header row and LF line endings. Element encodings
//! are comma-free by construction, so no quoting is needed. For rank-2 free
//! abelian groups the witness pair lands in numeric ax/ay/bx/by columns;
//! every other family carries its canonical encoding in ax/bx with ay/by
//! empty.

use std::fmt::Write as _;

use qr_core::divergence::{GrowthFit, Profile};
use qr_core::group::{Family, GroupElement, GroupSpec};
use qr_core::redirect::{AnnulusCheck, RedirectReport, SweepVerdict};
use serde_json::{json, Value};

pub const DIVERGENCE_HEADER: &str = "family,r,delta,gamma,strategy,div,ax,ay,bx,by,disconnected,cap";
pub const REDIRECT_HEADER: &str =
    "family,s,case,q_measured,Q_used,coincidence_prefix,landing_index,C_used,len_tau,len_sigma,len_final,verdict";

#[derive(Debug)]
pub enum TableError {
    NoRecords,
    Io(std::io::Error),
    Parse(String),
}

impl From<std::io::Error> for TableError {
    fn from(e: std::io::Error) -> Self {
        TableError::Io(e)
    }
}

impl std::fmt::Display for TableError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TableError::NoRecords => write!(f, "no records"),
            TableError::Io(e) => write!(f, "{e}"),
            TableError::Parse(s) => write!(f, "csv parse error: {s}"),
        }
    }
}

fn element_columns(spec: &GroupSpec, g: &GroupElement) -> (String, String) {
    if let (Family::FreeAbelian(2), GroupElement::Vector(v)) = (spec.family(), g) {
        (v[0].to_string(), v[1].to_string())
    } else {
        (g.encode(), String::new())
    }
}

/// Renders a divergence profile as CSV text (one row per radius).
pub fn divergence_csv(spec: &GroupSpec, profile: &Profile) -> Result<String, TableError> {
    if profile.points.is_empty() {
        return Err(TableError::NoRecords);
    }
    let mut out = String::new();
    out.push_str(DIVERGENCE_HEADER);
    out.push('\n');
    let family = spec.to_spec_string();
    let strategy = profile.params.strategy.label();
    for point in &profile.points {
        let rec = &point.best;
        let (ax, ay) = element_columns(spec, &rec.a);
        let (bx, by) = element_columns(spec, &rec.b);
        let (div, disconnected) = match rec.value.finite() {
            Some(v) => (v.to_string(), "false"),
            None => (String::new(), "true"),
        };
        writeln!(
            out,
            "{family},{r},{delta},{gamma},{strategy},{div},{ax},{ay},{bx},{by},{disconnected},{cap}",
            r = point.r,
            delta = rec.delta,
            gamma = rec.gamma,
            cap = rec.cap,
        )
        .expect("string write");
    }
    Ok(out)
}

/// Renders a redirect sweep as CSV text (one row per radius).
pub fn redirect_csv(
    spec: &GroupSpec,
    reports: &[RedirectReport],
    verdict: &SweepVerdict,
) -> Result<String, TableError> {
    if reports.is_empty() {
        return Err(TableError::NoRecords);
    }
    let mut out = String::new();
    out.push_str(REDIRECT_HEADER);
    out.push('\n');
    let family = spec.to_spec_string();
    for r in reports {
        let (len_tau, len_sigma) = match &r.case2 {
            Some(c2) => (c2.tau.len_edges().to_string(), c2.sigma.len_edges().to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{family},{s},{case},{q},{q_add},{prefix},{landing},{c},{len_tau},{len_sigma},{len_final},{verdict}",
            s = r.s,
            case = r.case,
            q = r.final_q,
            q_add = r.q_add,
            prefix = r.coincidence_prefix,
            landing = r.landing_index,
            c = r.c_used,
            len_final = r.final_path.len_edges(),
            verdict = verdict.label(),
        )
        .expect("string write");
    }
    Ok(out)
}

/// JSON mirror of the divergence CSV, with fit and threshold metadata.
pub fn divergence_json(spec: &GroupSpec, profile: &Profile, fit: Option<&GrowthFit>) -> Value {
    let rows: Vec<Value> = profile
        .points
        .iter()
        .map(|point| {
            let rec = &point.best;
            let (ax, ay) = element_columns(spec, &rec.a);
            let (bx, by) = element_columns(spec, &rec.b);
            json!({
                "family": spec.to_spec_string(),
                "r": point.r,
                "delta": rec.delta,
                "gamma": rec.gamma,
                "strategy": profile.params.strategy.label(),
                "div": rec.value.finite(),
                "ax": ax,
                "ay": ay,
                "bx": bx,
                "by": by,
                "disconnected": rec.value.is_disconnected(),
                "cap": rec.cap,
                "exact": point.exact,
                "wall_time_ms": rec.wall_time_ms,
            })
        })
        .collect();
    let fit_json = fit.map(|f| {
        json!({
            "exponent": f.exponent,
            "linear_constant": f.linear_constant,
            "classification": f.classification.to_string(),
            "exponent_threshold": f.exponent_threshold,
            "ratio_factor": f.ratio_factor,
        })
    });
    json!({
        "schema": "divergence",
        "meta": {
            "note": "profile indexed by sphere radius r; sampled strategies report certified lower bounds",
            "classification_thresholds": {
                "linear_exponent_max": qr_core::divergence::LINEAR_EXPONENT_MAX,
                "linear_ratio_factor": qr_core::divergence::LINEAR_RATIO_FACTOR,
            },
            "truncated": profile.truncated,
        },
        "rows": rows,
        "fit": fit_json,
    })
}

/// JSON mirror of the redirect CSV, with verdict metadata.
pub fn redirect_json(spec: &GroupSpec, reports: &[RedirectReport], verdict: &SweepVerdict) -> Value {
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            let annulus = match r.annulus_check {
                AnnulusCheck::Applied { cross_ratio, bound } => {
                    json!({"applied": true, "cross_ratio": cross_ratio, "bound": bound})
                }
                AnnulusCheck::SkippedDeskScale { delta_eff, eps_eff } => {
                    json!({"applied": false, "delta_eff": delta_eff, "eps_eff": eps_eff})
                }
                AnnulusCheck::NotApplicable => Value::Null,
            };
            json!({
                "family": spec.to_spec_string(),
                "s": r.s,
                "case": r.case.to_string(),
                "q_measured": r.final_q,
                "Q_used": r.q_add,
                "coincidence_prefix": r.coincidence_prefix,
                "landing_index": r.landing_index,
                "C_used": r.c_used,
                "len_tau": r.case2.as_ref().map(|c| c.tau.len_edges()),
                "len_sigma": r.case2.as_ref().map(|c| c.sigma.len_edges()),
                "len_final": r.final_path.len_edges(),
                "verdict": verdict.label(),
                "intermediate_q": r.intermediate_q.iter().map(|(n, q)| json!({"name": n, "q": q})).collect::<Vec<_>>(),
                "annulus_check": annulus,
            })
        })
        .collect();
    json!({
        "schema": "redirect",
        "meta": {
            "q_spread_limit": verdict.q_spread_limit,
            "q_budget": verdict.q_budget,
            "mixed_cases": verdict.mixed_cases,
            "c_used": verdict.c_used,
            "c_estimated": verdict.c_estimated,
            "note": "per-s case routing; a mixed sweep is flagged, not failed",
        },
        "rows": rows,
        "verdict": verdict.label(),
    })
}

/// Ball dump: spec string, radius, sphere sizes, optionally the elements in
/// breadth-first order.
pub fn ball_json(ball: &qr_core::Ball, with_elements: bool) -> Value {
    let mut v = json!({
        "spec": ball.spec().to_spec_string(),
        "radius": ball.radius(),
        "sphere_sizes": ball.sphere_sizes(),
    });
    if with_elements {
        let elems: Vec<String> = ball.elements().iter().map(|e| e.encode()).collect();
        v["elements"] = json!(elems);
    }
    v
}

/// One parsed CSV row, keyed by header column.
pub type CsvRow = std::collections::BTreeMap<String, String>;

/// Parses CSV text produced by this module.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, TableError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| TableError::Parse("empty file".into()))?
        .split(',')
        .collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(TableError::Parse(format!(
                "line {}: {} fields, expected {}",
                lineno + 2,
                fields.len(),
                header.len()
            )));
        }
        rows.push(
            header
                .iter()
                .zip(fields.iter())
                .map(|(h, f)| (h.to_string(), f.to_string()))
                .collect(),
        );
    }
    Ok(rows)
}

pub fn write_text(path: &std::path::Path, text: &str) -> Result<(), TableError> {
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qr_core::divergence::{divergence_profile, DivergenceParams, PairStrategy};
    use qr_core::{parse_group_spec, DistanceOracle};

    fn z2_profile() -> (GroupSpec, Profile) {
        let spec = parse_group_spec("z^2").unwrap();
        let oracle = DistanceOracle::closed_form(spec.clone()).unwrap();
        let params = DivergenceParams::canonical(PairStrategy::AllSpherePairs);
        let profile = divergence_profile(&oracle, &[4, 6, 8], &params, 32, 100_000).unwrap();
        (spec, profile)
    }

    #[test]
    fn divergence_csv_shape() {
        let (spec, profile) = z2_profile();
        let csv = divergence_csv(&spec, &profile).unwrap();
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(csv.starts_with(DIVERGENCE_HEADER));
        assert!(csv.ends_with('\n'));
        assert!(!csv.contains('\r'));
        for row in &rows {
            assert_eq!(row["family"], "z^2");
            assert_eq!(row["disconnected"], "false");
            assert!(!row["div"].is_empty());
            // z^2 witnesses land in the numeric columns.
            row["ax"].parse::<i64>().unwrap();
            row["ay"].parse::<i64>().unwrap();
        }
    }

    #[test]
    fn csv_values_round_trip_through_json() {
        let (spec, profile) = z2_profile();
        let csv = divergence_csv(&spec, &profile).unwrap();
        let rows = parse_csv(&csv).unwrap();
        let json = divergence_json(&spec, &profile, None);
        for (row, jrow) in rows.iter().zip(json["rows"].as_array().unwrap()) {
            assert_eq!(row["r"].parse::<u64>().unwrap(), jrow["r"].as_u64().unwrap());
            assert_eq!(row["delta"].parse::<f64>().unwrap(), jrow["delta"].as_f64().unwrap());
            assert_eq!(row["gamma"].parse::<f64>().unwrap(), jrow["gamma"].as_f64().unwrap());
            assert_eq!(
                row["div"].parse::<u64>().unwrap(),
                jrow["div"].as_u64().unwrap(),
            );
            assert_eq!(row["ax"], jrow["ax"].as_str().unwrap_or(&row["ax"]).to_string());
            assert_eq!(row["cap"].parse::<u64>().unwrap(), jrow["cap"].as_u64().unwrap());
        }
    }

    #[test]
    fn disconnected_rows_have_empty_div() {
        let spec = parse_group_spec("free:2").unwrap();
        let oracle = DistanceOracle::closed_form(spec.clone()).unwrap();
        let params = DivergenceParams::canonical(PairStrategy::AllSpherePairs);
        let profile = divergence_profile(&oracle, &[4, 8], &params, 32, 200_000).unwrap();
        let csv = divergence_csv(&spec, &profile).unwrap();
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows[0]["disconnected"], "false");
        assert_eq!(rows[1]["disconnected"], "true");
        assert!(rows[1]["div"].is_empty());
        // Non-vector family: encodings in ax, empty ay.
        assert!(rows[1]["ay"].is_empty());
    }

    #[test]
    fn empty_profiles_are_an_error() {
        let spec = parse_group_spec("z^2").unwrap();
        let profile = Profile {
            points: vec![],
            params: DivergenceParams::canonical(PairStrategy::AllSpherePairs),
            cap: 8,
            truncated: None,
        };
        assert!(matches!(divergence_csv(&spec, &profile), Err(TableError::NoRecords)));
    }
}
