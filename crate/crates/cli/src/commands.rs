use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};
use wnk::charfun::{
    drifting_dirac_family, equicontinuity_modulus, fubini_check, gram_psd_check, m_constant,
    m_ratio, sample_white_noise_batch, sphere_probe, white_noise_fubini_lhs, CharFunctional,
    Verdict,
};
use wnk::csv::real;
use wnk::donsker::{convergence_experiment, rate_estimate, NamedTestFunction};
use wnk::hermite::{gh_rule, hermite_point};
use wnk::rng::derive_seed;
use wnk::scale::{embedding_norm, exhaustion_index, exhaustion_table, Ball};
use wnk::{DistributionVector, TestFunction};

use crate::config::{Expectation, Family, RunConfig};
use crate::Command;

/// Seed tags for the independent random streams a command needs.
const TAG_FUBINI_M: u64 = 1;
const TAG_PSD_PROBES: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Everything a command produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub report: Value,
    pub csv: String,
    pub assertions: Vec<Assertion>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn report_json(&self, cfg: &RunConfig) -> Value {
        json!({
            "command": self.command.name(),
            "config": cfg,
            "result": self.report,
            "assertions": self.assertions,
            "passed": self.passed(),
        })
    }

    pub fn write(&self, cfg: &RunConfig) -> anyhow::Result<()> {
        let dir = &cfg.out;
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let report = serde_json::to_string_pretty(&self.report_json(cfg))?;
        write_file(&dir.join("report.json"), &report)?;
        write_file(&dir.join("table.csv"), &self.csv)
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run_command(command: Command, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (report, csv, assertions) = match command {
        Command::Donsker => donsker(cfg)?,
        Command::Tightness => tightness(cfg)?,
        Command::Minlos => minlos(cfg)?,
        Command::Hemicompact => hemicompact(cfg)?,
        Command::Tables => tables(cfg)?,
    };
    Ok(Outcome {
        command,
        report,
        csv,
        assertions,
    })
}

type Parts = (Value, String, Vec<Assertion>);

fn donsker(cfg: &RunConfig) -> anyhow::Result<Parts> {
    let basis = cfg.basis()?;
    let innovation = cfg.innovation()?;
    let phis = cfg
        .phis
        .iter()
        .map(|p| {
            Ok(NamedTestFunction {
                id: p.id.clone(),
                phi: TestFunction::padded(basis, &p.coeffs)?,
            })
        })
        .collect::<wnk::Result<Vec<_>>>()?;
    let exp = convergence_experiment(
        &phis,
        &cfg.n_schedule,
        innovation,
        cfg.n_mc,
        cfg.seed,
        cfg.tail_tol,
    )?;

    let mut assertions = Vec::new();
    let mut rates = BTreeMap::new();
    for p in &cfg.phis {
        let rows: Vec<_> = exp.rows_for(&p.id).collect();
        let errs: Vec<f64> = rows.iter().map(|r| r.analytic_err).collect();
        let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
        assertions.push(Assertion::new(
            format!("{}: analytic error nonincreasing in n", p.id),
            monotone,
            format!("errors {errs:?}"),
        ));
        for r in &rows {
            assertions.push(Assertion::new(
                format!("{}: n = {} empirical within 5/sqrt(N_mc)", p.id, r.n),
                r.empirical_vs_analytic <= r.mc_tolerance,
                format!(
                    "|empirical - analytic| = {:e}, tolerance {:e}",
                    r.empirical_vs_analytic, r.mc_tolerance
                ),
            ));
        }
        if let (Some(max), Some(last)) = (cfg.max_final_error, rows.last()) {
            assertions.push(Assertion::new(
                format!("{}: final error <= {max:e}", p.id),
                last.analytic_err <= max,
                format!("error at n = {} is {:e}", last.n, last.analytic_err),
            ));
        }
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.analytic_err)).collect();
        rates.insert(p.id.clone(), rate_estimate(&points).ok());
    }
    let report = json!({ "experiment": exp, "rate_estimates": rates });
    Ok((report, exp.to_csv(), assertions))
}

fn tightness(cfg: &RunConfig) -> anyhow::Result<Parts> {
    let basis = cfg.basis()?;
    let family: Vec<CharFunctional> = match cfg.family {
        Family::WhiteNoise => vec![CharFunctional::WhiteNoise],
        Family::DriftingDirac => drifting_dirac_family(basis, &cfg.dirac_indices)?,
        Family::Product => {
            let innovation = cfg.innovation()?;
            cfg.n_schedule
                .iter()
                .map(|&n| CharFunctional::ProductIid {
                    innovation,
                    n,
                    tail_tol: cfg.tail_tol,
                })
                .collect()
        }
    };
    let mut csv = String::from("family_id,m,delta,modulus\n");
    let mut scans = Vec::new();
    for &m in &cfg.m_values {
        for &delta in &cfg.deltas {
            let r = equicontinuity_modulus(
                &family,
                basis,
                m,
                delta,
                cfg.probes,
                cfg.seed,
                cfg.epsilon,
            )?;
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                cfg.family.id(),
                m,
                real(delta),
                real(r.modulus)
            );
            scans.push(r);
        }
    }
    let mut assertions = Vec::new();
    if let Some(expect) = cfg.expect {
        let want = match expect {
            Expectation::Equicontinuous => Verdict::EquicontinuousAtScale,
            Expectation::Violation => Verdict::Violation,
        };
        for r in &scans {
            assertions.push(Assertion::new(
                format!(
                    "m = {}, delta = {}: verdict {}",
                    r.m,
                    r.delta,
                    want.as_str()
                ),
                r.verdict == want,
                format!("modulus {:e} against epsilon {:e}", r.modulus, r.epsilon),
            ));
        }
    }
    let members: Vec<String> = family.iter().map(|f| f.label()).collect();
    let report = json!({ "family": cfg.family.id(), "members": members, "scans": scans });
    Ok((report, csv, assertions))
}

fn minlos(cfg: &RunConfig) -> anyhow::Result<Parts> {
    let basis = cfg.basis()?;
    let directions = cfg
        .directions
        .iter()
        .map(|d| TestFunction::padded(basis, d))
        .collect::<wnk::Result<Vec<_>>>()?;
    let samples = sample_white_noise_batch(basis, cfg.seed, cfg.n_mu);
    let fubini = fubini_check(
        &samples,
        &directions,
        cfg.n_m,
        derive_seed(cfg.seed, TAG_FUBINI_M),
    )?;
    let exact = white_noise_fubini_lhs(&directions)?;
    let m = m_constant(cfg.m_tol)?;
    let limit = m_ratio(0.0);
    let probe_seed = derive_seed(cfg.seed, TAG_PSD_PROBES);
    let probes: Vec<TestFunction> = (0..cfg.psd_probes)
        .map(|p| sphere_probe(basis, 0, 0.5 * (p + 1) as f64, probe_seed, p as u64))
        .collect();
    let psd = gram_psd_check(&CharFunctional::WhiteNoise, &probes, cfg.psd_tol)?;

    let se = fubini.se_lhs();
    let assertions = vec![
        Assertion::new(
            "fubini: |lhs - rhs| within threshold",
            fubini.agrees(),
            format!("diff {:e}, threshold {:e}", fubini.diff, fubini.threshold),
        ),
        Assertion::new(
            "fubini: lhs within 5 standard errors of the exact value",
            (fubini.lhs - exact).abs() <= 5.0 * se,
            format!("lhs {}, exact {exact}, standard error {se:e}", fubini.lhs),
        ),
        Assertion::new(
            "M in [2.0000, 2.0002]",
            (2.0..=2.0002).contains(&m.value),
            format!("M = {}", m.value),
        ),
        Assertion::new(
            "M attained within 0.05 of pi",
            (m.argmax - PI).abs() <= 0.05,
            format!("argmax {}", m.argmax),
        ),
        Assertion::new(
            "ratio limit at 0 is 1/2",
            (limit - 0.5).abs() <= 1e-9,
            format!("limit {limit}"),
        ),
        Assertion::new(
            "white-noise Gram matrix positive semidefinite",
            psd.is_psd,
            format!("min eigenvalue {:e}", psd.min_eigenvalue),
        ),
    ];
    let rows = [
        ("lhs", fubini.lhs),
        ("rhs", fubini.rhs),
        ("abs_diff", fubini.diff),
        ("threshold", fubini.threshold),
        ("sd_lhs", fubini.sd_lhs),
        ("sd_rhs", fubini.sd_rhs),
        ("lhs_exact", exact),
        ("m_value", m.value),
        ("m_argmax", m.argmax),
        ("m_limit_zero", limit),
        ("psd_min_eigenvalue", psd.min_eigenvalue),
    ];
    let mut csv = String::from("quantity,value\n");
    for (name, v) in rows {
        let _ = writeln!(csv, "{name},{}", real(v));
    }
    let report = json!({
        "fubini": fubini,
        "lhs_exact": exact,
        "m": m,
        "m_limit_zero": limit,
        "psd": psd,
        "psd_probes": cfg.psd_probes,
    });
    Ok((report, csv, assertions))
}

fn hemicompact(cfg: &RunConfig) -> anyhow::Result<Parts> {
    let basis = cfg.basis()?;
    let samples = sample_white_noise_batch(basis, cfg.seed, cfg.samples);
    let indices: Vec<Option<u32>> = samples.iter().map(exhaustion_index).collect();
    let uncovered = indices.iter().filter(|i| i.is_none()).count();
    let top = indices.iter().flatten().copied().max().unwrap_or(1);

    let mut histogram = BTreeMap::new();
    for i in indices.iter().flatten() {
        *histogram.entry(*i).or_insert(0usize) += 1;
    }

    let mut nesting_failures = 0usize;
    for x in &samples {
        for n in 1..=top {
            if Ball::exhaustion(n)?.contains(x) && !Ball::exhaustion(n + 1)?.contains(x) {
                nesting_failures += 1;
            }
        }
    }
    let zero_index = exhaustion_index(&DistributionVector::zeros(basis));
    let reference = exhaustion_index(&DistributionVector::unit(basis, 0)?.scaled(100.0));

    let table = exhaustion_table(&samples, top + 1)?;
    let mut csv = String::from("n,r_n,member_count\n");
    for row in &table {
        let _ = writeln!(csv, "{},{},{}", row.n, real(row.r_n), row.member_count);
    }
    let assertions = vec![
        Assertion::new(
            "every sample has a finite exhaustion index",
            uncovered == 0,
            format!("{uncovered} of {} samples uncovered", samples.len()),
        ),
        Assertion::new(
            "zero vector has index 1",
            zero_index == Some(1),
            format!("{zero_index:?}"),
        ),
        Assertion::new(
            "100 e0 has index 5",
            reference == Some(5),
            format!("{reference:?}"),
        ),
        Assertion::new(
            "K_n inside K_(n+1) on every sample",
            nesting_failures == 0,
            format!("{nesting_failures} nesting failures up to level {top}"),
        ),
    ];
    let report = json!({
        "samples": samples.len(),
        "histogram": histogram,
        "max_index": top,
        "zero_index": zero_index,
        "index_100_e0": reference,
        "nesting_failures": nesting_failures,
        "table": table,
    });
    Ok((report, csv, assertions))
}

fn tables(cfg: &RunConfig) -> anyhow::Result<Parts> {
    let mut csv = String::from("table,i,j,value\n");
    for k in 0..=cfg.hermite_max_k {
        for &t in &cfg.hermite_points {
            let _ = writeln!(
                csv,
                "hermite,{k},{},{}",
                real(t),
                real(hermite_point(k, t)?)
            );
        }
    }
    let mut assertions = Vec::new();
    for &q in &cfg.gh_orders {
        let rule = gh_rule(q)?;
        for (i, x) in rule.nodes.iter().enumerate() {
            let _ = writeln!(csv, "gh_node,{q},{i},{}", real(*x));
        }
        for (i, w) in rule.weights.iter().enumerate() {
            let _ = writeln!(csv, "gh_weight,{q},{i},{}", real(*w));
        }
        if q == 2 {
            let node_err = (rule.nodes[1] - 0.5f64.sqrt()).abs();
            let weight_err = (rule.weights[0] - PI.sqrt() / 2.0).abs();
            assertions.push(Assertion::new(
                "Gauss-Hermite Q = 2 matches +-1/sqrt2, sqrt(pi)/2",
                node_err < 1e-14 && weight_err < 1e-14,
                format!("node error {node_err:e}, weight error {weight_err:e}"),
            ));
        }
    }
    let top = cfg.embedding_max_level;
    for k in 0..=top {
        for n in k..=top {
            let _ = writeln!(
                csv,
                "embedding_norm,{k},{n},{}",
                real(embedding_norm(k, n)?)
            );
        }
    }
    let m = m_constant(cfg.m_tol)?;
    let _ = writeln!(csv, "m_constant,0,0,{}", real(m.value));
    let _ = writeln!(csv, "m_argmax,0,0,{}", real(m.argmax));

    let e02 = embedding_norm(0, 2)?;
    assertions.push(Assertion::new(
        "embedding_norm(0, 2) = 0.25",
        e02 == 0.25,
        format!("{e02}"),
    ));
    assertions.push(Assertion::new(
        "M in [2.0000, 2.0002]",
        (2.0..=2.0002).contains(&m.value),
        format!("M = {}", m.value),
    ));
    let report = json!({
        "hermite_points": cfg.hermite_points,
        "hermite_max_k": cfg.hermite_max_k,
        "gh_orders": cfg.gh_orders,
        "embedding_max_level": top,
        "m": m,
    });
    Ok((report, csv, assertions))
}
