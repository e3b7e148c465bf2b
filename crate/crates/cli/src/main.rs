//! Batch driver: dispersion diagrams, exceptional values, field solves,
//! convergence studies, cross-method comparison and the damped-truncation
//! oracle, emitting CSV tables, plain-text reports and SVG plots.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use lapwave_core::cci::{cci_solve_multi, discretize, Discretization};
use lapwave_core::coeffs::{example_problem, Bc, CoefficientField, ExampleId, ScatteringProblem};
use lapwave_core::decomp::decomp_solve_multi;
use lapwave_core::field::{restrict_to_mesh, MultiCellField};
use lapwave_core::linalg::loglog_slope;
use lapwave_core::oracle::{damped_truncated_solve, lap_extrapolate};
use lapwave_core::pencil::assemble_weighted_mass;
use lapwave_core::report::{
    svg_line_plot, write_convergence_csv, write_dispersion_csv, write_field_csv, SolverReport,
};
use lapwave_core::spectral::{dispersion_branches, propagating_modes};
use lapwave_core::{Error, Result};

/// Damping schedule of the oracle verb.
const ORACLE_EPSILONS: [f64; 3] = [0.64, 0.32, 0.16];
/// Truncation half-length of the oracle verb, in cells.
const ORACLE_HALF_LENGTH: usize = 60;

const USAGE: &str = "usage: lapwave <dispersion|exceptional|solve|converge|compare|oracle> \
[--example ID] [--config FILE] [--method cci|decomp|oracle] [--h H[,H...]] [--N N[,N...]] \
[--delta D] [--sigma S] [--bc neumann|dirichlet] [--axis N|h] [--cells C[,C...]] \
[--out DIR] [--ref-N N] [--ref-h H]";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Merged key/value options from a config file and command-line flags.
struct Options {
    map: BTreeMap<String, String>,
}

const KNOWN_KEYS: [&str; 13] = [
    "example", "config", "method", "h", "N", "delta", "sigma", "bc", "axis", "cells", "out",
    "ref-N", "ref-h",
];

impl Options {
    /// Parses `--key value` pairs, folding in the config file first so the
    /// command line wins.
    fn parse(args: &[String]) -> Result<Self> {
        let mut cli = BTreeMap::new();
        let mut it = args.iter();
        while let Some(a) = it.next() {
            let key = a
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("expected a --flag, got {a}\n{USAGE}")))?;
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown flag --{key}\n{USAGE}")));
            }
            let value = it
                .next()
                .ok_or_else(|| Error::Config(format!("--{key} needs a value")))?;
            cli.insert(key.to_string(), value.clone());
        }
        let mut map = BTreeMap::new();
        if let Some(path) = cli.get("config") {
            for (num, line) in std::fs::read_to_string(path)?.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!("{path}:{}: expected `key = value`", num + 1))
                })?;
                let key = key.trim();
                if !KNOWN_KEYS.contains(&key) {
                    return Err(Error::Config(format!("{path}:{}: unknown key {key}", num + 1)));
                }
                map.insert(key.to_string(), value.trim().to_string());
            }
        }
        map.extend(cli);
        Ok(Self { map })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("--{key}: not a number: {s}"))),
        }
    }

    fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("--{key}: not a number: {p}")))
                })
                .collect(),
        }
    }

    fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("--{key}: not a count: {p}")))
                })
                .collect(),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        let list = self.usize_list(key, &[default])?;
        match list.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::Config(format!("--{key}: expected a single value"))),
        }
    }

    fn cells(&self) -> Result<Vec<i32>> {
        match self.get("cells") {
            None => Ok(vec![0]),
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("--cells: not an integer: {p}")))
                })
                .collect(),
        }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = PathBuf::from(self.get("out").unwrap_or("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn problem(&self) -> Result<ScatteringProblem> {
        let id = ExampleId::parse(self.get("example").unwrap_or("1"))?;
        let mut prob = example_problem(id);
        if let Some(bc) = self.get("bc") {
            prob.bc = Bc::parse(bc)?;
        }
        prob.validate_positivity(64)?;
        Ok(prob)
    }

    fn delta(&self) -> Result<Option<f64>> {
        Ok(match self.get("delta") {
            None => None,
            Some(_) => Some(self.f64_or("delta", 0.0)?),
        })
    }

    fn sigma(&self) -> Result<Option<f64>> {
        Ok(match self.get("sigma") {
            None => None,
            Some(_) => Some(self.f64_or("sigma", 0.0)?),
        })
    }
}

fn check_h(h: f64) -> Result<f64> {
    if h > 0.0 && h < 0.5 {
        Ok(h)
    } else {
        Err(Error::Config(format!("mesh size must lie in (0, 0.5), got {h}")))
    }
}

fn run(args: &[String]) -> Result<()> {
    let Some((verb, rest)) = args.split_first() else {
        return Err(Error::Config(USAGE.into()));
    };
    let opts = Options::parse(rest)?;
    match verb.as_str() {
        "dispersion" => cmd_dispersion(&opts),
        "exceptional" => cmd_exceptional(&opts),
        "solve" => cmd_solve(&opts),
        "converge" => cmd_converge(&opts),
        "compare" => cmd_compare(&opts),
        "oracle" => cmd_oracle(&opts),
        other => Err(Error::Config(format!("unknown verb {other}\n{USAGE}"))),
    }
}

fn unit_mass(disc: &Discretization) -> Result<lapwave_core::pencil::SpMat> {
    assemble_weighted_mass(&disc.mesh, &disc.basis, &CoefficientField::constant(1.0))
}

fn cmd_dispersion(opts: &Options) -> Result<()> {
    let prob = opts.problem()?;
    let h = check_h(opts.f64_or("h", 0.02)?)?;
    let out = opts.out_dir()?;
    let disc = discretize(&prob, h)?;
    let alphas: Vec<f64> = (0..=120).map(|i| -PI + i as f64 * PI / 60.0).collect();
    let branches = 8;
    let rows = dispersion_branches(&disc.pencil, &alphas, branches)?;
    write_dispersion_csv(&out.join("dispersion.csv"), &alphas, &rows)?;
    let series: Vec<(String, Vec<(f64, f64)>)> = (0..branches)
        .map(|b| {
            let name = format!("mu_{}", b + 1);
            let pts = alphas
                .iter()
                .zip(&rows)
                .filter_map(|(&a, row)| row.get(b).map(|&mu| (a, mu)))
                .collect();
            (name, pts)
        })
        .collect();
    let named: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(n, p)| (n.as_str(), p.clone()))
        .collect();
    svg_line_plot(&out.join("dispersion.svg"), "dispersion branches", &named, false)?;
    let mut report = SolverReport::default();
    report.push("verb", "dispersion");
    report.push("h", h);
    report.push("k_squared", prob.k_squared());
    report.push("alphas", alphas.len());
    report.push("branches", branches);
    report.write(&out.join("report.txt"))?;
    println!(
        "dispersion: {} branches at {} quasimomenta -> {}",
        branches,
        alphas.len(),
        out.join("dispersion.csv").display()
    );
    Ok(())
}

fn cmd_exceptional(opts: &Options) -> Result<()> {
    let prob = opts.problem()?;
    let h = check_h(opts.f64_or("h", 0.02)?)?;
    let out = opts.out_dir()?;
    let disc = discretize(&prob, h)?;
    let modes = propagating_modes(&disc.pencil, prob.k)?;
    let mut report = SolverReport::default();
    report.push("verb", "exceptional");
    report.push("h", h);
    report.push("k_squared", prob.k_squared());
    for (label, list) in [("rightward", &modes.rightward), ("leftward", &modes.leftward)] {
        for (i, m) in list.iter().enumerate() {
            report.push(
                &format!("{label}_{i}"),
                format!("beta = {:.10}, lambda = {:.10}", m.beta, m.lambda),
            );
            println!("{label}: beta = {:.10}  lambda = {:.10}", m.beta, m.lambda);
        }
    }
    if modes.rightward.is_empty() && modes.leftward.is_empty() {
        println!("no propagating modes at k^2 = {}", prob.k_squared());
    }
    report.write(&out.join("report.txt"))?;
    Ok(())
}

fn write_solution(
    out: &Path,
    disc: &Discretization,
    field: &MultiCellField,
    report: &mut SolverReport,
) -> Result<()> {
    write_field_csv(&out.join("field.csv"), field, &disc.mesh, &disc.basis)?;
    let mass = unit_mass(disc)?;
    let norm: f64 = field
        .cells
        .iter()
        .map(|c| c.l2_norm(&mass).powi(2))
        .sum::<f64>()
        .sqrt();
    report.push("field_l2", format!("{norm:.6e}"));
    report.write(&out.join("report.txt"))?;
    println!("field written to {} (|u| = {norm:.6e})", out.join("field.csv").display());
    Ok(())
}

fn cmd_solve(opts: &Options) -> Result<()> {
    let method = opts.get("method").unwrap_or("cci");
    if method == "oracle" {
        return cmd_oracle(opts);
    }
    let prob = opts.problem()?;
    let h = check_h(opts.f64_or("h", 0.02)?)?;
    let n = opts.usize_or("N", 64)?;
    let cells = opts.cells()?;
    let out = opts.out_dir()?;
    let disc = discretize(&prob, h)?;
    let mut report = SolverReport::default();
    report.push("verb", "solve");
    report.push("method", method);
    report.push("h", h);
    report.push("N", n);
    match method {
        "cci" => {
            let run = cci_solve_multi(&prob, h, &[n], opts.delta()?, &cells)?;
            report.push("delta", run.delta);
            report.push(
                "rightward_betas",
                format!("{:?}", run.rightward_betas),
            );
            report.push("leftward_betas", format!("{:?}", run.leftward_betas));
            let field = &run.solutions.last().unwrap().1;
            write_solution(&out, &disc, field, &mut report)
        }
        "decomp" => {
            let run = decomp_solve_multi(&prob, h, &[n], opts.sigma()?, &cells)?;
            report.push("sigma", run.sigma);
            report.push("tau", run.tau);
            let sol = &run.solutions.last().unwrap().1;
            for (i, a) in sol.amplitudes.iter().enumerate() {
                report.push(&format!("amplitude_{i}"), format!("{:.6e}{:+.6e}i", a.re, a.im));
            }
            write_solution(&out, &disc, &sol.field, &mut report)
        }
        other => Err(Error::Config(format!(
            "unknown method {other}; expected cci, decomp or oracle"
        ))),
    }
}

/// Solves with one method at one mesh size for every quadrature count.
fn solve_per_count(
    prob: &ScatteringProblem,
    method: &str,
    h: f64,
    ns: &[usize],
    opts: &Options,
    cells: &[i32],
) -> Result<Vec<(usize, MultiCellField)>> {
    match method {
        "cci" => Ok(cci_solve_multi(prob, h, ns, opts.delta()?, cells)?.solutions),
        "decomp" => Ok(decomp_solve_multi(prob, h, ns, opts.sigma()?, cells)?
            .solutions
            .into_iter()
            .map(|(n, s)| (n, s.field))
            .collect()),
        other => Err(Error::Config(format!(
            "unknown method {other}; expected cci or decomp"
        ))),
    }
}

fn rel_diff(disc: &Discretization, a: &MultiCellField, b: &MultiCellField) -> Result<f64> {
    let mass = unit_mass(disc)?;
    Ok(a.rel_l2_diff(b, &mass))
}

fn cmd_converge(opts: &Options) -> Result<()> {
    let prob = opts.problem()?;
    let method = opts.get("method").unwrap_or("cci");
    let axis = opts.get("axis").unwrap_or("N");
    let cells = opts.cells()?;
    let out = opts.out_dir()?;
    let mut report = SolverReport::default();
    report.push("verb", "converge");
    report.push("method", method);
    report.push("axis", axis);
    let rows: Vec<(f64, f64)> = match axis {
        "N" => {
            let h = check_h(opts.f64_or("h", 0.02)?)?;
            let ns = opts.usize_list("N", &[16, 32, 64, 128])?;
            let ref_n = opts.usize_or("ref-N", 256)?;
            let mut all = ns.clone();
            all.push(ref_n);
            let disc = discretize(&prob, h)?;
            let solutions = solve_per_count(&prob, method, h, &all, opts, &cells)?;
            let reference = &solutions.iter().find(|(n, _)| *n == ref_n).unwrap().1;
            report.push("h", h);
            report.push("ref_N", ref_n);
            ns.iter()
                .map(|&n| {
                    let f = &solutions.iter().find(|(m, _)| *m == n).unwrap().1;
                    Ok((n as f64, rel_diff(&disc, f, reference)?))
                })
                .collect::<Result<_>>()?
        }
        "h" => {
            let hs = opts.f64_list("h", &[0.04, 0.02, 0.01])?;
            let ref_h = check_h(opts.f64_or("ref-h", 0.005)?)?;
            let n = opts.usize_or("N", 256)?;
            let fine = discretize(&prob, ref_h)?;
            let fine_sol = solve_per_count(&prob, method, ref_h, &[n], opts, &cells)?
                .pop()
                .unwrap()
                .1;
            report.push("N", n);
            report.push("ref_h", ref_h);
            hs.iter()
                .map(|&h| {
                    check_h(h)?;
                    let disc = discretize(&prob, h)?;
                    let sol = solve_per_count(&prob, method, h, &[n], opts, &cells)?
                        .pop()
                        .unwrap()
                        .1;
                    let restricted = MultiCellField {
                        first_cell: fine_sol.first_cell,
                        cells: fine_sol
                            .cells
                            .iter()
                            .map(|c| {
                                restrict_to_mesh(&fine.mesh, &fine.basis, c, &disc.mesh, &disc.basis)
                            })
                            .collect(),
                    };
                    Ok((h, rel_diff(&disc, &sol, &restricted)?))
                })
                .collect::<Result<_>>()?
        }
        other => {
            return Err(Error::Config(format!("unknown axis {other}; expected N or h")));
        }
    };
    let slope = loglog_slope(&rows);
    write_convergence_csv(&out.join("convergence.csv"), &rows)?;
    svg_line_plot(
        &out.join("convergence.svg"),
        &format!("{method} error vs {axis}"),
        &[("rel_err", rows.clone())],
        true,
    )?;
    report.push("slope", format!("{slope:.4}"));
    for (p, e) in &rows {
        println!("{axis} = {p:<10} rel_err = {e:.6e}");
    }
    println!("observed log-log slope: {slope:.4}");
    report.write(&out.join("report.txt"))?;
    Ok(())
}

fn cmd_compare(opts: &Options) -> Result<()> {
    let prob = opts.problem()?;
    let h = check_h(opts.f64_or("h", 0.02)?)?;
    let n = opts.usize_or("N", 64)?;
    let cells = opts.cells()?;
    let out = opts.out_dir()?;
    let disc = discretize(&prob, h)?;
    let cci = cci_solve_multi(&prob, h, &[n], opts.delta()?, &cells)?;
    let dec = decomp_solve_multi(&prob, h, &[n], opts.sigma()?, &cells)?;
    let cf = &cci.solutions.last().unwrap().1;
    let df = &dec.solutions.last().unwrap().1.field;
    let diff = rel_diff(&disc, cf, df)?;
    let mut report = SolverReport::default();
    report.push("verb", "compare");
    report.push("h", h);
    report.push("N", n);
    report.push("delta", cci.delta);
    report.push("sigma", dec.sigma);
    report.push("rel_diff", format!("{diff:.6e}"));
    report.write(&out.join("report.txt"))?;
    println!("cci vs decomp relative difference: {diff:.6e}");
    Ok(())
}

fn cmd_oracle(opts: &Options) -> Result<()> {
    let prob = opts.problem()?;
    let h = check_h(opts.f64_or("h", 0.02)?)?;
    let out = opts.out_dir()?;
    let disc = discretize(&prob, h)?;
    let mut report = SolverReport::default();
    report.push("verb", "oracle");
    report.push("h", h);
    report.push("R", ORACLE_HALF_LENGTH);
    let mut runs = Vec::new();
    for (i, &eps) in ORACLE_EPSILONS.iter().enumerate() {
        let run = damped_truncated_solve(&prob, eps, ORACLE_HALF_LENGTH, h, 1.0)?;
        report.push(&format!("epsilon_{i}"), eps);
        report.push(
            &format!("boundary_decay_{i}"),
            format!(
                "{:.3e}",
                run.window_norm(ORACLE_HALF_LENGTH as i32 - 1) / run.window_norm(0).max(1e-300)
            ),
        );
        runs.push(run);
    }
    let (field, correction) = lap_extrapolate(&runs, &disc.mesh, &disc.basis)?;
    report.push("last_correction", format!("{correction:.3e}"));
    let field = MultiCellField {
        first_cell: 0,
        cells: vec![field],
    };
    write_solution(&out, &disc, &field, &mut report)
}
