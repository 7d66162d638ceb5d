//! Command-line front end: every experiment of the library as a subcommand
//! with machine-readable output, so parameter studies are reproducible
//! one-liners.
//!
//! Conventions shared by all subcommands:
//!
//! * complex-valued flags take `re,im`; a bare real is accepted;
//! * `--format json` (the default) wraps the report in an envelope with a
//!   top-level `"schema": 1` and stable key order; `--format csv` emits a
//!   comment header plus one table with a header row;
//! * output is deterministic byte for byte apart from the timestamp line,
//!   which `--no-timestamp` suppresses;
//! * exit code 0 means every check the command ran passed its tolerance,
//!   1 means a tolerance failure, 2 means the input was invalid.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use stokes_unfold::borel::stokes_jump_origin;
use stokes_unfold::model::{
    classify_resonance, heun_case_check, CandidatePoint, Epsilon, GeneralParams, Params, PointId,
    Q41Reading, ResonanceKind,
};
use stokes_unfold::oracle::{fundamental_frame, monodromy_ode, residue_contour, FrameKind, Loop};
use stokes_unfold::stokes::{
    a_k_recursion, bessel_sum_S, psi_coefficients, stokes_infinity, stokes_origin,
};
use stokes_unfold::unfold::{
    d_coefficient, limit_closed_form, limit_experiment, monodromy_decomp, MainCase,
};
use stokes_unfold::Mat2;

const TWO_PI_I: Complex64 = Complex64::new(0.0, std::f64::consts::TAU);

#[derive(Parser)]
#[command(name = "stokes-unfold", version, about = "Stokes matrices of a confluent equation and the monodromy of its unfolding")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Stokes multipliers and matrices at the origin and at infinity
    Stokes(StokesArgs),
    /// Divergent series coefficients and their ratio-test radius estimates
    Series(SeriesArgs),
    /// Quadrature jump across the singular direction vs the residue closed form
    Borel(BorelArgs),
    /// Closed-form monodromy data at a double resonance
    Unfold(UnfoldArgs),
    /// Convergence of 2 pi i d to the Stokes multipliers as eps -> 0
    Converge(ConvergeArgs),
    /// Singularity census of the unfolded equation and family detection
    Classify(ClassifyArgs),
    /// Closed-form d against the contour-residue oracle on a type/order grid
    OracleCheck(OracleCheckArgs),
    /// ODE-continued monodromy against the closed decomposition
    Monodromy(MonodromyArgs),
}

// ---------------------------------------------------------------------------
// shared flags and plumbing

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t = s.trim();
    let (re, im) = match t.split_once(',') {
        Some((a, b)) => (a.trim().parse::<f64>(), b.trim().parse::<f64>()),
        None => (t.parse::<f64>(), Ok(0.0)),
    };
    match (re, im) {
        (Ok(re), Ok(im)) if re.is_finite() && im.is_finite() => Ok(Complex64::new(re, im)),
        _ => Err(format!("expected \"re\" or \"re,im\", got \"{s}\"")),
    }
}

#[derive(Args)]
struct ParamFlags {
    /// beta1 as "re,im" (a bare real is accepted)
    #[arg(long, value_parser = parse_complex, default_value = "0", allow_hyphen_values = true)]
    beta1: Complex64,
    /// beta2 as "re,im"
    #[arg(long, value_parser = parse_complex, default_value = "1", allow_hyphen_values = true)]
    beta2: Complex64,
    /// gamma1 as "re,im"
    #[arg(long, value_parser = parse_complex, default_value = "0", allow_hyphen_values = true)]
    gamma1: Complex64,
    /// gamma2 as "re,im"
    #[arg(long, value_parser = parse_complex, default_value = "1", allow_hyphen_values = true)]
    gamma2: Complex64,
}

impl ParamFlags {
    fn params(&self) -> Result<Params, String> {
        Params::new(self.beta1, self.beta2, self.gamma1, self.gamma2).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputFlags {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp so reruns are byte-identical
    #[arg(long)]
    no_timestamp: bool,
}

/// Complex number as it appears in JSON reports.
#[derive(Serialize, Clone, Copy)]
struct Cx {
    re: f64,
    im: f64,
}

fn cx(z: Complex64) -> Cx {
    Cx { re: z.re, im: z.im }
}

fn mat(m: &Mat2) -> [[Cx; 2]; 2] {
    [[cx(m.e[0][0]), cx(m.e[0][1])], [cx(m.e[1][0]), cx(m.e[1][1])]]
}

#[derive(Serialize)]
struct ParamsView {
    beta1: Cx,
    beta2: Cx,
    gamma1: Cx,
    gamma2: Cx,
}

fn params_view(p: &Params) -> ParamsView {
    ParamsView { beta1: cx(p.beta1), beta2: cx(p.beta2), gamma1: cx(p.gamma1), gamma2: cx(p.gamma2) }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    report: &'a T,
}

/// CSV payload: one header row plus data rows, all cells preformatted.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

/// Shortest round-tripping decimal, stable across runs.
fn fnum(x: f64) -> String {
    format!("{x:?}")
}

fn push_cx(row: &mut Vec<String>, z: Complex64) {
    row.push(fnum(z.re));
    row.push(fnum(z.im));
}

fn emit<T: Serialize>(
    flags: &OutputFlags,
    command: &'static str,
    report: &T,
    table: &Table,
) -> Result<(), String> {
    let timestamp = if flags.no_timestamp {
        None
    } else {
        Some(SystemTime::now().duration_since(UNIX_EPOCH).map_err(|e| e.to_string())?.as_secs())
    };
    let bytes = match flags.format {
        Format::Json => {
            let env = Envelope { schema: 1, command, timestamp, report };
            let mut s = serde_json::to_string_pretty(&env).map_err(|e| e.to_string())?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut buf = format!("# stokes-unfold {command} schema 1\n");
            if let Some(t) = timestamp {
                buf.push_str(&format!("# timestamp {t}\n"));
            }
            let mut buf = buf.into_bytes();
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&table.header).map_err(|e| e.to_string())?;
            for row in &table.rows {
                w.write_record(row).map_err(|e| e.to_string())?;
            }
            w.flush().map_err(|e| e.to_string())?;
            drop(w);
            buf
        }
    };
    match &flags.out {
        Some(path) => std::fs::write(path, &bytes)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().write_all(&bytes).map_err(|e| e.to_string()),
    }
}

/// Real-resonant parameters of the given type and orders over the
/// baselines, so that `sqrt_eps = s` realizes the resonance exactly.
fn resonant_pair(
    kind: ResonanceKind,
    n_beta: u32,
    n_gamma: u32,
    s: f64,
    beta1: Complex64,
    gamma1: Complex64,
) -> Result<(Params, Epsilon), String> {
    let (sb, sg) = match kind {
        ResonanceKind::A1 => (1.0, -1.0),
        ResonanceKind::A2 => (1.0, 1.0),
        ResonanceKind::A3 => (-1.0, -1.0),
        ResonanceKind::A4 => (-1.0, 1.0),
    };
    let p = Params::new(
        beta1,
        beta1 + sb * 2.0 * s * f64::from(n_beta),
        gamma1,
        gamma1 + sg * 2.0 * s * f64::from(n_gamma),
    )
    .map_err(|e| e.to_string())?;
    let e = Epsilon::from_real(s).map_err(|e| e.to_string())?;
    Ok((p, e))
}

fn min_gap(e: &Epsilon, point: PointId) -> f64 {
    let pts = e.points();
    let center = pts.at(point);
    PointId::ALL
        .iter()
        .filter(|&&q| q != point)
        .map(|&q| (pts.at(q) - center).norm())
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// stokes

#[derive(Args)]
struct StokesArgs {
    #[command(flatten)]
    p: ParamFlags,
    /// Threshold below which the multipliers count as trivial
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Serialize)]
struct MatrixSide {
    /// Singular direction in radians; absent when degenerate.
    theta: Option<f64>,
    mu: Cx,
    matrix: [[Cx; 2]; 2],
}

#[derive(Serialize)]
struct StokesReport {
    params: ParamsView,
    sum_s: Cx,
    origin: MatrixSide,
    infinity: MatrixSide,
    degenerate_direction: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    trivial_stokes: bool,
    tol: f64,
}

fn cmd_stokes(args: &StokesArgs) -> Result<u8, String> {
    let p = args.p.params()?;
    let s = bessel_sum_S(&p, 1e-14).map_err(|e| e.to_string())?;
    let origin = stokes_origin(&p, 1e-14).map_err(|e| e.to_string())?;
    let degenerate = p.gamma_diff().norm() == 0.0;
    let infinity = if degenerate {
        MatrixSide { theta: None, mu: cx(Complex64::new(0.0, 0.0)), matrix: mat(&Mat2::identity()) }
    } else {
        let inf = stokes_infinity(&p, 1e-14).map_err(|e| e.to_string())?;
        MatrixSide { theta: Some(inf.theta), mu: cx(inf.mu), matrix: mat(&inf.matrix()) }
    };
    let mu_inf_norm = Complex64::new(infinity.mu.re, infinity.mu.im).norm();
    let trivial = origin.mu.norm() < args.tol && mu_inf_norm < args.tol;
    let report = StokesReport {
        params: params_view(&p),
        sum_s: cx(s),
        origin: MatrixSide {
            theta: Some(origin.theta),
            mu: cx(origin.mu),
            matrix: mat(&origin.matrix()),
        },
        infinity,
        degenerate_direction: degenerate,
        note: degenerate.then(|| {
            "gamma1 = gamma2: the direction at infinity degenerates and both Stokes matrices are the identity".to_string()
        }),
        trivial_stokes: trivial,
        tol: args.tol,
    };
    let mut rows = vec![];
    let mut scalar = |name: &str, z: Complex64| {
        let mut row = vec![name.to_string()];
        push_cx(&mut row, z);
        rows.push(row);
    };
    scalar("sum_s", s);
    scalar("theta_origin", Complex64::new(origin.theta, 0.0));
    scalar("mu_origin", origin.mu);
    if let Some(theta) = report.infinity.theta {
        scalar("theta_infinity", Complex64::new(theta, 0.0));
    }
    scalar("mu_infinity", Complex64::new(report.infinity.mu.re, report.infinity.mu.im));
    for (i, r) in report.origin.matrix.iter().enumerate() {
        for (j, z) in r.iter().enumerate() {
            scalar(&format!("m_origin_{}{}", i + 1, j + 1), Complex64::new(z.re, z.im));
        }
    }
    for (i, r) in report.infinity.matrix.iter().enumerate() {
        for (j, z) in r.iter().enumerate() {
            scalar(&format!("m_infinity_{}{}", i + 1, j + 1), Complex64::new(z.re, z.im));
        }
    }
    rows.push(vec!["trivial_stokes".into(), if trivial { "1" } else { "0" }.into(), String::new()]);
    let table = Table { header: vec!["quantity", "re", "im"], rows };
    emit(&args.out, "stokes", &report, &table)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// series

#[derive(Args)]
struct SeriesArgs {
    #[command(flatten)]
    p: ParamFlags,
    /// Highest coefficient order to emit
    #[arg(long, default_value_t = 30)]
    k_max: usize,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Serialize)]
struct SeriesRow {
    k: usize,
    b: Cx,
    c: Cx,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius_est: Option<f64>,
}

#[derive(Serialize)]
struct SeriesReport {
    params: ParamsView,
    sum_s: Cx,
    k_max: usize,
    rows: Vec<SeriesRow>,
}

fn cmd_series(args: &SeriesArgs) -> Result<u8, String> {
    if args.k_max < 2 || args.k_max > 120 {
        // k! overflows f64 near k = 170; stay well inside
        return Err("k-max must be between 2 and 120".into());
    }
    let p = args.p.params()?;
    let s = bessel_sum_S(&p, 1e-14).map_err(|e| e.to_string())?;
    let b = psi_coefficients(&p, args.k_max);
    let (_, c) = a_k_recursion(&p, args.k_max);
    let mut rows = Vec::with_capacity(args.k_max + 1);
    let mut table_rows = Vec::with_capacity(args.k_max + 1);
    for k in 0..=args.k_max {
        let est = (k + 1 <= args.k_max
            && b.values[k].norm() > 0.0
            && b.values[k + 1].norm() > 0.0)
            .then(|| b.values[k].norm() / b.values[k + 1].norm());
        rows.push(SeriesRow { k, b: cx(b.values[k]), c: cx(c.values[k]), radius_est: est });
        let mut row = vec![k.to_string()];
        push_cx(&mut row, b.values[k]);
        push_cx(&mut row, c.values[k]);
        row.push(est.map(fnum).unwrap_or_default());
        table_rows.push(row);
    }
    let report = SeriesReport { params: params_view(&p), sum_s: cx(s), k_max: args.k_max, rows };
    let table = Table {
        header: vec!["k", "re_b", "im_b", "re_c", "im_c", "radius_est"],
        rows: table_rows,
    };
    emit(&args.out, "series", &report, &table)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// borel

#[derive(Args)]
struct BorelArgs {
    #[command(flatten)]
    p: ParamFlags,
    /// Evaluation point x as "re,im", inside the summation domain
    #[arg(long, value_parser = parse_complex, default_value = "-0.05", allow_hyphen_values = true)]
    x: Complex64,
    /// Half-angle between the two rays straddling the singular direction
    #[arg(long, default_value_t = 0.4)]
    eps_angle: f64,
    /// Pass threshold on the relative error
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Serialize)]
struct BorelReport {
    params: ParamsView,
    x: Cx,
    theta: f64,
    eps_angle: f64,
    quadrature: Cx,
    closed_form: Cx,
    rel_err: f64,
    tol: f64,
    pass: bool,
}

fn cmd_borel(args: &BorelArgs) -> Result<u8, String> {
    let p = args.p.params()?;
    let jump = stokes_jump_origin(&p, args.x, args.eps_angle, 1e-9).map_err(|e| e.to_string())?;
    // a below-threshold jump on both routes counts as agreement even when
    // the relative error is meaningless (trivial Stokes data)
    let pass = jump.rel_err < args.tol
        || (jump.quadrature.norm() < args.tol && jump.closed_form.norm() < args.tol);
    let report = BorelReport {
        params: params_view(&p),
        x: cx(args.x),
        theta: jump.theta,
        eps_angle: jump.eps_angle,
        quadrature: cx(jump.quadrature),
        closed_form: cx(jump.closed_form),
        rel_err: jump.rel_err,
        tol: args.tol,
        pass,
    };
    let mut rows = vec![];
    for (name, z) in [("quadrature", jump.quadrature), ("closed_form", jump.closed_form)] {
        let mut row = vec![name.to_string()];
        push_cx(&mut row, z);
        rows.push(row);
    }
    rows.push(vec!["theta".into(), fnum(jump.theta), String::new()]);
    rows.push(vec!["rel_err".into(), fnum(jump.rel_err), String::new()]);
    rows.push(vec!["pass".into(), if pass { "1" } else { "0" }.into(), String::new()]);
    let table = Table { header: vec!["quantity", "re", "im"], rows };
    emit(&args.out, "borel", &report, &table)?;
    Ok(u8::from(!pass))
}

// ---------------------------------------------------------------------------
// unfold

#[derive(Args)]
struct UnfoldArgs {
    #[command(flatten)]
    p: ParamFlags,
    /// sqrt(eps) as "re,im"; must realize a double resonance
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    sqrt_eps: Complex64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Serialize)]
struct ResonanceView {
    kind: String,
    n_beta: u32,
    n_gamma: u32,
}

#[derive(Serialize)]
struct UnfoldPoint {
    point: String,
    rho1: Cx,
    rho2: Cx,
    d: Cx,
    two_pi_i_d: Cx,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_mu: Option<Cx>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent_part: Option<[[Cx; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unipotent: Option<[[Cx; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monodromy: Option<[[Cx; 2]; 2]>,
}

#[derive(Serialize)]
struct UnfoldReport {
    params: ParamsView,
    sqrt_eps: Cx,
    resonance: ResonanceView,
    mu_origin: Cx,
    mu_infinity: Cx,
    limit_d_origin: Cx,
    limit_d_infinity: Cx,
    points: Vec<UnfoldPoint>,
}

fn cmd_unfold(args: &UnfoldArgs) -> Result<u8, String> {
    let p = args.p.params()?;
    let e = Epsilon::new(args.sqrt_eps).map_err(|e| e.to_string())?;
    let r = classify_resonance(&p, &e, 1e-9)
        .ok_or("parameters and sqrt_eps do not realize a double resonance")?;
    let mu_origin = stokes_origin(&p, 1e-14).map_err(|e| e.to_string())?.mu;
    let mu_infinity = if p.gamma_diff().norm() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        stokes_infinity(&p, 1e-14).map_err(|e| e.to_string())?.mu
    };
    let (lim0, lim_inf) = limit_closed_form(&p).map_err(|e| e.to_string())?;
    let log_points = [r.kind.origin_log_point(), r.kind.infinity_log_point()];
    let mut points = Vec::with_capacity(4);
    let mut table_rows = Vec::with_capacity(4);
    for pt in PointId::ALL {
        let dec = monodromy_decomp(&p, &e, r, pt).map_err(|e| e.to_string())?;
        let is_log = log_points.contains(&pt);
        let target = is_log.then(|| {
            if pt.merges_into_origin() { mu_origin } else { mu_infinity }
        });
        let abs_err = target.map(|mu| (TWO_PI_I * dec.d - mu).norm());
        points.push(UnfoldPoint {
            point: pt.label().to_string(),
            rho1: cx(dec.rho.0),
            rho2: cx(dec.rho.1),
            d: cx(dec.d),
            two_pi_i_d: cx(TWO_PI_I * dec.d),
            target_mu: target.map(cx),
            abs_err,
            exponent_part: is_log.then(|| mat(&dec.exponent_part)),
            unipotent: is_log.then(|| mat(&dec.unipotent())),
            monodromy: is_log.then(|| mat(&dec.monodromy())),
        });
        let mut row = vec![pt.label().to_string()];
        push_cx(&mut row, dec.rho.0);
        push_cx(&mut row, dec.rho.1);
        push_cx(&mut row, dec.d);
        row.push(abs_err.map(fnum).unwrap_or_default());
        table_rows.push(row);
    }
    let report = UnfoldReport {
        params: params_view(&p),
        sqrt_eps: cx(e.sqrt_eps()),
        resonance: ResonanceView {
            kind: r.kind.label().to_string(),
            n_beta: r.n_beta,
            n_gamma: r.n_gamma,
        },
        mu_origin: cx(mu_origin),
        mu_infinity: cx(mu_infinity),
        limit_d_origin: cx(lim0),
        limit_d_infinity: cx(lim_inf),
        points,
    };
    let table = Table {
        header: vec!["point", "re_rho1", "im_rho1", "re_rho2", "im_rho2", "re_d", "im_d", "abs_err"],
        rows: table_rows,
    };
    emit(&args.out, "unfold", &report, &table)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// converge

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    p: ParamFlags,
    /// Resonance orders n; sqrt_eps = |beta2-beta1|/(2n) for each
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 4, 8, 16, 32, 64])]
    n_list: Vec<u32>,
    /// Pass threshold on final |2 pi i d - mu| as a fraction of |mu|
    #[arg(long, default_value_t = 5e-2)]
    tol: f64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Serialize)]
struct ConvergeRow {
    point: String,
    n: u32,
    sqrt_eps: f64,
    d: Cx,
    abs_err: f64,
}

#[derive(Serialize)]
struct ConvergeFinal {
    point: String,
    abs_err: f64,
    target_norm: f64,
    pass: bool,
}

#[derive(Serialize)]
struct ConvergeReport {
    params: ParamsView,
    case: String,
    mu_origin: Cx,
    mu_infinity: Cx,
    tol: f64,
    rows: Vec<ConvergeRow>,
    finals: Vec<ConvergeFinal>,
    pass: bool,
}

fn cmd_converge(args: &ConvergeArgs) -> Result<u8, String> {
    if args.n_list.is_empty() {
        return Err("n-list must not be empty".into());
    }
    let p = args.p.params()?;
    let (bd, gd) = (p.beta_diff(), p.gamma_diff());
    let case = match (bd.re > 0.0, gd.re > 0.0) {
        (true, true) => MainCase::One,
        (false, false) => MainCase::Two,
        (true, false) => MainCase::Three,
        (false, true) => MainCase::Four,
    };
    let t = limit_experiment(&p, case, &args.n_list).map_err(|e| e.to_string())?;
    let rows: Vec<ConvergeRow> = t
        .rows
        .iter()
        .map(|r| ConvergeRow {
            point: r.point.label().to_string(),
            n: r.n,
            sqrt_eps: r.sqrt_eps,
            d: cx(r.d),
            abs_err: r.abs_err,
        })
        .collect();
    let mut finals = Vec::with_capacity(2);
    for pt in [case.resonance_kind().origin_log_point(), case.resonance_kind().infinity_log_point()]
    {
        let last = t.rows.iter().rev().find(|r| r.point == pt).ok_or("empty experiment")?;
        let target =
            if pt.merges_into_origin() { t.mu_origin } else { t.mu_infinity }.norm();
        finals.push(ConvergeFinal {
            point: pt.label().to_string(),
            abs_err: last.abs_err,
            target_norm: target,
            pass: last.abs_err < args.tol * target,
        });
    }
    let pass = finals.iter().all(|f| f.pass);
    let table_rows = t
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.point.label().to_string(), r.n.to_string(), fnum(r.sqrt_eps)];
            push_cx(&mut row, r.d);
            row.push(fnum(r.abs_err));
            row
        })
        .collect();
    let report = ConvergeReport {
        params: params_view(&p),
        case: t.case.label().to_string(),
        mu_origin: cx(t.mu_origin),
        mu_infinity: cx(t.mu_infinity),
        tol: args.tol,
        rows,
        finals,
        pass,
    };
    let table = Table {
        header: vec!["point", "n", "sqrt_eps", "re_d", "im_d", "abs_err"],
        rows: table_rows,
    };
    emit(&args.out, "converge", &report, &table)?;
    Ok(u8::from(!pass))
}

// ---------------------------------------------------------------------------
// classify

#[derive(Args)]
struct ClassifyArgs {
    /// alpha1 as "re,im" (the confluent family pins 0)
    #[arg(long, value_parser = parse_complex, default_value = "0", allow_hyphen_values = true)]
    alpha1: Complex64,
    /// alpha2 as "re,im" (the confluent family pins -2)
    #[arg(long, value_parser = parse_complex, default_value = "-2", allow_hyphen_values = true)]
    alpha2: Complex64,
    #[command(flatten)]
    p: ParamFlags,
    /// sqrt(eps) as "re,im"
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    sqrt_eps: Complex64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Serialize)]
struct GeneralView {
    alpha1: Cx,
    alpha2: Cx,
    beta1: Cx,
    beta2: Cx,
    gamma1: Cx,
    gamma2: Cx,
}

#[derive(Serialize)]
struct CandidateRow {
    point: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    location: Option<Cx>,
    p: Cx,
    q0: Cx,
    q1: Cx,
    ordinary: bool,
}

#[derive(Serialize)]
struct ClassifyReport {
    params: GeneralView,
    sqrt_eps: Cx,
    matched_case: Option<String>,
    singular_count: usize,
    singular_points: Vec<String>,
    candidates: Vec<CandidateRow>,
}

fn cmd_classify(args: &ClassifyArgs) -> Result<u8, String> {
    let g = GeneralParams {
        alpha1: args.alpha1,
        alpha2: args.alpha2,
        beta1: args.p.beta1,
        beta2: args.p.beta2,
        gamma1: args.p.gamma1,
        gamma2: args.p.gamma2,
    };
    let e = Epsilon::new(args.sqrt_eps).map_err(|e| e.to_string())?;
    let rep = heun_case_check(&g, &e, Q41Reading::default()).map_err(|e| e.to_string())?;
    let pts = e.points();
    let location = |c: CandidatePoint| match c {
        CandidatePoint::XInf => None,
        CandidatePoint::XRR => Some(pts.x_rr),
        CandidatePoint::XLL => Some(pts.x_ll),
        CandidatePoint::XR => Some(pts.x_r),
        CandidatePoint::XL => Some(pts.x_l),
    };
    let candidates: Vec<CandidateRow> = rep
        .triples
        .iter()
        .map(|t| CandidateRow {
            point: t.point.label().to_string(),
            location: location(t.point).map(cx),
            p: cx(t.p),
            q0: cx(t.q0),
            q1: cx(t.q1),
            ordinary: t.ordinary,
        })
        .collect();
    let report = ClassifyReport {
        params: GeneralView {
            alpha1: cx(g.alpha1),
            alpha2: cx(g.alpha2),
            beta1: cx(g.beta1),
            beta2: cx(g.beta2),
            gamma1: cx(g.gamma1),
            gamma2: cx(g.gamma2),
        },
        sqrt_eps: cx(e.sqrt_eps()),
        matched_case: rep.matched_case.map(|c| c.label().to_string()),
        singular_count: rep.singular_count(),
        singular_points: rep
            .triples
            .iter()
            .filter(|t| !t.ordinary)
            .map(|t| t.point.label().to_string())
            .collect(),
        candidates,
    };
    let table_rows = rep
        .triples
        .iter()
        .map(|t| {
            let mut row = vec![t.point.label().to_string(), u8::from(t.ordinary).to_string()];
            push_cx(&mut row, t.p);
            push_cx(&mut row, t.q0);
            push_cx(&mut row, t.q1);
            row
        })
        .collect();
    let table = Table {
        header: vec!["point", "ordinary", "re_p", "im_p", "re_q0", "im_q0", "re_q1", "im_q1"],
        rows: table_rows,
    };
    emit(&args.out, "classify", &report, &table)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// oracle-check

#[derive(Args)]
struct OracleCheckArgs {
    /// Baseline beta1; beta2 is constructed from the resonance
    #[arg(long, value_parser = parse_complex, default_value = "0.17", allow_hyphen_values = true)]
    beta1: Complex64,
    /// Baseline gamma1; gamma2 is constructed from the resonance
    #[arg(long, value_parser = parse_complex, default_value = "-0.12", allow_hyphen_values = true)]
    gamma1: Complex64,
    /// sqrt(eps); rows are skipped unless it is real positive
    #[arg(long, value_parser = parse_complex, default_value = "0.3", allow_hyphen_values = true)]
    sqrt_eps: Complex64,
    /// Resonance orders swept for both n_beta and n_gamma
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3])]
    n_list: Vec<u32>,
    /// Pass threshold on the per-row error
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Serialize)]
struct OracleRow {
    kind: String,
    n_beta: u32,
    n_gamma: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    point: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed: Option<Cx>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contour: Option<Cx>,
    #[serde(skip_serializing_if = "Option::is_none")]
    err: Option<f64>,
    status: String,
}

#[derive(Serialize)]
struct OracleReport {
    sqrt_eps: Cx,
    beta1: Cx,
    gamma1: Cx,
    n_list: Vec<u32>,
    tol: f64,
    rows: Vec<OracleRow>,
    max_err: f64,
    failures: usize,
    skipped: usize,
    pass: bool,
}

fn cmd_oracle_check(args: &OracleCheckArgs) -> Result<u8, String> {
    if args.n_list.is_empty() {
        return Err("n-list must not be empty".into());
    }
    if args.n_list.contains(&0) {
        return Err("resonance orders must be >= 1".into());
    }
    let e = Epsilon::new(args.sqrt_eps).map_err(|e| e.to_string())?;
    let resonant = e.is_real_positive(1e-9);
    let mut rows = Vec::new();
    let mut max_err = 0.0f64;
    let mut failures = 0usize;
    let mut skipped = 0usize;
    for kind in ResonanceKind::ALL {
        for &nb in &args.n_list {
            for ng in std::iter::once(0).chain(args.n_list.iter().copied()) {
                if ng == 0 && matches!(kind, ResonanceKind::A2 | ResonanceKind::A4) {
                    continue; // gamma1 = gamma2 collapses these onto A1/A3
                }
                if !resonant {
                    rows.push(OracleRow {
                        kind: kind.label().to_string(),
                        n_beta: nb,
                        n_gamma: ng,
                        point: None,
                        closed: None,
                        contour: None,
                        err: None,
                        status: "skipped: sqrt_eps not real positive, no double resonance".into(),
                    });
                    skipped += 1;
                    continue;
                }
                let s = e.sqrt_eps().re;
                let (p, e2) = resonant_pair(kind, nb, ng, s, args.beta1, args.gamma1)?;
                let Some(r) = classify_resonance(&p, &e2, 1e-9) else {
                    rows.push(OracleRow {
                        kind: kind.label().to_string(),
                        n_beta: nb,
                        n_gamma: ng,
                        point: None,
                        closed: None,
                        contour: None,
                        err: None,
                        status: "skipped: constructed parameters did not classify".into(),
                    });
                    skipped += 1;
                    continue;
                };
                for point in [r.kind.origin_log_point(), r.kind.infinity_log_point()] {
                    let closed = d_coefficient(&p, &e2, r, point).map_err(|e| e.to_string())?;
                    let contour = residue_contour(&p, &e2, point, 0.45 * min_gap(&e2, point), 512)
                        .map_err(|e| e.to_string())?;
                    let diff = (closed - contour).norm();
                    let err = if closed.norm() > 1e-12 { diff / closed.norm() } else { diff };
                    let ok = err < args.tol;
                    if !ok {
                        failures += 1;
                    }
                    max_err = max_err.max(err);
                    rows.push(OracleRow {
                        kind: r.kind.label().to_string(),
                        n_beta: r.n_beta,
                        n_gamma: r.n_gamma,
                        point: Some(point.label().to_string()),
                        closed: Some(cx(closed)),
                        contour: Some(cx(contour)),
                        err: Some(err),
                        status: if ok { "ok".into() } else { "fail".into() },
                    });
                }
            }
        }
    }
    let pass = failures == 0;
    let table_rows = rows
        .iter()
        .map(|r| {
            let opt_cx = |z: Option<Cx>| match z {
                Some(z) => (fnum(z.re), fnum(z.im)),
                None => (String::new(), String::new()),
            };
            let (cre, cim) = opt_cx(r.closed);
            let (ore, oim) = opt_cx(r.contour);
            vec![
                r.kind.clone(),
                r.n_beta.to_string(),
                r.n_gamma.to_string(),
                r.point.clone().unwrap_or_default(),
                cre,
                cim,
                ore,
                oim,
                r.err.map(fnum).unwrap_or_default(),
                r.status.clone(),
            ]
        })
        .collect();
    let report = OracleReport {
        sqrt_eps: cx(e.sqrt_eps()),
        beta1: cx(args.beta1),
        gamma1: cx(args.gamma1),
        n_list: args.n_list.clone(),
        tol: args.tol,
        rows,
        max_err,
        failures,
        skipped,
        pass,
    };
    let table = Table {
        header: vec![
            "kind", "n_beta", "n_gamma", "point", "re_closed", "im_closed", "re_contour",
            "im_contour", "err", "status",
        ],
        rows: table_rows,
    };
    emit(&args.out, "oracle-check", &report, &table)?;
    Ok(u8::from(!pass))
}

// ---------------------------------------------------------------------------
// monodromy

#[derive(Args)]
struct MonodromyArgs {
    #[command(flatten)]
    p: ParamFlags,
    /// sqrt(eps) as "re,im"; must realize a double resonance
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    sqrt_eps: Complex64,
    /// Pass threshold on entrywise matrix differences
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Serialize)]
struct MonodromyRow {
    point: String,
    ode: [[Cx; 2]; 2],
    closed: [[Cx; 2]; 2],
    max_abs_diff: f64,
    pass: bool,
}

#[derive(Serialize)]
struct MonodromyReport {
    params: ParamsView,
    sqrt_eps: Cx,
    resonance: ResonanceView,
    tol: f64,
    points: Vec<MonodromyRow>,
    empty_loop_err: f64,
    product_law_err: f64,
    pass: bool,
}

fn cmd_monodromy(args: &MonodromyArgs) -> Result<u8, String> {
    let p = args.p.params()?;
    let e = Epsilon::new(args.sqrt_eps).map_err(|e| e.to_string())?;
    let r = classify_resonance(&p, &e, 1e-9)
        .ok_or("parameters and sqrt_eps do not realize a double resonance")?;
    let pts = e.points();
    let oe = |e: stokes_unfold::oracle::OracleError| e.to_string();
    let mut points = Vec::with_capacity(4);
    let mut table_rows = Vec::with_capacity(6);
    for pt in PointId::ALL {
        let which = if pt.merges_into_origin() { FrameKind::Origin } else { FrameKind::Infinity };
        let lp = Loop::square_around(&pts, pt);
        let frame = fundamental_frame(&p, &e, lp.base(), which, 1e-12).map_err(oe)?;
        let ode = monodromy_ode(&p, &e, &lp, &frame, 1e-10).map_err(oe)?;
        let closed = monodromy_decomp(&p, &e, r, pt).map_err(|e| e.to_string())?.monodromy();
        let diff = ode.max_abs_diff(&closed);
        let pass = diff < args.tol;
        points.push(MonodromyRow {
            point: pt.label().to_string(),
            ode: mat(&ode),
            closed: mat(&closed),
            max_abs_diff: diff,
            pass,
        });
        table_rows.push(vec![
            pt.label().to_string(),
            fnum(diff),
            u8::from(pass).to_string(),
        ]);
    }
    // a loop around no singular point must continue to the identity
    let delta = pts.x_r - pts.x_l;
    let base = (pts.x_l + pts.x_r) / 2.0 + Complex64::new(0.0, 0.75) * delta;
    let h = 0.1 * delta.norm();
    let empty = Loop {
        vertices: vec![
            base,
            base + h,
            base + Complex64::new(h, h),
            base + Complex64::new(0.0, h),
            base,
        ],
        enclosed: vec![],
    };
    let frame0 = fundamental_frame(&p, &e, base, FrameKind::Origin, 1e-12).map_err(oe)?;
    let empty_err = monodromy_ode(&p, &e, &empty, &frame0, 1e-10)
        .map_err(oe)?
        .max_abs_diff(&Mat2::identity());
    // composing the two origin-side loops must multiply their monodromies
    let gl = Loop::square_around_from(&pts, PointId::L, base);
    let gr = Loop::square_around_from(&pts, PointId::R, base);
    let ml = monodromy_ode(&p, &e, &gl, &frame0, 1e-10).map_err(oe)?;
    let mr = monodromy_ode(&p, &e, &gr, &frame0, 1e-10).map_err(oe)?;
    let both = gl.compose(&gr).map_err(oe)?;
    let law_err =
        monodromy_ode(&p, &e, &both, &frame0, 1e-10).map_err(oe)?.max_abs_diff(&(mr * ml));
    table_rows.push(vec![
        "empty_loop".into(),
        fnum(empty_err),
        u8::from(empty_err < args.tol).to_string(),
    ]);
    table_rows.push(vec![
        "product_law".into(),
        fnum(law_err),
        u8::from(law_err < args.tol).to_string(),
    ]);
    let pass = points.iter().all(|row| row.pass) && empty_err < args.tol && law_err < args.tol;
    let report = MonodromyReport {
        params: params_view(&p),
        sqrt_eps: cx(e.sqrt_eps()),
        resonance: ResonanceView {
            kind: r.kind.label().to_string(),
            n_beta: r.n_beta,
            n_gamma: r.n_gamma,
        },
        tol: args.tol,
        points,
        empty_loop_err: empty_err,
        product_law_err: law_err,
        pass,
    };
    let table = Table { header: vec!["check", "max_abs_diff", "pass"], rows: table_rows };
    emit(&args.out, "monodromy", &report, &table)?;
    Ok(u8::from(!pass))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Stokes(a) => cmd_stokes(a),
        Cmd::Series(a) => cmd_series(a),
        Cmd::Borel(a) => cmd_borel(a),
        Cmd::Unfold(a) => cmd_unfold(a),
        Cmd::Converge(a) => cmd_converge(a),
        Cmd::Classify(a) => cmd_classify(a),
        Cmd::OracleCheck(a) => cmd_oracle_check(a),
        Cmd::Monodromy(a) => cmd_monodromy(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
