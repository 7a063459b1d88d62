use serde_json::{json, Value};

use polycor::estimate::{fit_twostep, pearson_sample_correlation};
use polycor::matrix::{fit_matrix_with, CorrelationMatrixResult, OrdinalDataset};
use polycor::simulation::{run_study, StudyOptions};
use polycor::{
    cell_probs, confidence_interval, empirical_frequencies, fit, flag_misfit_cells, pearson_residuals, CellGrid,
    ContingencyTable, DiscrepancyConfig, EstimateResult, FitOptions, MlCovariance,
};

use crate::error::CliError;
use crate::input::{self, Input, RawData};
use crate::report::{header, one_based, Numbers, Sink};
use crate::study::{self, StudyConfig};
use crate::{EstimateArgs, FitArgs, InputArgs, MatrixArgs, MethodArg, MlSe, OutputArgs, ResidualsArgs, SimulateArgs, TabulateArgs};

fn verbose() -> bool {
    std::env::var_os("POLYCOR_VERBOSE").is_some_and(|v| v != "0" && !v.is_empty())
}

fn note(message: &str) {
    if verbose() {
        eprintln!("{message}");
    }
}

fn numbers(o: &OutputArgs) -> Numbers {
    Numbers { full: o.full_precision }
}

fn sink(o: &OutputArgs) -> Sink {
    Sink { path: o.out.clone() }
}

fn fit_options(f: &FitArgs) -> FitOptions {
    FitOptions {
        max_iterations: f.max_iterations.max(1),
        ml_covariance: match f.ml_se {
            MlSe::Fisher => MlCovariance::Fisher,
            MlSe::Sandwich => MlCovariance::Sandwich,
        },
        ..Default::default()
    }
}

fn robust_config(c: f64) -> Result<DiscrepancyConfig, CliError> {
    DiscrepancyConfig::new(c).map_err(CliError::from)
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("--alpha {alpha} outside (0, 1)")))
    }
}

/// The contingency table named by the input flags.
fn load_table(args: &InputArgs) -> Result<ContingencyTable, CliError> {
    let table = match input::read(&args.input, args.format)? {
        Input::Table(t) => {
            if args.pair.is_some() {
                return Err(CliError::Input("--pair applies to raw data only".into()));
            }
            t
        }
        Input::Raw(raw) => pair_table(&raw, args.pair)?,
    };
    for line in input::describe_table(&table) {
        if line.starts_with("warning") {
            eprintln!("{line}");
        } else {
            note(&line);
        }
    }
    Ok(table)
}

fn pair_table(raw: &RawData, pair: Option<(usize, usize)>) -> Result<ContingencyTable, CliError> {
    let q = raw.dataset.q();
    let (i, j) = match pair {
        Some((i, j)) if i <= q && j <= q => (i - 1, j - 1),
        Some((i, j)) => return Err(CliError::Input(format!("--pair {i},{j}: data has {q} items"))),
        None if q == 2 => (0, 1),
        None => return Err(CliError::Input(format!("data has {q} items; choose two with --pair"))),
    };
    raw.dataset.pair_table(i, j).map_err(CliError::from)
}

fn load_raw(args: &InputArgs) -> Result<RawData, CliError> {
    match input::read(&args.input, args.format)? {
        Input::Raw(raw) => Ok(raw),
        Input::Table(_) => Err(CliError::Input("this command needs raw respondent-by-item data".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Which {
    Robust,
    Ml,
    TwoStep,
    SampleCorrelation,
}

impl Which {
    fn label(self) -> &'static str {
        match self {
            Which::Robust => "robust",
            Which::Ml => "ml",
            Which::TwoStep => "two-step",
            Which::SampleCorrelation => "sample-correlation",
        }
    }
}

fn fit_one(which: Which, table: &ContingencyTable, fa: &FitArgs) -> polycor::Result<EstimateResult> {
    let opts = fit_options(fa);
    match which {
        Which::Robust => fit(table, DiscrepancyConfig::new(fa.c)?, &opts),
        Which::Ml => fit(table, DiscrepancyConfig::ml(), &opts),
        Which::TwoStep => fit_twostep(table),
        Which::SampleCorrelation => unreachable!("not a model fit"),
    }
}

struct Param {
    name: String,
    estimate: f64,
    se: Option<f64>,
}

fn params(r: &EstimateResult) -> Vec<Param> {
    let t = &r.theta;
    let mut out = vec![Param { name: "rho".into(), estimate: t.rho(), se: r.std_errors[0] }];
    for (k, &a) in t.a().iter().enumerate() {
        out.push(Param { name: format!("a{}", k + 1), estimate: a, se: r.std_errors[1 + k] });
    }
    let ka = t.a().len();
    for (k, &b) in t.b().iter().enumerate() {
        out.push(Param { name: format!("b{}", k + 1), estimate: b, se: r.std_errors[1 + ka + k] });
    }
    out
}

/// Wald interval; the correlation's interval is clipped to [-1, 1].
fn interval(p: &Param, level: f64) -> Option<(f64, f64, bool)> {
    let ci = confidence_interval(p.estimate, p.se?, level).ok()?;
    if p.name == "rho" {
        let (c, clipped) = ci.clipped_to_correlation();
        Some((c.lower, c.upper, clipped))
    } else {
        Some((ci.lower, ci.upper, false))
    }
}

fn ci_json(p: &Param, level: f64, n: Numbers) -> Value {
    interval(p, level).map_or(Value::Null, |(lo, hi, clipped)| {
        json!({"level": n.json(level), "lower": n.json(lo), "upper": n.json(hi), "clipped": clipped})
    })
}

fn fit_entry(label: &str, r: &EstimateResult, level: f64, n: Numbers) -> Value {
    let ps = params(r);
    let ka = r.theta.a().len();
    let se = |range: std::ops::Range<usize>| Value::Array(ps[range].iter().map(|p| n.json_opt(p.se)).collect());
    json!({
        "method": label,
        "c": n.json(r.c),
        "rho": n.json(r.theta.rho()),
        "a": n.json_vec(r.theta.a()),
        "b": n.json_vec(r.theta.b()),
        "std_errors": {"rho": n.json_opt(ps[0].se), "a": se(1..1 + ka), "b": se(1 + ka..ps.len())},
        "ci": ci_json(&ps[0], level, n),
        "loss": n.json(r.loss),
        "converged": r.converged,
        "iterations": r.iterations,
        "n": r.n,
        "warnings": r.warnings.iter().map(|w| one_based(w, n)).collect::<Vec<_>>(),
    })
}

fn fit_rows(label: &str, r: &EstimateResult, level: f64, n: Numbers) -> Vec<Vec<String>> {
    params(r)
        .iter()
        .map(|p| {
            let ci = interval(p, level);
            vec![
                label.to_string(),
                p.name.clone(),
                n.text(p.estimate),
                n.text_opt(p.se),
                n.text_opt(ci.map(|c| c.0)),
                n.text_opt(ci.map(|c| c.1)),
            ]
        })
        .collect()
}

pub fn estimate(a: EstimateArgs) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    robust_config(a.fit.c)?;
    let table = load_table(&a.input)?;
    let level = 1.0 - a.alpha;
    let n = numbers(&a.output);
    let methods = match a.method {
        MethodArg::Robust => vec![Which::Robust],
        MethodArg::Ml => vec![Which::Ml],
        MethodArg::Twostep => vec![Which::TwoStep],
        MethodArg::All => vec![Which::Robust, Which::Ml, Which::TwoStep, Which::SampleCorrelation],
    };

    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut failure: Option<CliError> = None;
    for which in methods {
        let label = which.label();
        if which == Which::SampleCorrelation {
            match pearson_sample_correlation(&table) {
                Ok((r, se)) => {
                    let p = Param { name: "rho".into(), estimate: r, se: Some(se) };
                    entries.push(json!({
                        "method": label,
                        "rho": n.json(r),
                        "std_errors": {"rho": n.json(se)},
                        "ci": ci_json(&p, level, n),
                    }));
                    let ci = interval(&p, level);
                    rows.push(vec![
                        label.into(),
                        "rho".into(),
                        n.text(r),
                        n.text(se),
                        n.text_opt(ci.map(|c| c.0)),
                        n.text_opt(ci.map(|c| c.1)),
                    ]);
                }
                Err(e) => {
                    entries.push(json!({"method": label, "error": e.to_string()}));
                    failure.get_or_insert(CliError::from(e));
                }
            }
            continue;
        }
        match fit_one(which, &table, &a.fit) {
            Ok(r) => {
                entries.push(fit_entry(label, &r, level, n));
                rows.extend(fit_rows(label, &r, level, n));
                report_warnings(label, &r, a.output.csv);
            }
            Err(polycor::Error::NoConvergence(r)) => {
                entries.push(fit_entry(label, &r, level, n));
                rows.extend(fit_rows(label, &r, level, n));
                failure.get_or_insert(CliError::Numerical(format!("{label}: optimizer hit the iteration limit")));
            }
            Err(e) => {
                entries.push(json!({"method": label, "error": e.to_string()}));
                failure.get_or_insert(CliError::from(e));
            }
        }
    }

    let out = sink(&a.output);
    if a.output.csv {
        out.write_csv(&["method", "parameter", "estimate", "std_error", "ci_lower", "ci_upper"], &rows)?;
    } else {
        let mut report = header("estimate");
        report.insert("input".into(), json!({"n": table.total(), "rows": table.kx(), "cols": table.ky()}));
        report.insert("alpha".into(), n.json(a.alpha));
        report.insert("results".into(), Value::Array(entries));
        out.write_json(&Value::Object(report))?;
    }
    failure.map_or(Ok(()), Err)
}

fn report_warnings(label: &str, r: &EstimateResult, to_stderr: bool) {
    if to_stderr {
        for w in &r.warnings {
            eprintln!("warning: {label}: {}", one_based(w, Numbers { full: false }));
        }
    }
}

fn grid_rows(g: &CellGrid) -> impl Iterator<Item = Vec<f64>> + '_ {
    g.rows().map(|r| r.to_vec())
}

pub fn residuals(a: ResidualsArgs) -> Result<(), CliError> {
    robust_config(a.fit.c)?;
    let which = match a.method {
        MethodArg::Robust => Which::Robust,
        MethodArg::Ml => Which::Ml,
        MethodArg::Twostep => Which::TwoStep,
        MethodArg::All => return Err(CliError::Input("residuals needs a single --method".into())),
    };
    let table = load_table(&a.input)?;
    let n = numbers(&a.output);
    let r = match fit_one(which, &table, &a.fit) {
        Ok(r) => r,
        Err(polycor::Error::NoConvergence(_)) => {
            return Err(CliError::Numerical(format!("{}: optimizer hit the iteration limit", which.label())))
        }
        Err(e) => return Err(e.into()),
    };
    let f = empirical_frequencies(&table)?;
    let p = cell_probs(&r.theta);
    let pr = pearson_residuals(&table, &r.theta)?;
    let flagged = flag_misfit_cells(&pr.grid, a.flag_threshold);

    let out = sink(&a.output);
    if a.output.csv {
        let mut rows = Vec::new();
        for x in 0..table.kx() {
            for y in 0..table.ky() {
                let flag = flagged.iter().any(|c| c.row == x && c.col == y);
                rows.push(vec![
                    (x + 1).to_string(),
                    (y + 1).to_string(),
                    n.text(f.get(x, y)),
                    n.text(p.get(x, y)),
                    n.text(pr.grid.get(x, y)),
                    flag.to_string(),
                ]);
            }
        }
        report_warnings(which.label(), &r, true);
        return out.write_csv(&["row", "col", "frequency", "probability", "residual", "flagged"], &rows);
    }
    let mut report = header("residuals");
    report.insert("method".into(), json!(which.label()));
    report.insert("c".into(), n.json(r.c));
    report.insert("n".into(), json!(table.total()));
    report.insert("theta".into(), json!({"rho": n.json(r.theta.rho()), "a": n.json_vec(r.theta.a()), "b": n.json_vec(r.theta.b())}));
    report.insert("frequencies".into(), n.json_grid(grid_rows(&f)));
    report.insert("probabilities".into(), n.json_grid(grid_rows(&p)));
    report.insert("residuals".into(), n.json_grid(grid_rows(&pr.grid)));
    report.insert("flag_threshold".into(), n.json(a.flag_threshold));
    report.insert("flagged".into(), Value::Array(flagged.iter().map(|c| one_based(c, n)).collect()));
    report.insert("floored".into(), Value::Array(pr.floored.iter().map(|c| one_based(c, n)).collect()));
    report.insert("warnings".into(), Value::Array(r.warnings.iter().map(|w| one_based(w, n)).collect()));
    out.write_json(&Value::Object(report))
}

fn matrix_fit(data: &OrdinalDataset, which: Which, fa: &FitArgs) -> CorrelationMatrixResult {
    fit_matrix_with(data, |t| fit_one(which, t, fa))
}

fn matrix_json(label: &str, c: f64, m: &CorrelationMatrixResult, n: Numbers) -> Value {
    let q = m.estimates.nrows();
    let grid = |get: &dyn Fn(usize, usize) -> f64| n.json_grid((0..q).map(|i| (0..q).map(|j| get(i, j)).collect()));
    json!({
        "method": label,
        "c": n.json(c),
        "estimates": grid(&|i, j| m.estimates[(i, j)]),
        "std_errors": grid(&|i, j| m.std_errors[(i, j)]),
        "min_eigenvalue": n.json_opt(m.min_eigenvalue),
        "pairs": m.pairs.iter().map(|p| one_based(&json!({"i": p.i, "j": p.j, "n": p.n, "error": p.result.as_ref().err()}), n)).collect::<Vec<_>>(),
        "warnings": m.warnings.iter().map(|w| one_based(w, n)).collect::<Vec<_>>(),
    })
}

pub fn matrix(a: MatrixArgs) -> Result<(), CliError> {
    robust_config(a.fit.c)?;
    if a.input.pair.is_some() {
        return Err(CliError::Input("--pair does not apply to matrix".into()));
    }
    let raw = load_raw(&a.input)?;
    let data = &raw.dataset;
    let n = numbers(&a.output);
    let methods: Vec<(Which, f64)> = match a.method {
        MethodArg::Robust => vec![(Which::Robust, a.fit.c)],
        MethodArg::Ml => vec![(Which::Ml, f64::INFINITY)],
        MethodArg::Twostep => vec![(Which::TwoStep, f64::INFINITY)],
        MethodArg::All => vec![(Which::Robust, a.fit.c), (Which::Ml, f64::INFINITY)],
    };
    let fits: Vec<(Which, f64, CorrelationMatrixResult)> =
        methods.into_iter().map(|(w, c)| (w, c, matrix_fit(data, w, &a.fit))).collect();
    let q = data.q();
    let difference = (a.method == MethodArg::All).then(|| {
        let (rob, ml) = (&fits[0].2.estimates, &fits[1].2.estimates);
        (0..q).map(|i| (0..q).map(|j| if i == j { 0.0 } else { rob[(i, j)].abs() - ml[(i, j)].abs() }).collect::<Vec<f64>>()).collect::<Vec<_>>()
    });
    let names = data.names();

    let out = sink(&a.output);
    if a.output.csv {
        let mut rows = Vec::new();
        for (which, _, m) in &fits {
            for p in &m.pairs {
                let (i, j) = (p.i, p.j);
                rows.push(vec![
                    which.label().to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    names[i].clone(),
                    names[j].clone(),
                    p.n.to_string(),
                    n.text(m.estimates[(i, j)]),
                    n.text(m.std_errors[(i, j)]),
                ]);
            }
        }
        if let Some(d) = &difference {
            for i in 0..q {
                for j in i + 1..q {
                    let row = vec!["difference".into(), (i + 1).to_string(), (j + 1).to_string(), names[i].clone(), names[j].clone(), String::new(), n.text(d[i][j]), "NA".into()];
                    rows.push(row);
                }
            }
        }
        for (which, _, m) in &fits {
            for w in &m.warnings {
                eprintln!("warning: {}: {}", which.label(), one_based(w, n));
            }
        }
        return out.write_csv(&["method", "i", "j", "item_i", "item_j", "n", "estimate", "std_error"], &rows);
    }
    let mut report = header("matrix");
    report.insert("items".into(), json!(names));
    report.insert("categories".into(), json!(data.categories()));
    report.insert("labels".into(), json!(raw.labels));
    report.insert("n_obs".into(), json!(data.n_obs()));
    report.insert(
        "results".into(),
        Value::Array(fits.iter().map(|(w, c, m)| matrix_json(w.label(), *c, m, n)).collect()),
    );
    if let Some(d) = difference {
        report.insert("difference".into(), n.json_grid(d.into_iter()));
    }
    out.write_json(&Value::Object(report))
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let text = match study::bundled(&a.config) {
        Some(t) => t.to_string(),
        None => std::fs::read_to_string(&a.config).map_err(|e| CliError::Input(format!("{}: {e}", a.config)))?,
    };
    let mut cfg = StudyConfig::parse(&text)?;
    if let Some(r) = a.reps {
        cfg.replications = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(al) = a.alpha {
        cfg.alpha = al;
    }
    cfg.validate()?;
    let n = numbers(&a.output);
    let estimators = cfg.estimators()?;
    let opts = StudyOptions { alpha: cfg.alpha, seed: cfg.seed, fit: FitOptions::default() };

    let mut reports = Vec::new();
    for &eps in &cfg.epsilons {
        note(&format!("epsilon {eps}: {} replications", cfg.replications));
        let spec = cfg.spec(eps)?;
        reports.push(run_study(&spec, cfg.n, cfg.replications, &estimators, &opts)?);
    }

    let out = sink(&a.output);
    if a.output.csv {
        let rows: Vec<Vec<String>> = reports
            .iter()
            .flat_map(|rep| {
                rep.rows.iter().map(move |r| {
                    vec![
                        n.text(rep.epsilon),
                        r.estimator.label(),
                        n.text(r.mean_estimate),
                        n.text(r.mean_bias),
                        if r.sd_undefined { "NA".into() } else { n.text(r.std_dev) },
                        n.text(r.coverage),
                        n.text(r.mean_ci_length),
                        r.successes.to_string(),
                        r.failures.to_string(),
                    ]
                })
            })
            .collect();
        let head = ["epsilon", "estimator", "mean_estimate", "mean_bias", "std_dev", "coverage", "mean_ci_length", "successes", "failures"];
        return out.write_csv(&head, &rows);
    }
    let mut report = header("simulate");
    report.insert("config".into(), one_based(&cfg, n));
    let reps: Vec<Value> = reports
        .iter()
        .map(|rep| {
            json!({
                "epsilon": n.json(rep.epsilon),
                "n": rep.n,
                "replications": rep.replications,
                "seed": rep.seed,
                "alpha": n.json(rep.alpha),
                "truth": n.json(rep.truth),
                "rows": rep.rows.iter().map(|r| json!({
                    "estimator": r.estimator.label(),
                    "mean_estimate": n.json(r.mean_estimate),
                    "mean_bias": n.json(r.mean_bias),
                    "std_dev": if r.sd_undefined { Value::Null } else { n.json(r.std_dev) },
                    "coverage": n.json(r.coverage),
                    "mean_ci_length": n.json(r.mean_ci_length),
                    "successes": r.successes,
                    "failures": r.failures,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    report.insert("reports".into(), Value::Array(reps));
    out.write_json(&Value::Object(report))
}

/// Counts as a headerless CSV grid, which reads back as the same table.
pub fn tabulate(a: TabulateArgs) -> Result<(), CliError> {
    let table = load_table(&a.input)?;
    let out = sink(&a.output);
    if a.output.json {
        let mut report = header("tabulate");
        report.insert("counts".into(), json!(table.rows().map(|r| r.to_vec()).collect::<Vec<_>>()));
        return out.write_json(&Value::Object(report));
    }
    let text: String = table
        .rows()
        .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    out.write(&text)
}
