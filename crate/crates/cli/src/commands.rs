use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use robustprice::experiments::{
    gradient_sign_value, gradient_value_study, meta_dynamic_pricing, rate_sweep, sample_demand_models,
    second_price_candidates, second_price_row, ternary_search, DemandKind, DemandModel, GradientSign,
    StoppingCriterion, TernaryBudget, TernaryExplorer,
};
use robustprice::{
    build_grid, build_lp, lower_envelope, maximin_lower_bound, worst_case_ratio, Ambiguity, Bounds, DistributionClass,
    InformationSet, PricingError, PricingMechanism,
};
use serde::Serialize;
use serde_json::json;

use crate::args::{FirstPoint, ModelArgs, Study, StudyArgs};
use crate::output::{fmt_num, fmt_opt, output_dir, Manifest, StudyWriter};
use crate::CliError;

pub fn load_dataset(path: &Path) -> Result<InformationSet, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_mechanism(path: &Path) -> Result<PricingMechanism, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "feasible"
    } else {
        "infeasible"
    }
}

/// Feasibility under both classes, plus the Γ⁻¹ slopes when regular.
pub fn cmd_validate(dataset: &Path, mut out: impl Write) -> Result<(), CliError> {
    let info = load_dataset(dataset)?;
    let general = info.is_feasible(DistributionClass::General);
    let regular = info.is_feasible(DistributionClass::Regular);
    let report = format!("general: {}; regular: {}", verdict(general), verdict(regular));
    writeln!(out, "{report}").map_err(|e| CliError::io(dataset, e))?;
    if regular {
        let slopes: Vec<String> = info.gamma_slopes().iter().map(|&s| fmt_num(s)).collect();
        writeln!(out, "slopes: {}", slopes.join(", ")).map_err(|e| CliError::io(dataset, e))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct MaximinReport {
    pub class: DistributionClass,
    #[serde(rename = "M")]
    pub m: usize,
    pub lambda_star: f64,
    pub upper_bound: f64,
    pub grid_points: usize,
    pub lp_rows: usize,
    pub mechanism: PricingMechanism,
}

pub fn cmd_maximin(dataset: &Path, model: ModelArgs) -> Result<MaximinReport, CliError> {
    let info = load_dataset(dataset)?;
    Ambiguity::new(info.clone(), model.class)?;
    let bound = maximin_lower_bound(&info, model.class, model.m)?;
    Ok(MaximinReport {
        class: model.class,
        m: model.m,
        lambda_star: bound.lambda_star,
        upper_bound: bound.upper_bound,
        grid_points: bound.grid_points,
        lp_rows: bound.lp_rows,
        mechanism: bound.mechanism,
    })
}

/// Writes the maximin report to `out` (or stdout) and optionally the LP text.
pub fn run_maximin(dataset: &Path, model: ModelArgs, out: Option<&Path>, lp_dump: bool) -> Result<(), CliError> {
    let report = cmd_maximin(dataset, model)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e))?,
        None => print!("{text}"),
    }
    if lp_dump {
        let path = match out {
            Some(p) => p.with_extension("lp.txt"),
            None => output_dir(None).join("maximin.lp.txt"),
        };
        let info = load_dataset(dataset)?;
        let grid = build_grid(&info, model.class, model.m)?;
        let lp = build_lp(&info, model.class, &grid)?;
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        lp.write_text(std::io::BufWriter::new(file)).map_err(|e| CliError::io(&path, e))?;
        log::info!("linear program written to {}", path.display());
    }
    Ok(())
}

pub fn cmd_evaluate(dataset: &Path, mechanism: &Path, model: ModelArgs) -> Result<serde_json::Value, CliError> {
    let info = load_dataset(dataset)?;
    let mech = load_mechanism(mechanism)?;
    mech.check_bounds(&info.bounds())?;
    Ambiguity::new(info.clone(), model.class)?;
    let grid = build_grid(&info, model.class, model.m)?;
    let response = worst_case_ratio(&mech, &info, model.class, &grid)?;
    Ok(json!({
        "class": model.class,
        "M": model.m,
        "worst_case_ratio": response.value,
        "r_star": response.r_star,
    }))
}

fn bounds_of(common: &StudyArgs) -> Result<Bounds, CliError> {
    Ok(Bounds::new(common.bounds.0, common.bounds.1)?)
}

pub fn cmd_study(study: &Study) -> Result<PathBuf, CliError> {
    match study {
        Study::Gradient { common, first, eps, points } => gradient(common, first, *eps, *points),
        Study::GradientSign { common, first } => gradient_sign(common, first),
        Study::SecondPrice { common, first, p2_count, q2_count } => second_price(common, first, *p2_count, *q2_count),
        Study::Ternary { common, instances, eps, budget } => ternary(common, *instances, *eps, *budget),
    }
}

fn open_writer(common: &StudyArgs, manifest: Manifest) -> Result<(StudyWriter, PathBuf), CliError> {
    let dir = output_dir(common.out.as_deref());
    let csv = dir.join(format!("{}.csv", manifest.study));
    Ok((StudyWriter::open(&dir, manifest)?, csv))
}

fn gradient(common: &StudyArgs, first: &FirstPoint, eps: f64, points: usize) -> Result<PathBuf, CliError> {
    let bounds = bounds_of(common)?;
    let p_eps = (1.0 + eps) * first.p1;
    let mut cells = Vec::new();
    for &q1 in &first.q1 {
        let info = InformationSet::new(bounds, [(first.p1, q1)])?;
        let amb = Ambiguity::new(info.clone(), common.class)?;
        let lo = lower_envelope(&info, common.class)?.left_limit(p_eps);
        let hi = amb.upper_left_limit(p_eps);
        cells.extend(rate_sweep(lo, hi, points, DistributionClass::General).into_iter().rev().map(|q| (q1, q)));
    }
    let config = json!({ "common": common, "first": first, "eps": eps, "points": points });
    let columns = ["q1", "p1", "p_eps", "q_eps", "g_eps", "lambda_star"];
    let (mut w, path) = open_writer(common, Manifest::new("gradient", config, &columns, cells.len()))?;
    w.run(&cells, |&(q1, q_eps)| {
        let row = gradient_value_study(first.p1, q1, eps, &[q_eps], common.class, bounds, common.m)?[0];
        Ok(vec![
            fmt_num(q1),
            fmt_num(first.p1),
            fmt_num(p_eps),
            fmt_num(row.q_eps),
            fmt_num(row.g_eps),
            fmt_opt(row.lambda_star),
        ])
    })?;
    Ok(path)
}

fn gradient_sign(common: &StudyArgs, first: &FirstPoint) -> Result<PathBuf, CliError> {
    let bounds = bounds_of(common)?;
    let signs = [None, Some(GradientSign::Negative), Some(GradientSign::Positive)];
    let cells: Vec<(f64, Option<GradientSign>)> =
        first.q1.iter().flat_map(|&q1| signs.iter().map(move |&s| (q1, s))).collect();
    let config = json!({ "common": common, "first": first });
    let columns = ["q1", "p1", "sign", "lambda_star"];
    let (mut w, path) = open_writer(common, Manifest::new("gradient-sign", config, &columns, cells.len()))?;
    w.run(&cells, |&(q1, sign)| {
        let value = match sign {
            None => {
                let info = InformationSet::new(bounds, [(first.p1, q1)])?;
                Some(maximin_lower_bound(&info, common.class, common.m)?.lambda_star)
            }
            Some(s) => match gradient_sign_value(first.p1, q1, s, common.class, bounds, common.m) {
                Ok(v) => Some(v),
                // the sign contradicts the observation
                Err(PricingError::EmptyOptimalSet) => None,
                Err(e) => return Err(e),
            },
        };
        let label = match sign {
            None => "none",
            Some(GradientSign::Negative) => "negative",
            Some(GradientSign::Positive) => "positive",
        };
        Ok(vec![fmt_num(q1), fmt_num(first.p1), label.to_string(), fmt_opt(value)])
    })?;
    Ok(path)
}

fn second_price(common: &StudyArgs, first: &FirstPoint, p2_count: usize, q2_count: usize) -> Result<PathBuf, CliError> {
    let bounds = bounds_of(common)?;
    let candidates = second_price_candidates(&bounds, first.p1, p2_count);
    if candidates.is_empty() {
        return Err(CliError::Input("no candidate second price".into()));
    }
    let cells: Vec<(f64, f64)> = first.q1.iter().flat_map(|&q1| candidates.iter().map(move |&p2| (q1, p2))).collect();
    let config = json!({ "common": common, "first": first, "p2_count": p2_count, "q2_count": q2_count });
    let columns = ["q1", "p1", "p2", "q2_lo", "q2_hi", "worst_q2", "baseline_lambda", "min_lambda"];
    let (mut w, path) = open_writer(common, Manifest::new("second-price", config, &columns, cells.len()))?;
    w.run(&cells, |&(q1, p2)| {
        let info = InformationSet::new(bounds, [(first.p1, q1)])?;
        let baseline = maximin_lower_bound(&info, common.class, common.m)?.lambda_star;
        let row = second_price_row(&info, common.class, p2, q2_count, common.m)?;
        let min_lambda = row.min_lambda.is_finite().then_some(row.min_lambda);
        Ok(vec![
            fmt_num(q1),
            fmt_num(first.p1),
            fmt_num(p2),
            fmt_num(row.q2_lo),
            fmt_num(row.q2_hi),
            fmt_opt(min_lambda.map(|_| row.worst_q2)),
            fmt_num(baseline),
            fmt_opt(min_lambda),
        ])
    })?;
    Ok(path)
}

#[derive(Debug, Clone, Copy)]
enum Procedure {
    Ternary,
    Stopping(StoppingCriterion),
}

impl Procedure {
    fn name(&self) -> &'static str {
        match self {
            Procedure::Ternary => "ternary",
            Procedure::Stopping(c) => c.name(),
        }
    }
}

fn ternary(common: &StudyArgs, instances: usize, eps: f64, budget: Option<usize>) -> Result<PathBuf, CliError> {
    let bounds = bounds_of(common)?;
    let budget = budget.map_or(TernaryBudget::Standard, TernaryBudget::Queries);
    let rounds = budget.rounds(&bounds, eps)?;
    let kinds = [DemandKind::Linear, DemandKind::Exponential];
    let models: Vec<(DemandKind, usize, DemandModel)> = kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let seed = common.seed.wrapping_add(k as u64);
            Ok(sample_demand_models(kind, instances, bounds, seed)?
                .into_iter()
                .enumerate()
                .map(move |(i, m)| (kind, i, m)))
        })
        .collect::<Result<Vec<_>, PricingError>>()?
        .into_iter()
        .flatten()
        .collect();
    let procedures = [
        Procedure::Ternary,
        Procedure::Stopping(StoppingCriterion::Regular),
        Procedure::Stopping(StoppingCriterion::GeneralUnimodal),
    ];
    let cells: Vec<(usize, Procedure)> =
        (0..models.len()).flat_map(|i| procedures.iter().map(move |&p| (i, p))).collect();
    let config = json!({ "common": common, "instances": instances, "eps": eps, "budget_queries": 2 * rounds });
    let columns = ["kind", "instance", "a", "b", "procedure", "queries", "reached", "lambda_star", "true_ratio"];
    let (mut w, path) = open_writer(common, Manifest::new("ternary", config, &columns, cells.len()))?;
    w.run(&cells, |&(i, procedure)| {
        let (kind, instance, model) = &models[i];
        let (queries, reached, lambda, ratio) = match procedure {
            Procedure::Ternary => {
                let out = ternary_search(model, eps, TernaryBudget::Queries(2 * rounds))?;
                let ratio = model.ratio(&PricingMechanism::point_mass(out.price));
                (out.log.len(), None, None, ratio)
            }
            Procedure::Stopping(criterion) => {
                let mut explorer = TernaryExplorer::new(bounds, rounds);
                let init = InformationSet::endpoints(bounds);
                let out =
                    meta_dynamic_pricing(&mut explorer, |p| model.conversion_rate(p), &init, criterion, eps, common.m)?;
                let ratio = model.ratio(&out.mechanism);
                (out.queries, Some(out.reached), Some(out.lambda_star), ratio)
            }
        };
        Ok(vec![
            format!("{kind:?}").to_lowercase(),
            instance.to_string(),
            fmt_num(model.a),
            fmt_num(model.b),
            procedure.name().to_string(),
            queries.to_string(),
            reached.map(|r| r.to_string()).unwrap_or_default(),
            fmt_opt(lambda),
            fmt_num(ratio),
        ])
    })?;
    Ok(path)
}
