//! Command dispatch: every subcommand maps a validated configuration to a
//! result envelope.

use std::fmt;
use std::path::Path;

use serde_json::json;

use crate::config::{GridSpec, PayloadFormat, RunConfig};
use crate::dynamics::{build_generator, evolve, steady_state};
use crate::endo::{fit_fraction, fraction_derivatives};
use crate::envelope::{fmt_f64, CsvBuilder, ResultEnvelope};
use crate::error::{Error, Result};
use crate::rates::Direction;
use crate::scan::{locate_maxima, scan_bt_grid};
use crate::sensitivity::{sensitivity_at, sensitivity_profile, Axis, ProbeModel};

/// The toolkit's subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fraction,
    Rates,
    Evolve,
    Steady,
    Sensitivity,
    Profile,
    Scan,
    Maxima,
    Fit,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Fraction,
        Command::Rates,
        Command::Evolve,
        Command::Steady,
        Command::Sensitivity,
        Command::Profile,
        Command::Scan,
        Command::Maxima,
        Command::Fit,
    ];

    fn name(&self) -> &'static str {
        match self {
            Command::Fraction => "fraction",
            Command::Rates => "rates",
            Command::Evolve => "evolve",
            Command::Steady => "steady",
            Command::Sensitivity => "sensitivity",
            Command::Profile => "profile",
            Command::Scan => "scan",
            Command::Maxima => "maxima",
            Command::Fit => "fit",
        }
    }

    /// Structured results default to JSON, tables to CSV.
    fn default_format(&self) -> PayloadFormat {
        match self {
            Command::Sensitivity | Command::Maxima | Command::Fit => PayloadFormat::Json,
            _ => PayloadFormat::Csv,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

const DEFAULT_RATIO_GRID: GridSpec = GridSpec::linear(0.1, 2.0, 401);
const DEFAULT_FIT_GRID: GridSpec = GridSpec::linear(0.1, 2.5, 241);
const DEFAULT_T_PROFILE_GRID: GridSpec = GridSpec::log(5e-8, 1e-5, 201);
const DEFAULT_B_PROFILE_GRID: GridSpec = GridSpec::log(1e-3, 0.3, 201);
const DEFAULT_ETOT_PROFILE_GRID: GridSpec = GridSpec::linear(7e-7, 2.2e-6, 201);
const DEFAULT_SCAN_B_GRID: GridSpec = GridSpec::linear(0.010, 0.080, 10);
const DEFAULT_SCAN_T_GRID: GridSpec = GridSpec::linear(2e-7, 1e-6, 10);
const DEFAULT_TIMES_S: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];

/// A tabular payload rendered either as a CSV body or as a JSON
/// columns-and-rows document. Cells hold pre-formatted strings for CSV and
/// raw JSON values for JSON, so numbers keep full precision in both.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<serde_json::Value>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<serde_json::Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn payload(self, format: PayloadFormat) -> serde_json::Value {
        match format {
            PayloadFormat::Json => json!({
                "columns": self.columns,
                "rows": self.rows,
            }),
            PayloadFormat::Csv => {
                let mut csv = CsvBuilder::new(&self.columns);
                for row in self.rows {
                    let fields: Vec<String> = row
                        .iter()
                        .map(|v| match v {
                            serde_json::Value::Number(n) => match n.as_f64() {
                                Some(x) if n.is_f64() => fmt_f64(x),
                                _ => n.to_string(),
                            },
                            serde_json::Value::String(s) => s.clone(),
                            serde_json::Value::Null => String::new(),
                            other => other.to_string(),
                        })
                        .collect();
                    csv.row(&fields);
                }
                serde_json::Value::String(csv.finish())
            }
        }
    }
}

fn num(x: f64) -> serde_json::Value {
    json!(x)
}

/// Runs one command against a validated configuration. `base_dir` anchors
/// relative paths inside the configuration.
pub fn run_command(
    command: Command,
    config: &RunConfig,
    base_dir: &Path,
) -> Result<ResultEnvelope> {
    let model = config.build_model(base_dir)?;
    let format = config.format.unwrap_or_else(|| command.default_format());
    let payload = match command {
        Command::Fraction => fraction_payload(config, format)?,
        Command::Rates => rates_payload(config, &model, format)?,
        Command::Evolve => evolve_payload(config, &model, format)?,
        Command::Steady => steady_payload(config, &model, format)?,
        Command::Sensitivity => sensitivity_payload(config, &model, format)?,
        Command::Profile => profile_payload(config, &model, format)?,
        Command::Scan => scan_payload(config, &model, format)?,
        Command::Maxima => maxima_payload(config, &model, format)?,
        Command::Fit => fit_payload(config, format)?,
    };
    ResultEnvelope::new(command.name(), config, format, payload)
}

fn fraction_payload(config: &RunConfig, format: PayloadFormat) -> Result<serde_json::Value> {
    let grid = config.ratio_grid.unwrap_or(DEFAULT_RATIO_GRID).values();
    let curve = crate::endo::FractionCurve::evaluate(&grid)?;
    let derivs = fraction_derivatives(&grid)?;
    let mut table = Table::new(&["e_ratio", "fraction", "d_fraction", "d2_fraction"]);
    for (i, &r) in grid.iter().enumerate() {
        table.push(vec![
            num(r),
            num(curve.values[i]),
            num(derivs.first[i]),
            num(derivs.second[i]),
        ]);
    }
    Ok(table.payload(format))
}

fn rates_payload(
    config: &RunConfig,
    model: &ProbeModel,
    format: PayloadFormat,
) -> Result<serde_json::Value> {
    let rates = model.rates_at(config.reference())?;
    let mut table = Table::new(&["m_from", "direction", "rate_per_s"]);
    for (i, r) in rates.endo.iter().enumerate() {
        table.push(vec![
            json!(i as i64 - 3),
            json!(Direction::Endo.to_string()),
            num(*r),
        ]);
    }
    for (i, r) in rates.exo.iter().enumerate() {
        table.push(vec![
            json!(i as i64 - 2),
            json!(Direction::Exo.to_string()),
            num(*r),
        ]);
    }
    Ok(table.payload(format))
}

fn evolve_payload(
    config: &RunConfig,
    model: &ProbeModel,
    format: PayloadFormat,
) -> Result<serde_json::Value> {
    let rates = model.rates_at(config.reference())?;
    let generator = build_generator(&rates)?;
    let times = config
        .times_s
        .clone()
        .unwrap_or_else(|| DEFAULT_TIMES_S.to_vec());
    let initial = config.initial_state()?;
    let mut table = Table::new(&[
        "time_s",
        "p_m_minus3",
        "p_m_minus2",
        "p_m_minus1",
        "p_m_0",
        "p_m_plus1",
        "p_m_plus2",
        "p_m_plus3",
        "norm_drift",
    ]);
    for &t in &times {
        let out = evolve(&initial, &generator, t)?;
        let mut row = vec![num(t)];
        row.extend(out.distribution.probabilities().iter().map(|&p| num(p)));
        row.push(num(out.norm_drift));
        table.push(row);
    }
    Ok(table.payload(format))
}

fn steady_payload(
    config: &RunConfig,
    model: &ProbeModel,
    format: PayloadFormat,
) -> Result<serde_json::Value> {
    let rates = model.rates_at(config.reference())?;
    let ss = steady_state(&rates)?;
    let mut table = Table::new(&["m_f", "probability"]);
    for m in -3..=3 {
        table.push(vec![json!(m), num(ss.probability(m))]);
    }
    Ok(table.payload(format))
}

fn sensitivity_payload(
    config: &RunConfig,
    model: &ProbeModel,
    format: PayloadFormat,
) -> Result<serde_json::Value> {
    let result = sensitivity_at(
        model,
        config.reference(),
        config.axis(),
        config.delta_rel(),
        config.at_time_s,
    )?;
    match format {
        PayloadFormat::Json => Ok(serde_json::to_value(result)?),
        PayloadFormat::Csv => {
            let mut table = Table::new(&[
                "axis",
                "theta_ref",
                "speed_left",
                "speed_right",
                "fisher_left",
                "fisher_right",
                "delta_used",
            ]);
            table.push(vec![
                json!(result.axis.to_string()),
                num(result.theta_ref),
                num(result.speed_left),
                num(result.speed_right),
                num(result.fisher_left),
                num(result.fisher_right),
                num(result.delta_used),
            ]);
            Ok(table.payload(format))
        }
    }
}

fn profile_grid(config: &RunConfig, axis: Axis) -> GridSpec {
    match axis {
        Axis::ConstTVaryB => config.b_grid_gauss.unwrap_or(DEFAULT_B_PROFILE_GRID),
        Axis::ConstBVaryT => config.t_grid_k.unwrap_or(DEFAULT_T_PROFILE_GRID),
        Axis::ConstEtotVaryRatio => config.ratio_grid.unwrap_or(DEFAULT_RATIO_GRID),
        Axis::ConstRatioVaryEtot => config.e_tot_grid_k.unwrap_or(DEFAULT_ETOT_PROFILE_GRID),
    }
}

fn profile_payload(
    config: &RunConfig,
    model: &ProbeModel,
    format: PayloadFormat,
) -> Result<serde_json::Value> {
    let axis = config.axis();
    let reference = config.reference();
    let fixed = match axis {
        Axis::ConstTVaryB => reference.temperature,
        Axis::ConstBVaryT => reference.b_field,
        Axis::ConstEtotVaryRatio => config.e_tot_k(),
        Axis::ConstRatioVaryEtot => model.constants.to_energy_point(reference)?.e_ratio,
    };
    let grid = profile_grid(config, axis).values();
    let profile = sensitivity_profile(
        model,
        axis,
        fixed,
        &grid,
        config.delta_rel(),
        config.at_time_s,
    )?;
    let mut table = Table::new(&["theta", "sqrt_fisher_left", "sqrt_fisher_right"]);
    for p in profile {
        table.push(vec![
            num(p.theta),
            num(p.sqrt_fisher_left),
            num(p.sqrt_fisher_right),
        ]);
    }
    Ok(table.payload(format))
}

fn scan_payload(
    config: &RunConfig,
    model: &ProbeModel,
    format: PayloadFormat,
) -> Result<serde_json::Value> {
    let b_grid = config.b_grid_gauss.unwrap_or(DEFAULT_SCAN_B_GRID).values();
    let t_grid = config.t_grid_k.unwrap_or(DEFAULT_SCAN_T_GRID).values();
    let cells = scan_bt_grid(
        model,
        &b_grid,
        &t_grid,
        config.delta_rel(),
        config.at_time_s,
    )?;
    let mut table = Table::new(&[
        "b_field_gauss",
        "temperature_k",
        "axis",
        "theta_ref",
        "sqrt_fisher_left",
        "sqrt_fisher_right",
        "error",
    ]);
    for cell in cells {
        match cell.result {
            Ok(r) => table.push(vec![
                num(cell.b_field),
                num(cell.temperature),
                json!(cell.axis.to_string()),
                num(r.theta_ref),
                num(r.fisher_left.sqrt()),
                num(r.fisher_right.sqrt()),
                serde_json::Value::Null,
            ]),
            Err(message) => table.push(vec![
                num(cell.b_field),
                num(cell.temperature),
                json!(cell.axis.to_string()),
                serde_json::Value::Null,
                serde_json::Value::Null,
                serde_json::Value::Null,
                json!(message),
            ]),
        }
    }
    Ok(table.payload(format))
}

fn maxima_payload(
    config: &RunConfig,
    model: &ProbeModel,
    format: PayloadFormat,
) -> Result<serde_json::Value> {
    let grid = config.ratio_grid.unwrap_or(DEFAULT_RATIO_GRID).values();
    let report = locate_maxima(
        model,
        config.e_tot_k(),
        &grid,
        config.delta_rel(),
        config.at_time_s,
    )?;
    match format {
        PayloadFormat::Json => Ok(serde_json::to_value(report)?),
        PayloadFormat::Csv => {
            let mut table = Table::new(&[
                "e_tot_k",
                "ratio_at_left_max",
                "ratio_at_right_max",
                "ratio_at_d1_max",
                "ratio_at_d2_max",
                "fraction_at_left_max",
                "fraction_at_right_max",
                "deviation_left",
                "deviation_right",
                "left_interior",
                "right_interior",
            ]);
            table.push(vec![
                num(report.e_tot),
                num(report.ratio_at_left_max),
                num(report.ratio_at_right_max),
                num(report.ratio_at_d1_max),
                num(report.ratio_at_d2_max),
                num(report.fraction_at_left_max),
                num(report.fraction_at_right_max),
                num(report.deviation_left),
                num(report.deviation_right),
                json!(report.left_interior.to_string()),
                json!(report.right_interior.to_string()),
            ]);
            Ok(table.payload(format))
        }
    }
}

fn fit_payload(config: &RunConfig, format: PayloadFormat) -> Result<serde_json::Value> {
    let grid = config.ratio_grid.unwrap_or(DEFAULT_FIT_GRID).values();
    let max_iter = config.fit_max_iterations.unwrap_or(200);
    let result = fit_fraction(&grid, max_iter)?;
    match format {
        PayloadFormat::Json => Ok(serde_json::to_value(result)?),
        PayloadFormat::Csv => {
            let mut table = Table::new(&["a", "b", "c", "d", "residual_rms", "iterations"]);
            table.push(vec![
                num(result.params.a),
                num(result.params.b),
                num(result.params.c),
                num(result.params.d),
                num(result.residual_rms),
                json!(result.iterations),
            ]);
            Ok(table.payload(format))
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown command `{s}`")))
    }
}
