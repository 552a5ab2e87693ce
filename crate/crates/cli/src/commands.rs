//! One function per subcommand. Each returns the text it would emit so the
//! caller decides where it goes.

use std::fmt::Write as _;

use rfr_sabr::calibration::{self, CalibrationResult, FitOptions, QuoteContext, QuoteSet};
use rfr_sabr::effective::{self, EffectiveSabrParams};
use rfr_sabr::hull_white::{self, Curvature};
use rfr_sabr::mc::{self, McConfig, McSamples};
use rfr_sabr::oracle;
use rfr_sabr::pricer::{self, CapletResult};
use rfr_sabr::{hagan, CapletSpec, CapletStyle, DecayExponent};
use serde::Serialize;

use crate::config::RunConfig;
use crate::csvfmt::{self, CsvTable};
use crate::error::CliError;

/// Which analytic backward-looking curves `smile` emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CurveSet {
    /// Hagan at `(α̂, ρ̂, ν̂)`.
    Effective,
    /// Hagan at `(α̂, ρ, ν)`.
    AlphaOnly,
    /// Hagan at `(α, ρ, ν)`, no adjustment.
    Unadjusted,
    All,
}

impl CurveSet {
    fn members(self) -> &'static [CurveSet] {
        match self {
            CurveSet::All => &[
                CurveSet::Effective,
                CurveSet::AlphaOnly,
                CurveSet::Unadjusted,
            ],
            CurveSet::Effective => &[CurveSet::Effective],
            CurveSet::AlphaOnly => &[CurveSet::AlphaOnly],
            CurveSet::Unadjusted => &[CurveSet::Unadjusted],
        }
    }
}

fn spec(cfg: &RunConfig, strike: f64, style: CapletStyle) -> CapletSpec {
    CapletSpec {
        strike,
        style,
        period: cfg.period,
        discount: cfg.discount,
        forward_rate: cfg.forward_rate,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PriceReport {
    pub style: CapletStyle,
    pub strike: f64,
    #[serde(flatten)]
    pub result: CapletResult,
}

impl PriceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = &self.result;
        let _ = writeln!(s, "style             {}", self.style);
        let _ = writeln!(s, "strike            {}", self.strike);
        let _ = writeln!(s, "present_value     {}", r.present_value);
        match r.implied_vol {
            Some(v) => {
                let _ = writeln!(s, "implied_vol       {v}");
            }
            None => {
                let _ = writeln!(
                    s,
                    "implied_vol       n/a (rate already fixed, intrinsic value)"
                );
            }
        }
        if let Some(t) = r.time_to_exercise {
            let _ = writeln!(s, "time_to_exercise  {t}");
        }
        if let Some(e) = &r.effective_params {
            write_effective(&mut s, e);
        }
        s
    }
}

fn write_effective(s: &mut String, e: &EffectiveSabrParams) {
    let _ = writeln!(s, "alpha_hat         {:.6}  ({})", e.alpha_hat, e.alpha_hat);
    let _ = writeln!(s, "rho_hat           {:.6}  ({})", e.rho_hat, e.rho_hat);
    let _ = writeln!(s, "nu_hat            {:.6}  ({})", e.nu_hat, e.nu_hat);
    let _ = writeln!(s, "quoted_expiry     {}", e.time_to_exercise);
}

pub fn cmd_price(cfg: &RunConfig) -> Result<PriceReport, CliError> {
    let c = cfg
        .caplet
        .ok_or_else(|| CliError::Config("price needs a 'caplet' section".into()))?;
    let s = spec(cfg, c.strike, c.style);
    let result = match c.style {
        CapletStyle::Forward => pricer::price_forward_caplet(&s, &cfg.model)?,
        CapletStyle::Backward => pricer::price_backward_caplet(&s, &cfg.model, cfg.require_q()?)?,
    };
    Ok(PriceReport {
        style: c.style,
        strike: c.strike,
        result,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveReport {
    pub regime: &'static str,
    pub effective: EffectiveSabrParams,
    pub quadrature: Option<EffectiveSabrParams>,
}

impl EffectiveReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "regime            {}", self.regime);
        write_effective(&mut s, &self.effective);
        if let Some(o) = &self.quadrature {
            let e = &self.effective;
            let _ = writeln!(s, "quadrature check");
            let _ = writeln!(
                s,
                "  alpha_hat       {}  (rel diff {:e})",
                o.alpha_hat,
                o.alpha_hat / e.alpha_hat - 1.0
            );
            let _ = writeln!(
                s,
                "  rho_hat         {}  (abs diff {:e})",
                o.rho_hat,
                o.rho_hat - e.rho_hat
            );
            let rel = if e.nu_hat > 0.0 {
                o.nu_hat / e.nu_hat - 1.0
            } else {
                o.nu_hat
            };
            let _ = writeln!(s, "  nu_hat          {}  (rel diff {:e})", o.nu_hat, rel);
        }
        s
    }
}

pub fn cmd_effective_params(
    cfg: &RunConfig,
    with_oracle: bool,
) -> Result<EffectiveReport, CliError> {
    let q = cfg.require_q()?;
    let effective = effective::effective_params(&cfg.model, &cfg.period, q)?;
    let quadrature = if with_oracle {
        Some(oracle::effective_params_quadrature(
            &cfg.model,
            &cfg.period,
            q,
        )?)
    } else {
        None
    };
    let regime = if cfg.period.tau0() < 0.0 {
        "accrual period started (tau0 < 0)"
    } else {
        "accrual period not started (tau0 >= 0)"
    };
    Ok(EffectiveReport {
        regime,
        effective,
        quadrature,
    })
}

pub const SMILE_COLUMNS: [&str; 7] = [
    "strike",
    "style",
    "pv",
    "implied_vol",
    "alpha_hat",
    "rho_hat",
    "nu_hat",
];

pub fn cmd_smile(cfg: &RunConfig, curves: CurveSet) -> Result<String, CliError> {
    let strikes = cfg.strike_grid();
    let styles = cfg.style_list();
    let p = &cfg.model;
    let curve_params: Vec<EffectiveSabrParams> = if styles.contains(&CapletStyle::Backward) {
        let e = effective::effective_params(p, &cfg.period, cfg.require_q()?)?;
        curves
            .members()
            .iter()
            .map(|c| match c {
                CurveSet::AlphaOnly => EffectiveSabrParams {
                    rho_hat: p.rho,
                    nu_hat: p.nu,
                    ..e
                },
                CurveSet::Unadjusted => EffectiveSabrParams {
                    alpha_hat: p.alpha,
                    rho_hat: p.rho,
                    nu_hat: p.nu,
                    ..e
                },
                _ => e,
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut table = CsvTable::new("smile", &SMILE_COLUMNS);
    for &k in &strikes {
        for &style in &styles {
            match style {
                CapletStyle::Backward => {
                    let s = spec(cfg, k, style);
                    for e in &curve_params {
                        let r = pricer::price_backward_caplet_effective(&s, p, e)?;
                        table.row(vec![
                            csvfmt::num(k),
                            style.to_string(),
                            csvfmt::num(r.present_value),
                            csvfmt::opt(r.implied_vol),
                            csvfmt::num(e.alpha_hat),
                            csvfmt::num(e.rho_hat),
                            csvfmt::num(e.nu_hat),
                        ]);
                    }
                }
                CapletStyle::Forward => {
                    let r = pricer::price_forward_caplet(&spec(cfg, k, style), p)?;
                    table.row(vec![
                        csvfmt::num(k),
                        style.to_string(),
                        csvfmt::num(r.present_value),
                        csvfmt::opt(r.implied_vol),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]);
                }
            }
        }
    }
    table.finish()
}

pub const SIMULATE_COLUMNS: [&str; 10] = [
    "strike",
    "style",
    "mc_pv",
    "mc_se",
    "mc_implied_vol",
    "mc_vol_se",
    "analytic_vol",
    "gap",
    "band",
    "within_band",
];

/// Absolute slack of the MC agreement band `3·SE + 0.003`.
pub const BAND_SLACK: f64 = 0.003;
pub const BAND_SE_MULTIPLE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub csv: String,
    pub summary: String,
    pub pass: bool,
    pub paths_csv: Option<String>,
}

fn analytic_vol(
    cfg: &RunConfig,
    e: &EffectiveSabrParams,
    k: f64,
    style: CapletStyle,
) -> Option<f64> {
    match style {
        CapletStyle::Backward => hagan::hagan_implied_vol(
            e.time_to_exercise,
            k,
            cfg.forward_rate,
            &e.to_sabr(&cfg.model),
        )
        .ok(),
        CapletStyle::Forward => {
            let t0 = cfg.period.tau0();
            (t0 > 0.0)
                .then(|| hagan::hagan_implied_vol(t0, k, cfg.forward_rate, &cfg.model).ok())
                .flatten()
        }
    }
}

pub fn cmd_simulate(
    cfg: &RunConfig,
    mc_cfg: &McConfig,
    dump_count: Option<usize>,
) -> Result<SimulateOutput, CliError> {
    let q = cfg.require_q()?;
    let strikes = cfg.strike_grid();
    let styles = cfg.style_list();
    let p = &cfg.model;
    let e = effective::effective_params(p, &cfg.period, q)?;
    let samples: McSamples = mc::simulate_paths(p, cfg.forward_rate, &cfg.period, q, mc_cfg)?;
    let smiles = styles
        .iter()
        .map(|&s| samples.smile(&strikes, s, cfg.discount))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = CsvTable::new("simulate", &SIMULATE_COLUMNS);
    let mut worst_gap: Option<(f64, f64, CapletStyle)> = None;
    let mut worst_ratio = 0.0f64;
    let mut invertible = 0usize;
    let mut pass = true;
    for (i, &k) in strikes.iter().enumerate() {
        for (smile, &style) in smiles.iter().zip(&styles) {
            let vol = smile.implied_vols[i];
            let vol_se = smile.vol_std_errors[i];
            let analytic = analytic_vol(cfg, &e, k, style);
            let (gap, band, within) = match (vol, vol_se, analytic) {
                (Some(v), Some(se), Some(a)) => {
                    let gap = v - a;
                    let band = BAND_SE_MULTIPLE * se + BAND_SLACK;
                    invertible += 1;
                    pass &= gap.abs() <= band;
                    worst_ratio = worst_ratio.max(gap.abs() / band);
                    if worst_gap.is_none_or(|(g, _, _)| gap.abs() > g) {
                        worst_gap = Some((gap.abs(), k, style));
                    }
                    (Some(gap), Some(band), Some(gap.abs() <= band))
                }
                _ => (None, None, None),
            };
            table.row(vec![
                csvfmt::num(k),
                style.to_string(),
                csvfmt::num(smile.prices[i]),
                csvfmt::num(smile.std_errors[i]),
                csvfmt::opt(vol),
                csvfmt::opt(vol_se),
                csvfmt::opt(analytic),
                csvfmt::opt(gap),
                csvfmt::opt(band),
                within.map_or(String::new(), |w| w.to_string()),
            ]);
        }
    }

    let mut summary = String::new();
    let _ = write!(
        summary,
        "paths={} dt={} seed={} invertible={}/{}",
        mc_cfg.n_paths,
        mc_cfg.dt,
        mc_cfg.seed,
        invertible,
        strikes.len() * styles.len()
    );
    if let Some((g, k, s)) = worst_gap {
        let _ = write!(
            summary,
            " max|gap|={g:.3e} (K={k}, {s}) max|gap|/band={worst_ratio:.3}"
        );
    }
    if samples.absorbed > 0 {
        let _ = write!(summary, " absorbed={}", samples.absorbed);
    }
    if styles.len() == 2 && cfg.period.tau0() > 0.0 {
        let gaps = samples.jensen_gaps(&strikes, cfg.discount)?;
        let holds = gaps.iter().all(|d| d.holds(BAND_SE_MULTIPLE));
        let _ = write!(summary, " jensen={}", if holds { "ok" } else { "violated" });
        pass &= holds;
    }
    let _ = write!(summary, " verdict={}", if pass { "PASS" } else { "FAIL" });

    let paths_csv = match dump_count {
        Some(n) => {
            let tr = mc::simulate_trajectories(p, cfg.forward_rate, &cfg.period, q, mc_cfg, n)?;
            let mut t = CsvTable::new("paths", &["path", "t", "rate", "vol"]);
            for traj in &tr {
                for j in 0..traj.times.len() {
                    t.row(vec![
                        traj.path.to_string(),
                        csvfmt::num(traj.times[j]),
                        csvfmt::num(traj.rates[j]),
                        csvfmt::num(traj.vols[j]),
                    ]);
                }
            }
            Some(t.finish()?)
        }
        None => None,
    };

    Ok(SimulateOutput {
        csv: table.finish()?,
        summary,
        pass,
        paths_csv,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub forward_fit: Option<CalibrationResult>,
    pub q_fit: Option<CalibrationResult>,
}

impl CalibrationReport {
    pub fn converged(&self) -> bool {
        self.forward_fit
            .iter()
            .chain(&self.q_fit)
            .all(|r| r.converged)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let table = |s: &mut String, r: &CalibrationResult| {
            let _ = writeln!(
                s,
                "  {:>10}  {:>8}  {:>22}  {:>22}  {:>12}",
                "strike", "style", "market", "model", "residual"
            );
            for x in &r.residuals {
                let _ = writeln!(
                    s,
                    "  {:>10}  {:>8}  {:>22}  {:>22}  {:>12.3e}",
                    x.strike,
                    x.style.to_string(),
                    x.market,
                    x.model,
                    x.residual
                );
            }
        };
        if let Some(r) = &self.forward_fit {
            let _ = writeln!(s, "forward smile fit (beta fixed at {})", r.params.beta);
            let _ = writeln!(s, "  alpha      {}", r.params.alpha);
            let _ = writeln!(s, "  rho        {}", r.params.rho);
            let _ = writeln!(s, "  nu         {}", r.params.nu);
            let _ = writeln!(
                s,
                "  objective  {:e} (initial {:e}), iterations {}, converged {}",
                r.objective, r.initial_objective, r.iterations, r.converged
            );
            table(&mut s, r);
        }
        if let Some(r) = &self.q_fit {
            let _ = writeln!(s, "q fit to at-the-money backward quote");
            let _ = writeln!(
                s,
                "  q          {}{}",
                r.q.unwrap_or(f64::NAN),
                if r.q_capped {
                    " (capped at bracket end)"
                } else {
                    ""
                }
            );
            let _ = writeln!(s, "  converged  {}", r.converged);
            table(&mut s, r);
        }
        s
    }
}

pub fn cmd_calibrate(cfg: &RunConfig, quotes: &QuoteSet) -> Result<CalibrationReport, CliError> {
    let has = |style| quotes.quotes.iter().any(|q| q.style == style);
    let opts = FitOptions {
        metric: cfg.calibration.metric,
        parameters: cfg.calibration.parameters,
        max_iter: cfg.calibration.max_iter,
        tolerance: cfg.calibration.tolerance,
    };
    let forward_fit = if has(CapletStyle::Forward) {
        Some(calibration::calibrate_forward_smile(
            quotes, &cfg.model, &opts,
        )?)
    } else {
        None
    };
    let marked = forward_fit.as_ref().map_or(cfg.model, |r| r.params);
    let q_fit = if has(CapletStyle::Backward) {
        Some(calibration::calibrate_q_to_atm_backward(quotes, &marked)?)
    } else {
        None
    };
    Ok(CalibrationReport { forward_fit, q_fit })
}

pub fn quote_context(cfg: &RunConfig) -> QuoteContext {
    QuoteContext {
        period: cfg.period,
        forward_rate: cfg.forward_rate,
        discount: cfg.discount,
        shift: cfg.model.shift,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HwOutput {
    pub csv: String,
    pub summary: String,
}

pub fn cmd_hw_compare(cfg: &RunConfig) -> Result<HwOutput, CliError> {
    let hw = cfg
        .hw
        .ok_or_else(|| CliError::Config("hw-compare needs an 'hw' section".into()))?;
    let q: DecayExponent = cfg.require_q()?;
    let grid = hull_white::uniform_grid(&cfg.period, hw.grid_points - 1);
    let report = hull_white::decay_shape_report(hw.kappa, q, &cfg.period, &grid)?;
    let mut table = CsvTable::new("hw-compare", &["t", "psi", "psi_tilde", "gap"]);
    for r in &report.rows {
        table.row(vec![
            csvfmt::num(r.t),
            csvfmt::num(r.psi),
            csvfmt::num(r.psi_tilde),
            csvfmt::num(r.gap),
        ]);
    }
    let psi: Vec<f64> = report.rows.iter().map(|r| r.psi).collect();
    let tilde: Vec<f64> = report.rows.iter().map(|r| r.psi_tilde).collect();
    let class = |c: Curvature| format!("{c:?}").to_lowercase();
    let summary = format!(
        "kappa={} q={} max|gap|={:.3e} curvature psi={} psi_tilde={}",
        hw.kappa,
        q.value(),
        report.max_abs_gap,
        class(hull_white::curvature(&psi, 1e-13)),
        class(hull_white::curvature(&tilde, 1e-13)),
    );
    Ok(HwOutput {
        csv: table.finish()?,
        summary,
    })
}
