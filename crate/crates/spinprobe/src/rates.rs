//! Spin-exchange transition rates: cross-section tables, cloud density
//! overlap, Maxwell-Boltzmann thermal averaging with the endoergic energy
//! threshold, and assembly of the twelve rates (six up, six down) that
//! drive the seven-level chain.

use std::f64::consts::FRAC_2_SQRT_PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::endo;
use crate::error::{Error, Result};
use crate::quad;
use crate::units::{BTPoint, PhysicalConstants};

/// Default constant cross section for self-contained runs (m^2).
pub const DEFAULT_SIGMA_M2: f64 = 1e-16;

/// Default uniform probe-bath density overlap (m^-3).
pub const DEFAULT_OVERLAP_M3: f64 = 1e18;

/// Collision-energy integrals truncate this many thermal units above the
/// threshold.
const THERMAL_CUTOFF: f64 = 45.0;

/// Whether a transition raises (endoergic) or lowers (exoergic) the probe's
/// magnetic quantum number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Endo,
    Exo,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Endo => write!(f, "endo"),
            Direction::Exo => write!(f, "exo"),
        }
    }
}

/// A single transition's cross section: either energy-independent or a
/// sampled curve over collision energy (kelvin equivalents, ascending).
/// Sampled curves are interpolated linearly and clamped at their ends.
#[derive(Debug, Clone, PartialEq)]
pub enum CrossSection {
    Constant(f64),
    Sampled(Vec<(f64, f64)>),
}

impl CrossSection {
    fn validate(&self) -> Result<()> {
        match self {
            CrossSection::Constant(s) => {
                if !s.is_finite() || *s < 0.0 {
                    return Err(Error::CrossSections(format!(
                        "cross section must be finite and >= 0, got {s}"
                    )));
                }
            }
            CrossSection::Sampled(curve) => {
                if curve.is_empty() {
                    return Err(Error::CrossSections("empty sampled curve".into()));
                }
                for &(e, s) in curve {
                    if !e.is_finite() || e < 0.0 || !s.is_finite() || s < 0.0 {
                        return Err(Error::CrossSections(format!(
                            "sampled point ({e}, {s}) must be finite and >= 0"
                        )));
                    }
                }
                if curve.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::CrossSections(
                        "sampled curve energies must be strictly ascending".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn at(&self, energy_k: f64) -> f64 {
        match self {
            CrossSection::Constant(s) => *s,
            CrossSection::Sampled(curve) => {
                if energy_k <= curve[0].0 {
                    return curve[0].1;
                }
                let last = curve[curve.len() - 1];
                if energy_k >= last.0 {
                    return last.1;
                }
                let i = curve.partition_point(|&(e, _)| e <= energy_k);
                let (e0, s0) = curve[i - 1];
                let (e1, s1) = curve[i];
                s0 + (s1 - s0) * (energy_k - e0) / (e1 - e0)
            }
        }
    }

    fn max_value(&self) -> f64 {
        match self {
            CrossSection::Constant(s) => *s,
            CrossSection::Sampled(curve) => curve.iter().map(|&(_, s)| s).fold(0.0, f64::max),
        }
    }
}

/// Cross sections for the twelve transitions: `endo[i]` is m -> m+1 with
/// m = i - 3 (m in -3..=2), `exo[i]` is m -> m-1 with m = i - 2
/// (m in -2..=3).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionTable {
    pub endo: [CrossSection; 6],
    pub exo: [CrossSection; 6],
}

impl CrossSectionTable {
    pub fn validate(&self) -> Result<()> {
        for cs in self.endo.iter().chain(self.exo.iter()) {
            cs.validate()?;
        }
        Ok(())
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |cs: &CrossSection| match cs {
            CrossSection::Constant(s) => CrossSection::Constant(s * factor),
            CrossSection::Sampled(c) => {
                CrossSection::Sampled(c.iter().map(|&(e, s)| (e, s * factor)).collect())
            }
        };
        CrossSectionTable {
            endo: std::array::from_fn(|i| scale(&self.endo[i])),
            exo: std::array::from_fn(|i| scale(&self.exo[i])),
        }
    }
}

/// Constant cross section `scale` for all twelve transitions.
pub fn default_cross_sections(scale: f64) -> Result<CrossSectionTable> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::CrossSections(format!(
            "cross-section scale must be > 0, got {scale}"
        )));
    }
    Ok(CrossSectionTable {
        endo: std::array::from_fn(|_| CrossSection::Constant(scale)),
        exo: std::array::from_fn(|_| CrossSection::Constant(scale)),
    })
}

/// Loads a cross-section table from CSV with header
/// `m_from,direction,energy_uK,sigma_m2`. A blank energy field marks a
/// constant entry; rows sharing (m_from, direction) with energies form a
/// sampled curve. All twelve transitions must be covered.
pub fn load_cross_sections(path: &Path) -> Result<CrossSectionTable> {
    let text = std::fs::read_to_string(path)?;
    parse_cross_sections(&text, &path.display().to_string())
}

pub fn parse_cross_sections(text: &str, origin: &str) -> Result<CrossSectionTable> {
    let err = |line: usize, message: String| Error::CrossSectionFile {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() || l.trim_start().starts_with('#') => continue,
            Some((n, l)) => break (n, l),
            None => return Err(err(0, "empty file".into())),
        }
    };
    let expected = "m_from,direction,energy_uK,sigma_m2";
    if header.1.trim() != expected {
        return Err(err(
            header.0 + 1,
            format!("expected header `{expected}`, got `{}`", header.1.trim()),
        ));
    }

    // per-transition accumulation: (constant value, sampled points)
    type Pending = (Option<f64>, Vec<(f64, f64)>);
    let mut entries: Vec<Pending> = vec![(None, Vec::new()); 12];
    let slot = |m_from: i32, dir: Direction| -> Option<usize> {
        match dir {
            Direction::Endo if (-3..=2).contains(&m_from) => Some((m_from + 3) as usize),
            Direction::Exo if (-2..=3).contains(&m_from) => Some(6 + (m_from + 2) as usize),
            _ => None,
        }
    };

    for (n, line) in lines {
        let line_no = n + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let m_from: i32 = fields[0]
            .parse()
            .map_err(|_| err(line_no, format!("bad m_from `{}`", fields[0])))?;
        let dir = match fields[1] {
            "endo" => Direction::Endo,
            "exo" => Direction::Exo,
            other => return Err(err(line_no, format!("bad direction `{other}`"))),
        };
        let Some(idx) = slot(m_from, dir) else {
            return Err(err(
                line_no,
                format!("transition m_from={m_from} direction={dir} does not exist"),
            ));
        };
        let sigma: f64 = fields[3]
            .parse()
            .map_err(|_| err(line_no, format!("bad sigma_m2 `{}`", fields[3])))?;
        if fields[2].is_empty() {
            if entries[idx].0.is_some() || !entries[idx].1.is_empty() {
                return Err(err(
                    line_no,
                    format!("duplicate constant entry for m_from={m_from} {dir}"),
                ));
            }
            entries[idx].0 = Some(sigma);
        } else {
            if entries[idx].0.is_some() {
                return Err(err(
                    line_no,
                    format!("transition m_from={m_from} {dir} mixes constant and sampled rows"),
                ));
            }
            let energy_uk: f64 = fields[2]
                .parse()
                .map_err(|_| err(line_no, format!("bad energy_uK `{}`", fields[2])))?;
            entries[idx].1.push((energy_uk * 1e-6, sigma));
        }
    }

    let mut built: Vec<CrossSection> = Vec::with_capacity(12);
    for (idx, (constant, curve)) in entries.into_iter().enumerate() {
        let (m_from, dir) = if idx < 6 {
            (idx as i32 - 3, Direction::Endo)
        } else {
            (idx as i32 - 8, Direction::Exo)
        };
        let cs = match (constant, curve.is_empty()) {
            (Some(s), _) => CrossSection::Constant(s),
            (None, false) => CrossSection::Sampled(curve),
            (None, true) => {
                return Err(Error::CrossSections(format!(
                    "missing transition m_from={m_from} direction={dir} in {origin}"
                )))
            }
        };
        built.push(cs);
    }
    let table = CrossSectionTable {
        endo: std::array::from_fn(|i| built[i].clone()),
        exo: std::array::from_fn(|i| built[6 + i].clone()),
    };
    table.validate()?;
    Ok(table)
}

/// Probe-bath spatial configuration, as a fixed density overlap or as a
/// pair of Gaussian clouds (the probe cloud is normalized to one atom).
#[derive(Debug, Clone, PartialEq)]
pub enum CloudGeometry {
    Uniform {
        /// Density overlap (m^-3).
        overlap: f64,
    },
    Gaussian {
        /// Bath peak density (m^-3).
        rb_peak_density: f64,
        /// Bath 1/e^(1/2) widths per axis (m).
        rb_widths: [f64; 3],
        /// Probe-cloud widths per axis (m).
        cs_widths: [f64; 3],
        /// Probe-cloud center offset from the bath center (m).
        cs_offset: [f64; 3],
    },
}

impl Default for CloudGeometry {
    fn default() -> Self {
        CloudGeometry::Uniform {
            overlap: DEFAULT_OVERLAP_M3,
        }
    }
}

/// Probe-bath density overlap integral (m^-3).
pub fn density_overlap(g: &CloudGeometry) -> Result<f64> {
    match g {
        CloudGeometry::Uniform { overlap } => {
            if !overlap.is_finite() || *overlap < 0.0 {
                return Err(Error::Domain(format!(
                    "overlap must be finite and >= 0, got {overlap}"
                )));
            }
            Ok(*overlap)
        }
        CloudGeometry::Gaussian {
            rb_peak_density,
            rb_widths,
            cs_widths,
            cs_offset,
        } => {
            if !rb_peak_density.is_finite() || *rb_peak_density < 0.0 {
                return Err(Error::Domain(format!(
                    "peak density must be finite and >= 0, got {rb_peak_density}"
                )));
            }
            for w in rb_widths.iter().chain(cs_widths.iter()) {
                if !w.is_finite() || *w <= 0.0 {
                    return Err(Error::Domain(format!("cloud widths must be > 0, got {w}")));
                }
            }
            let mut overlap = *rb_peak_density;
            for i in 0..3 {
                let var = rb_widths[i] * rb_widths[i] + cs_widths[i] * cs_widths[i];
                overlap *=
                    rb_widths[i] / var.sqrt() * (-cs_offset[i] * cs_offset[i] / (2.0 * var)).exp();
            }
            Ok(overlap)
        }
    }
}

/// Thermal average of one cross section over the Maxwell-Boltzmann
/// distribution of collision energies, counting only collisions above
/// `threshold_k` (kelvin equivalents; the Zeeman cost for endoergic
/// transitions, zero for exoergic ones).
///
/// Constant entries reduce exactly to sigma times the above-threshold
/// fraction; sampled curves are integrated adaptively to 1e-10 relative.
pub fn thermal_average_sigma(entry: &CrossSection, t: f64, threshold_k: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("temperature must be > 0 K, got {t}")));
    }
    if !threshold_k.is_finite() || threshold_k < 0.0 {
        return Err(Error::Domain(format!(
            "threshold must be >= 0 K, got {threshold_k}"
        )));
    }
    entry.validate()?;
    match entry {
        CrossSection::Constant(sigma) => {
            if threshold_k == 0.0 {
                Ok(*sigma)
            } else {
                Ok(sigma * endo::fraction_above_threshold(threshold_k / t))
            }
        }
        CrossSection::Sampled(_) => {
            let a = threshold_k / t;
            let integrand = |x: f64| entry.at(x * t) * FRAC_2_SQRT_PI * x.sqrt() * (-x).exp();
            let scale = entry.max_value();
            if scale == 0.0 {
                return Ok(0.0);
            }
            let rough = quad::integrate(&integrand, a, a + THERMAL_CUTOFF, 1e-6 * scale);
            let tol = (1e-10 * rough.abs()).max(1e-22 * scale);
            Ok(quad::integrate(&integrand, a, a + THERMAL_CUTOFF, tol))
        }
    }
}

/// The twelve spin-exchange rates in 1/s. Indexing matches
/// [`CrossSectionTable`]: `endo[i]` drives m = i-3 up, `exo[i]` drives
/// m = i-2 down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionRates {
    pub endo: [f64; 6],
    pub exo: [f64; 6],
}

impl TransitionRates {
    pub fn all(&self) -> impl Iterator<Item = f64> + '_ {
        self.endo.iter().chain(self.exo.iter()).copied()
    }

    pub fn max_rate(&self) -> f64 {
        self.all().fold(0.0, f64::max)
    }

    /// Smallest strictly positive rate, if any.
    pub fn min_positive_rate(&self) -> Option<f64> {
        self.all().filter(|&r| r > 0.0).min_by(f64::total_cmp)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            endo: self.endo.map(|r| r * factor),
            exo: self.exo.map(|r| r * factor),
        }
    }
}

/// Assembles the twelve rates at a bath condition: overlap times thermally
/// averaged cross section times mean relative speed, with the Zeeman
/// threshold applied to the endoergic side only.
pub fn compute_rates(
    c: &PhysicalConstants,
    table: &CrossSectionTable,
    point: BTPoint,
    cloud: &CloudGeometry,
) -> Result<TransitionRates> {
    let n = density_overlap(cloud)?;
    let v = c.mean_rel_speed(point.temperature)?;
    let threshold = c.zeeman_gap_kelvin(point.b_field)?;
    let mut endo = [0.0; 6];
    let mut exo = [0.0; 6];
    for i in 0..6 {
        endo[i] = n * thermal_average_sigma(&table.endo[i], point.temperature, threshold)? * v;
        exo[i] = n * thermal_average_sigma(&table.exo[i], point.temperature, 0.0)? * v;
    }
    Ok(TransitionRates { endo, exo })
}
