//! Parameter sweeps of the cooling laws and location of the triplet of
//! cooling minima in the atom-cavity detuning.

use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::analytic::{cooling_law_closed, resonance_catalogue, CoolingLaw, CoolingStatus};
use crate::error::{Error, Result};
use crate::numfmt::push_float;
use crate::params::SystemParams;
use crate::rateeq::eliminate;

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Delta,
    Omega,
    Nu,
    Kappa,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Delta => "delta",
            SweepAxis::Omega => "omega",
            SweepAxis::Nu => "nu",
            SweepAxis::Kappa => "kappa",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(SweepAxis::Delta),
            "omega" => Ok(SweepAxis::Omega),
            "nu" => Ok(SweepAxis::Nu),
            "kappa" => Ok(SweepAxis::Kappa),
            other => Err(Error::InvalidParams(format!("unknown sweep axis '{other}'"))),
        }
    }
}

/// Which cooling-law backend evaluates each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawBackend {
    /// Closed-form transcription of the eliminated cooling equation.
    Closed,
    /// Numerical adiabatic elimination of the 16x16 coherence block.
    Eliminated,
}

/// Grid of sweep values; the range form keeps CSV headers compact and
/// reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Range { start: f64, stop: f64, step: f64 },
    Explicit(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let vals = match self {
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop > start) {
                    return Err(Error::InvalidParams(format!(
                        "grid range {start}:{stop}:{step} must have step > 0 and stop > start"
                    )));
                }
                let n = ((stop - start) / step).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
            Grid::Explicit(v) => v.clone(),
        };
        if vals.len() < 2 {
            return Err(Error::InvalidParams("grid needs at least 2 points".into()));
        }
        if !vals.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidParams("grid must be strictly increasing".into()));
        }
        Ok(vals)
    }
}

/// A single sweep request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Grid,
    pub base: SystemParams,
    pub law: LawBackend,
}

impl SweepSpec {
    fn params_at(&self, value: f64) -> SystemParams {
        let mut p = self.base;
        match self.axis {
            SweepAxis::Delta => p.delta = value,
            SweepAxis::Omega => p.omega = value,
            SweepAxis::Nu => p.nu = value,
            SweepAxis::Kappa => p.kappa = value,
        }
        p
    }

    fn evaluate(&self, value: f64) -> Result<CoolingLaw> {
        let p = self.params_at(value);
        match self.law {
            LawBackend::Closed => Ok(cooling_law_closed(&p)),
            LawBackend::Eliminated => eliminate(&p),
        }
    }
}

/// Outcome of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Cooling,
    Heating,
    NoDrive,
    /// Backend singularity; recorded per row, never aborts the sweep.
    Error,
}

impl From<CoolingStatus> for RowStatus {
    fn from(s: CoolingStatus) -> Self {
        match s {
            CoolingStatus::Cooling => RowStatus::Cooling,
            CoolingStatus::Heating => RowStatus::Heating,
            CoolingStatus::NoDrive => RowStatus::NoDrive,
        }
    }
}

impl std::fmt::Display for RowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowStatus::Cooling => "cooling",
            RowStatus::Heating => "heating",
            RowStatus::NoDrive => "nodrive",
            RowStatus::Error => "error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// NaN unless the point cools.
    pub m_ss: f64,
    pub gamma_c: f64,
    pub status: RowStatus,
}

/// A refined interior minimum of m_ss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMinimum {
    pub location: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub minima: Vec<SweepMinimum>,
}

/// Evaluate the selected cooling law on every grid point and locate the
/// interior minima of m_ss. Heating points carry NaN m_ss; backend errors
/// are recorded per row.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let grid = spec.grid.values()?;
    let rows: Vec<SweepRow> = grid
        .iter()
        .map(|&value| match spec.evaluate(value) {
            Ok(law) => SweepRow {
                value,
                m_ss: law.m_ss.unwrap_or(f64::NAN),
                gamma_c: law.gamma_c,
                status: law.status.into(),
            },
            Err(_) => SweepRow {
                value,
                m_ss: f64::NAN,
                gamma_c: f64::NAN,
                status: RowStatus::Error,
            },
        })
        .collect();

    let objective = |v: f64| -> f64 {
        spec.evaluate(v)
            .ok()
            .and_then(|law| law.m_ss)
            .unwrap_or(f64::INFINITY)
    };
    let minima = find_minima(&rows, objective);
    Ok(SweepResult { rows, minima })
}

/// Bracket the interior grid minima of m_ss (non-cooling points count as
/// +inf and cannot bracket) and refine each by golden-section search to
/// 1e-4 relative. On an exact plateau the leftmost grid point is returned
/// unrefined.
pub fn find_minima(rows: &[SweepRow], objective: impl Fn(f64) -> f64) -> Vec<SweepMinimum> {
    let v: Vec<f64> = rows
        .iter()
        .map(|r| {
            if r.status == RowStatus::Cooling {
                r.m_ss
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let n = v.len();
    let mut minima = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if v[i].is_finite() && v[i] < v[i - 1] {
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] > v[i] && v[i - 1].is_finite() && v[j + 1].is_finite() {
                if j > i {
                    // exact plateau: leftmost point, no refinement
                    minima.push(SweepMinimum { location: rows[i].value, value: v[i] });
                } else {
                    let (loc, val) =
                        golden_section_minimize(&objective, rows[i - 1].value, rows[i + 1].value);
                    minima.push(SweepMinimum { location: loc, value: val });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    minima
}

/// Golden-section search for the minimum of `f` on `[a, b]`, to 1e-4
/// relative in the location.
fn golden_section_minimize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI2: f64 = 0.381_966_011_250_105; // 2 - golden ratio
    const REL_TOL: f64 = 1e-4;

    let mut x1 = a + INV_PHI2 * (b - a);
    let mut x2 = b - INV_PHI2 * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if b - a <= REL_TOL * (1.0 + 0.5 * (a.abs() + b.abs())) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + INV_PHI2 * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - INV_PHI2 * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Comparison of the three cooling resonances δ₀, δ₋, δ₊ at fixed drive.
#[derive(Debug, Clone)]
pub struct ResonanceComparison {
    /// (label, detuning, law) for δ₀, δ₋, δ₊ in that order.
    pub rows: [(&'static str, f64, CoolingLaw); 3],
}

impl ResonanceComparison {
    /// Label of the resonance with the lowest stationary phonon number;
    /// heating resonances never win.
    pub fn best(&self) -> Option<&'static str> {
        self.rows
            .iter()
            .filter_map(|(label, _, law)| law.m_ss.map(|m| (*label, m)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(label, _)| label)
    }
}

/// Evaluate the closed-form cooling law on the three cooling resonances.
pub fn compare_resonances(params: &SystemParams) -> Result<ResonanceComparison> {
    if params.omega <= 0.0 {
        return Err(Error::InvalidParams(
            "resonance comparison needs omega > 0".into(),
        ));
    }
    let triplet = resonance_catalogue(params.nu, params.omega).cooling;
    let at = |delta: f64| cooling_law_closed(&SystemParams { delta, ..*params });
    Ok(ResonanceComparison {
        rows: [
            ("delta_0", triplet.center, at(triplet.center)),
            ("delta_-", triplet.minus, at(triplet.minus)),
            ("delta_+", triplet.plus, at(triplet.plus)),
        ],
    })
}

/// Write a sweep as CSV. The first line echoes the full spec as a
/// `# params:` comment from which the exact run can be reconstructed.
pub fn write_csv<W: Write>(spec: &SweepSpec, result: &SweepResult, out: &mut W) -> io::Result<()> {
    let spec_json = serde_json::to_string(spec).expect("spec serializes");
    writeln!(out, "# params: {spec_json}")?;
    writeln!(out, "axis,value,m_ss,gamma_c,status")?;
    let mut line = String::new();
    for row in &result.rows {
        line.clear();
        line.push_str(spec.axis.name());
        line.push(',');
        push_float(&mut line, row.value);
        line.push(',');
        push_float(&mut line, row.m_ss);
        line.push(',');
        push_float(&mut line, row.gamma_c);
        line.push(',');
        line.push_str(&row.status.to_string());
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Recover the spec from the `# params:` comment line of a sweep CSV.
pub fn parse_csv_comment(line: &str) -> Result<SweepSpec> {
    let json = line
        .strip_prefix("# params: ")
        .ok_or_else(|| Error::InvalidParams("missing '# params:' comment".into()))?;
    serde_json::from_str(json).map_err(|e| Error::InvalidParams(format!("spec comment: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(nu: f64, omega: f64, kappa: f64) -> SystemParams {
        SystemParams {
            nu,
            delta: 1.0,
            omega,
            kappa,
            gamma_atom: 1.0,
            eta: 0.02,
            g: 1.0,
        }
    }

    fn delta_sweep(start: f64, stop: f64, step: f64, p: SystemParams) -> SweepSpec {
        SweepSpec {
            axis: SweepAxis::Delta,
            grid: Grid::Range { start, stop, step },
            base: p,
            law: LawBackend::Closed,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::Range { start: 0.0, stop: 1.0, step: -0.1 }.values().is_err());
        assert!(Grid::Explicit(vec![1.0]).values().is_err());
        assert!(Grid::Explicit(vec![1.0, 0.5]).values().is_err());
        let v = Grid::Range { start: 0.0, stop: 1.0, step: 0.25 }.values().unwrap();
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn find_minima_parabola() {
        let f = |x: f64| (x - 0.7321) * (x - 0.7321) + 0.25;
        let rows: Vec<SweepRow> = (0..41)
            .map(|i| {
                let x = -1.0 + 0.1 * i as f64;
                SweepRow { value: x, m_ss: f(x), gamma_c: 1.0, status: RowStatus::Cooling }
            })
            .collect();
        let minima = find_minima(&rows, f);
        assert_eq!(minima.len(), 1);
        assert!((minima[0].location - 0.7321).abs() < 1e-4);
    }

    #[test]
    fn find_minima_monotone_is_empty() {
        let rows: Vec<SweepRow> = (0..20)
            .map(|i| SweepRow {
                value: i as f64,
                m_ss: 1.0 + i as f64,
                gamma_c: 1.0,
                status: RowStatus::Cooling,
            })
            .collect();
        assert!(find_minima(&rows, |x| 1.0 + x).is_empty());
    }

    #[test]
    fn find_minima_plateau_takes_leftmost() {
        let vals = [5.0, 3.0, 1.0, 1.0, 1.0, 2.0, 4.0];
        let rows: Vec<SweepRow> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| SweepRow {
                value: i as f64,
                m_ss: v,
                gamma_c: 1.0,
                status: RowStatus::Cooling,
            })
            .collect();
        let minima = find_minima(&rows, |_| 1.0);
        assert_eq!(minima.len(), 1);
        assert_eq!(minima[0].location, 2.0);
    }

    #[test]
    fn weak_drive_sweep_has_single_dip_near_nu() {
        // at vanishing drive the triplet collapses: one cooling dip at
        // delta ~= nu, extreme heating around delta = -nu
        let spec = delta_sweep(-5.0, 5.0, 0.01, base(1.0, 1e-3, 1.0));
        let result = sweep(&spec).unwrap();
        assert_eq!(result.minima.len(), 1);
        assert!((result.minima[0].location - 1.0).abs() < 1.0);
        let near_heating = result
            .rows
            .iter()
            .find(|r| (r.value + 1.0).abs() < 5e-3)
            .unwrap();
        assert_eq!(near_heating.status, RowStatus::Heating);
    }

    #[test]
    fn mollow_triplet_at_strong_drive() {
        let spec = delta_sweep(-15.0, 15.0, 0.01, base(1.0, 10.0, 1.0));
        let result = sweep(&spec).unwrap();
        assert_eq!(result.minima.len(), 3);
        let locs: Vec<f64> = result.minima.iter().map(|m| m.location).collect();
        for expected in [1.0, 11.0, -9.0] {
            assert!(
                locs.iter().any(|l| (l - expected).abs() <= 1.0),
                "no minimum within 1.0 of {expected}: {locs:?}"
            );
        }
    }

    #[test]
    fn nu_sweep_is_decreasing_on_the_sideband() {
        // delta locked to delta_0 = nu point-by-point
        let mut prev = f64::INFINITY;
        for nu in [1.0, 2.0, 5.0, 10.0] {
            let p = SystemParams { nu, delta: nu, omega: 3.0, ..base(1.0, 3.0, 1.0) };
            let m = cooling_law_closed(&p).m_ss.unwrap();
            assert!(m < prev, "m_ss must decrease with nu");
            prev = m;
        }
    }

    #[test]
    fn gamma_c_sweep_is_antisymmetric() {
        let spec = delta_sweep(-4.0, 4.0, 0.5, base(1.0, 3.0, 1.0));
        let result = sweep(&spec).unwrap();
        let n = result.rows.len();
        for i in 0..n {
            let a = result.rows[i].gamma_c;
            let b = result.rows[n - 1 - i].gamma_c;
            assert_eq!(a, -b, "gamma_c not antisymmetric at i={i}");
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = delta_sweep(-3.0, 3.0, 0.05, base(1.0, 5.0, 1.0));
        let r1 = sweep(&spec).unwrap();
        let r2 = sweep(&spec).unwrap();
        let mut csv1 = Vec::new();
        let mut csv2 = Vec::new();
        write_csv(&spec, &r1, &mut csv1).unwrap();
        write_csv(&spec, &r2, &mut csv2).unwrap();
        assert_eq!(csv1, csv2);
    }

    #[test]
    fn csv_roundtrip_through_comment() {
        let spec = delta_sweep(-2.0, 2.0, 0.5, base(1.0, 4.0, 1.0));
        let result = sweep(&spec).unwrap();
        let mut buf = Vec::new();
        write_csv(&spec, &result, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let recovered = parse_csv_comment(text.lines().next().unwrap()).unwrap();
        assert_eq!(recovered, spec);
        let mut buf2 = Vec::new();
        write_csv(&recovered, &sweep(&recovered).unwrap(), &mut buf2).unwrap();
        assert_eq!(buf, buf2);
        // headers and nan spelling
        let mut lines = text.lines();
        lines.next();
        assert_eq!(lines.next().unwrap(), "axis,value,m_ss,gamma_c,status");
        assert!(text.contains(",nan,"));
    }

    #[test]
    fn compare_resonances_crossover_in_omega() {
        let get = |omega: f64| {
            let p = SystemParams { omega, ..base(1.0, omega, 1.0) };
            compare_resonances(&p).unwrap()
        };
        let weak = get(4.0);
        assert_eq!(weak.best(), Some("delta_+"));
        let strong = get(30.0);
        assert_eq!(strong.best(), Some("delta_0"));
    }

    #[test]
    fn compare_resonances_large_kappa_prefers_delta_plus() {
        let p = SystemParams { kappa: 10.0, omega: 3.0, ..base(1.0, 3.0, 10.0) };
        let cmp = compare_resonances(&p).unwrap();
        assert_eq!(cmp.best(), Some("delta_+"));
    }

    #[test]
    fn delta_minus_is_never_best_on_figure_parameter_sets() {
        // the figure-family parameter grids: Omega and kappa scans
        for omega in [2.0, 3.0, 4.0, 10.0, 30.0] {
            for kappa in [1.0, 3.0, 10.0] {
                let p = SystemParams { omega, kappa, ..base(1.0, omega, kappa) };
                let cmp = compare_resonances(&p).unwrap();
                assert_ne!(cmp.best(), Some("delta_-"), "Omega={omega} kappa={kappa}");
            }
        }
    }
}
