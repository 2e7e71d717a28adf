//! Synthesizer families and affine atoms `ψ_{j,k}(x) = a^{j/p} ψ(a^j x - bk)`.

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::numerics::quad::{clean_breakpoints, integrate_pieces};
use crate::numerics::{check_exponent, Grid, LatticeConfig, Signal};

/// Mexican hat is cut off at `|x| = MEXICAN_HAT_CUTOFF`.
pub const MEXICAN_HAT_CUTOFF: f64 = 12.0;

const MAX_BSPLINE_ORDER: u32 = 10;
const QUAD_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `1_{[lo, hi)}`
    Indicator { lo: f64, hi: f64 },
    /// Cardinal B-spline of the given order, supported on `[0, order)`.
    BSpline { order: u32 },
    Haar,
    /// `η - η(· - 1)`
    StepDifference { eta: Box<SynthesizerSpec> },
    /// `η(· + 1) - 2η + η(· - 1)`
    SecondDifference { eta: Box<SynthesizerSpec> },
    /// `x^{-β}` on `(0, 1)`, zero elsewhere.
    PowerSingular { beta: f64 },
    /// `(1 - x²) e^{-x²/2}`, truncated.
    MexicanHat,
    /// Step function read off a sampled signal.
    Table { signal: Signal },
    /// `Σ w_i ψ_i`
    Combination { terms: Vec<(f64, SynthesizerSpec)> },
}

/// A synthesizer `ψ(x) = scale · base(x - shift)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthesizerSpec {
    family: Family,
    scale: Complex64,
    shift: f64,
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl SynthesizerSpec {
    fn plain(family: Family) -> Self {
        SynthesizerSpec { family, scale: one(), shift: 0.0 }
    }

    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter(format!("indicator needs lo < hi (got {lo}, {hi})")));
        }
        Ok(Self::plain(Family::Indicator { lo, hi }))
    }

    /// `b^{-1} 1_{[0, b)}`, the default analyzer.
    pub fn normalized_indicator(b: f64) -> Result<Self> {
        Ok(Self::indicator(0.0, b)?.with_scale(Complex64::new(1.0 / b, 0.0)))
    }

    pub fn haar() -> Self {
        Self::plain(Family::Haar)
    }

    pub fn bspline(order: u32) -> Result<Self> {
        if order == 0 || order > MAX_BSPLINE_ORDER {
            return Err(Error::InvalidParameter(format!(
                "B-spline order must be in 1..={MAX_BSPLINE_ORDER} (got {order})"
            )));
        }
        Ok(Self::plain(Family::BSpline { order }))
    }

    pub fn step_difference(eta: SynthesizerSpec) -> Self {
        Self::plain(Family::StepDifference { eta: Box::new(eta) })
    }

    pub fn second_difference(eta: SynthesizerSpec) -> Self {
        Self::plain(Family::SecondDifference { eta: Box::new(eta) })
    }

    pub fn power_singular(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("power exponent must be positive (got {beta})")));
        }
        Ok(Self::plain(Family::PowerSingular { beta }))
    }

    pub fn mexican_hat() -> Self {
        Self::plain(Family::MexicanHat)
    }

    pub fn table(signal: Signal) -> Self {
        Self::plain(Family::Table { signal })
    }

    pub fn combination(terms: Vec<(f64, SynthesizerSpec)>) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|(w, _)| !w.is_finite()) {
            return Err(Error::InvalidParameter("combination needs finite weights and at least one term".into()));
        }
        Ok(Self::plain(Family::Combination { terms }))
    }

    pub fn with_scale(mut self, scale: Complex64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// `c · ψ`
    pub fn times(&self, c: Complex64) -> Self {
        let mut s = self.clone();
        s.scale *= c;
        s
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn scale(&self) -> Complex64 {
        self.scale
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Indicator { .. } => "indicator",
            Family::BSpline { .. } => "bspline",
            Family::Haar => "haar",
            Family::StepDifference { .. } => "step_difference",
            Family::SecondDifference { .. } => "second_difference",
            Family::PowerSingular { .. } => "power_singular",
            Family::MexicanHat => "mexican_hat",
            Family::Table { .. } => "table",
            Family::Combination { .. } => "combination",
        }
    }

    /// Checks `ψ ∈ L^p`.
    pub fn validate(&self, p: f64) -> Result<()> {
        check_exponent(p)?;
        match &self.family {
            Family::PowerSingular { beta } if beta * p >= 1.0 => Err(Error::Domain(format!(
                "x^-{beta} is not in L^{p}: need beta < 1/p = {}",
                1.0 / p
            ))),
            Family::StepDifference { eta } | Family::SecondDifference { eta } => eta.validate(p),
            Family::Combination { terms } => terms.iter().try_for_each(|(_, t)| t.validate(p)),
            _ => Ok(()),
        }
    }

    fn base_eval(&self, x: f64) -> Complex64 {
        match &self.family {
            Family::Indicator { lo, hi } => {
                if x >= *lo && x < *hi {
                    one()
                } else {
                    zero()
                }
            }
            Family::BSpline { order } => Complex64::new(bspline(*order, x), 0.0),
            Family::Haar => {
                if (0.0..0.5).contains(&x) {
                    one()
                } else if (0.5..1.0).contains(&x) {
                    -one()
                } else {
                    zero()
                }
            }
            Family::StepDifference { eta } => eta.eval(x) - eta.eval(x - 1.0),
            Family::SecondDifference { eta } => eta.eval(x + 1.0) - eta.eval(x) * 2.0 + eta.eval(x - 1.0),
            Family::PowerSingular { beta } => {
                if x > 0.0 && x < 1.0 {
                    Complex64::new(x.powf(-beta), 0.0)
                } else {
                    zero()
                }
            }
            Family::MexicanHat => {
                if x.abs() <= MEXICAN_HAT_CUTOFF {
                    Complex64::new((1.0 - x * x) * (-0.5 * x * x).exp(), 0.0)
                } else {
                    zero()
                }
            }
            Family::Table { signal } => signal.value_at(x),
            Family::Combination { terms } => terms.iter().map(|(w, t)| t.eval(x) * *w).sum(),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.base_eval(x - self.shift) * self.scale
    }

    fn base_support(&self) -> (f64, f64) {
        match &self.family {
            Family::Indicator { lo, hi } => (*lo, *hi),
            Family::BSpline { order } => (0.0, *order as f64),
            Family::Haar | Family::PowerSingular { .. } => (0.0, 1.0),
            Family::StepDifference { eta } => {
                let (lo, hi) = eta.support();
                (lo, hi + 1.0)
            }
            Family::SecondDifference { eta } => {
                let (lo, hi) = eta.support();
                (lo - 1.0, hi + 1.0)
            }
            Family::MexicanHat => (-MEXICAN_HAT_CUTOFF, MEXICAN_HAT_CUTOFF),
            Family::Table { signal } => (signal.grid().x0(), signal.grid().end()),
            Family::Combination { terms } => terms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, (_, t)| {
                let (lo, hi) = t.support();
                (acc.0.min(lo), acc.1.max(hi))
            }),
        }
    }

    /// Closed interval outside which `ψ` vanishes.
    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.base_support();
        (lo + self.shift, hi + self.shift)
    }

    /// True when the support is a truncation of a function that decays.
    pub fn is_decaying(&self) -> bool {
        match &self.family {
            Family::MexicanHat => true,
            Family::StepDifference { eta } | Family::SecondDifference { eta } => eta.is_decaying(),
            Family::Combination { terms } => terms.iter().any(|(_, t)| t.is_decaying()),
            _ => false,
        }
    }

    fn base_breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::Indicator { lo, hi } => vec![*lo, *hi],
            Family::BSpline { order } => (0..=*order).map(|i| i as f64).collect(),
            Family::Haar => vec![0.0, 0.5, 1.0],
            Family::StepDifference { eta } => {
                let mut v = eta.breakpoints();
                v.extend(eta.breakpoints().into_iter().map(|x| x + 1.0));
                v
            }
            Family::SecondDifference { eta } => {
                let mut v = Vec::new();
                for d in [-1.0, 0.0, 1.0] {
                    v.extend(eta.breakpoints().into_iter().map(|x| x + d));
                }
                v
            }
            Family::PowerSingular { .. } => vec![0.0, 1.0],
            Family::MexicanHat => vec![-MEXICAN_HAT_CUTOFF, -1.0, 0.0, 1.0, MEXICAN_HAT_CUTOFF],
            Family::Table { signal } => (0..=signal.grid().len()).map(|i| signal.grid().point(i)).collect(),
            Family::Combination { terms } => terms.iter().flat_map(|(_, t)| t.breakpoints()).collect(),
        }
    }

    /// Points where `ψ` or `|ψ|` may fail to be smooth, support ends included.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let pts = self.base_breakpoints().into_iter().map(|x| x + self.shift).collect();
        clean_breakpoints(pts, lo, hi)
    }

    /// Constant between consecutive breakpoints.
    pub fn is_piecewise_constant(&self) -> bool {
        match &self.family {
            Family::Indicator { .. } | Family::Haar | Family::Table { .. } => true,
            Family::BSpline { order } => *order == 1,
            Family::StepDifference { eta } | Family::SecondDifference { eta } => eta.is_piecewise_constant(),
            Family::Combination { terms } => terms.iter().all(|(_, t)| t.is_piecewise_constant()),
            Family::PowerSingular { .. } | Family::MexicanHat => false,
        }
    }

    fn base_is_real(&self) -> bool {
        match &self.family {
            Family::Table { signal } => signal.values().iter().all(|v| v.im == 0.0),
            Family::StepDifference { eta } | Family::SecondDifference { eta } => eta.is_real(),
            Family::Combination { terms } => terms.iter().all(|(_, t)| t.is_real()),
            _ => true,
        }
    }

    pub fn is_real(&self) -> bool {
        self.scale.im == 0.0 && self.base_is_real()
    }

    fn base_is_nonnegative(&self) -> bool {
        match &self.family {
            Family::Indicator { .. } | Family::BSpline { .. } | Family::PowerSingular { .. } => true,
            Family::Table { signal } => signal.values().iter().all(|v| v.im == 0.0 && v.re >= 0.0),
            Family::Combination { terms } => terms.iter().all(|(w, t)| *w >= 0.0 && t.is_nonnegative()),
            _ => false,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.scale.im == 0.0 && self.scale.re >= 0.0 && self.base_is_nonnegative()
    }

    /// `(bounded below, bounded above)` of the base profile.
    fn base_bounds(&self) -> (bool, bool) {
        match &self.family {
            Family::PowerSingular { .. } => (true, false),
            Family::StepDifference { eta } | Family::SecondDifference { eta } => {
                let (lo, hi) = eta.bounds();
                (lo && hi, lo && hi)
            }
            Family::Combination { terms } => terms.iter().fold((true, true), |acc, (w, t)| {
                let (lo, hi) = t.bounds();
                let (lo, hi) = if *w < 0.0 { (hi, lo) } else { (lo, hi) };
                (acc.0 && lo, acc.1 && hi)
            }),
            _ => (true, true),
        }
    }

    /// `(bounded below, bounded above)` for real-valued `ψ`.
    pub fn bounds(&self) -> (bool, bool) {
        let (lo, hi) = self.base_bounds();
        if self.scale.re < 0.0 {
            (hi, lo)
        } else {
            (lo, hi)
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounds() == (true, true)
    }

    /// Largest `q` with `ψ ∈ L^r` for all `r < q` (infinite for bounded profiles).
    pub fn integrability_limit(&self) -> f64 {
        match &self.family {
            Family::PowerSingular { beta } => 1.0 / beta,
            Family::StepDifference { eta } | Family::SecondDifference { eta } => eta.integrability_limit(),
            Family::Combination { terms } => terms
                .iter()
                .filter(|(w, _)| *w != 0.0)
                .map(|(_, t)| t.integrability_limit())
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }

    /// `∫ g(ψ(x)) dx` over the support.
    pub fn integrate<G: Fn(Complex64) -> f64>(&self, g: G) -> f64 {
        if let Family::Table { signal } = &self.family {
            let h = signal.grid().h();
            return signal.values().iter().map(|v| g(v * self.scale)).sum::<f64>() * h;
        }
        integrate_pieces(|x| g(self.eval(x)), &self.breakpoints(), QUAD_TOL)
    }

    /// `∫ψ`, or `None` when `ψ ∉ L^1`.
    pub fn integral(&self) -> Option<Complex64> {
        if self.integrability_limit() <= 1.0 {
            return None;
        }
        let re = self.integrate(|v| v.re);
        let im = self.integrate(|v| v.im);
        Some(Complex64::new(re, im))
    }

    /// `∫|ψ|^p`.
    pub fn lp_power(&self, p: f64) -> Result<f64> {
        self.validate(p)?;
        let (lo, hi) = self.support();
        match self.cell_mass(p, lo, hi) {
            Ok(m) => Ok(m),
            Err(Error::NoAnalyticMass(_)) => Ok(self.integrate(|v| v.norm().powf(p))),
            Err(e) => Err(e),
        }
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(self.lp_power(p)?.powf(1.0 / p))
    }

    /// Closed-form `∫_lo^hi |ψ|^p` for the families that have one.
    pub fn cell_mass(&self, p: f64, lo: f64, hi: f64) -> Result<f64> {
        self.validate(p)?;
        let s = self.scale.norm().powf(p);
        let overlap = |a: f64, b: f64| (hi.min(b) - lo.max(a)).max(0.0);
        let (lo0, hi0) = (lo - self.shift, hi - self.shift);
        match &self.family {
            Family::Indicator { lo: a, hi: b } => Ok(s * (hi0.min(*b) - lo0.max(*a)).max(0.0)),
            Family::Haar => Ok(s * overlap(self.shift, self.shift + 1.0)),
            Family::PowerSingular { beta } => {
                let l = lo0.max(0.0);
                let u = hi0.min(1.0);
                if u <= l {
                    return Ok(0.0);
                }
                let e = 1.0 - beta * p;
                Ok(s * (u.powf(e) - l.powf(e)) / e)
            }
            _ => Err(Error::NoAnalyticMass(self.name().into())),
        }
    }

    /// `period · Σ_k ψ(x - period·k)`.
    pub fn periodized(&self, period: f64, x: f64) -> Complex64 {
        let (lo, hi) = self.support();
        let k0 = ((x - hi) / period).floor() as i64;
        let k1 = ((x - lo) / period).ceil() as i64;
        let mut s = zero();
        for k in k0..=k1 {
            s += self.eval(x - period * k as f64);
        }
        s * period
    }

    /// `period · Σ_k |ψ(x - period·k)|`.
    pub fn periodized_abs(&self, period: f64, x: f64) -> f64 {
        let (lo, hi) = self.support();
        let k0 = ((x - hi) / period).floor() as i64;
        let k1 = ((x - lo) / period).ceil() as i64;
        (k0..=k1).map(|k| self.eval(x - period * k as f64).norm()).sum::<f64>() * period
    }

    pub fn to_json(&self) -> Value {
        let mut params = match &self.family {
            Family::Indicator { lo, hi } => json!({ "lo": lo, "hi": hi }),
            Family::BSpline { order } => json!({ "order": order }),
            Family::Haar | Family::MexicanHat => json!({}),
            Family::StepDifference { eta } | Family::SecondDifference { eta } => json!({ "eta": eta.to_json() }),
            Family::PowerSingular { beta } => json!({ "beta": beta }),
            Family::Table { signal } => json!({
                "x0": signal.grid().x0(),
                "h": signal.grid().h(),
                "values": signal.values().iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
            }),
            Family::Combination { terms } => json!({
                "terms": terms.iter().map(|(w, t)| json!({ "weight": w, "synth": t.to_json() })).collect::<Vec<_>>(),
            }),
        };
        let obj = params.as_object_mut().expect("params are an object");
        if self.scale != one() {
            obj.insert("scale".into(), json!(self.scale.re));
            if self.scale.im != 0.0 {
                obj.insert("scale_im".into(), json!(self.scale.im));
            }
        }
        if self.shift != 0.0 {
            obj.insert("shift".into(), json!(self.shift));
        }
        let support = if self.is_decaying() {
            json!("decay")
        } else {
            let (lo, hi) = self.support();
            json!([lo, hi])
        };
        json!({ "family": self.name(), "params": params, "support": support })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: String| Error::InvalidParameter(m);
        let obj = v.as_object().ok_or_else(|| bad("synthesizer must be a JSON object".into()))?;
        let family = obj
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field `family`".into()))?;
        let empty = Map::new();
        let params = match obj.get("params") {
            None => &empty,
            Some(p) => p.as_object().ok_or_else(|| bad("`params` must be an object".into()))?,
        };
        let num = |key: &str| -> Result<f64> {
            params
                .get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| bad(format!("{family}: missing numeric parameter `{key}`")))
        };
        let eta = || -> Result<SynthesizerSpec> {
            match params.get("eta") {
                Some(e) => SynthesizerSpec::from_json(e),
                None => SynthesizerSpec::indicator(0.0, 1.0),
            }
        };
        let mut spec = match family {
            "indicator" => SynthesizerSpec::indicator(num("lo")?, num("hi")?)?,
            "bspline" => {
                let order = params.get("order").and_then(Value::as_u64).unwrap_or(2);
                SynthesizerSpec::bspline(order as u32)?
            }
            "haar" => SynthesizerSpec::haar(),
            "step_difference" => SynthesizerSpec::step_difference(eta()?),
            "second_difference" => SynthesizerSpec::second_difference(eta()?),
            "power_singular" => SynthesizerSpec::power_singular(num("beta")?)?,
            "mexican_hat" => SynthesizerSpec::mexican_hat(),
            "table" => {
                let values = params
                    .get("values")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("table: missing array `values`".into()))?;
                let vals = values
                    .iter()
                    .map(|e| match e {
                        Value::Number(n) => n.as_f64().map(|re| Complex64::new(re, 0.0)),
                        Value::Array(a) if a.len() == 2 => Some(Complex64::new(a[0].as_f64()?, a[1].as_f64()?)),
                        _ => None,
                    })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad("table: values must be numbers or [re, im] pairs".into()))?;
                let grid = Grid::new(num("x0")?, num("h")?, vals.len())?;
                SynthesizerSpec::table(Signal::new(grid, vals)?)
            }
            "combination" => {
                let terms = params
                    .get("terms")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("combination: missing array `terms`".into()))?;
                let terms = terms
                    .iter()
                    .map(|t| {
                        let w = t
                            .get("weight")
                            .and_then(Value::as_f64)
                            .ok_or_else(|| bad("combination term needs `weight`".into()))?;
                        let s = t.get("synth").ok_or_else(|| bad("combination term needs `synth`".into()))?;
                        Ok((w, SynthesizerSpec::from_json(s)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                SynthesizerSpec::combination(terms)?
            }
            other => return Err(Error::UnsupportedSynthesizer(format!("unknown family `{other}`"))),
        };
        let re = params.get("scale").and_then(Value::as_f64).unwrap_or(1.0);
        let im = params.get("scale_im").and_then(Value::as_f64).unwrap_or(0.0);
        spec.scale = Complex64::new(re, im);
        spec.shift = params.get("shift").and_then(Value::as_f64).unwrap_or(0.0);

        match obj.get("support") {
            None => {}
            Some(Value::String(s)) if s == "decay" => {
                if !spec.is_decaying() {
                    return Err(bad(format!("{family} has compact support, not `decay`")));
                }
            }
            Some(Value::Array(a)) if a.len() == 2 => {
                let (lo, hi) = spec.support();
                let given = (a[0].as_f64(), a[1].as_f64());
                let ok = matches!(given, (Some(g0), Some(g1)) if (g0 - lo).abs() < 1e-9 && (g1 - hi).abs() < 1e-9);
                if !ok {
                    return Err(bad(format!("declared support {a:?} disagrees with [{lo}, {hi}]")));
                }
            }
            Some(other) => return Err(bad(format!("bad `support` field: {other}"))),
        }
        Ok(spec)
    }
}

/// Cardinal B-spline `N_m` on `[0, m)`.
fn bspline(m: u32, x: f64) -> f64 {
    if !(x >= 0.0 && x < m as f64) {
        return 0.0;
    }
    if m == 1 {
        return 1.0;
    }
    // Cox-de Boor on the integer knots around x.
    let l = x.floor() as usize;
    let mut n = vec![0.0; m as usize + 1];
    n[l] = 1.0;
    for k in 2..=m as usize {
        for i in 0..=m as usize - k {
            let left = (x - i as f64) * n[i];
            let right = (i as f64 + k as f64 - x) * n[i + 1];
            n[i] = (left + right) / (k as f64 - 1.0);
        }
    }
    n[0]
}

/// `a^{j/p} ψ(a^j x - bk)`.
pub fn atom_eval(psi: &SynthesizerSpec, cfg: &LatticeConfig, j: u32, k: i64, x: f64) -> Complex64 {
    let aj = cfg.a().powi(j as i32);
    psi.eval(aj * x - cfg.b() * k as f64) * aj.powf(1.0 / cfg.p())
}

/// Support `a^{-j}(supp ψ + bk)` of an atom.
pub fn atom_support(psi: &SynthesizerSpec, cfg: &LatticeConfig, j: u32, k: i64) -> (f64, f64) {
    let (lo, hi) = psi.support();
    let inv = cfg.a().powi(-(j as i32));
    let t = cfg.b() * k as f64;
    (inv * (lo + t), inv * (hi + t))
}
