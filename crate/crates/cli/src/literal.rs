//! Parsers for measure, field, map and range literals on the command line.

use std::fs;

use circle_ot::dynamics::ExpandingMapSpec;
use circle_ot::experiments::{cantor_pieces, sawtooth};
use circle_ot::fourier::FourierField;
use circle_ot::measures::{convex_sum, AffinePiece, CircleMeasure, PiecewiseAffine, TangentField};
use circle_ot::numeric::decades;

/// `d=2,eps=0.3`; either key may be omitted (`d` defaults to 2, `eps` to 0).
pub fn parse_map(s: &str) -> Result<ExpandingMapSpec, String> {
    let (mut d, mut eps) = (2usize, 0.0f64);
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value in map spec, got {part:?}"))?;
        match k.trim() {
            "d" | "degree" => d = v.trim().parse().map_err(|_| format!("bad degree {v:?}"))?,
            "eps" | "epsilon" => eps = v.trim().parse().map_err(|_| format!("bad epsilon {v:?}"))?,
            other => return Err(format!("unknown map key {other:?}")),
        }
    }
    ExpandingMapSpec::new(d, eps).map_err(|e| e.to_string())
}

/// `uniform`, `dirac:<x>`, `mix:<w1>*<m1>+...` or `file:<path>` (JSON).
pub fn parse_measure(s: &str) -> Result<CircleMeasure, String> {
    let s = s.trim();
    if s == "uniform" {
        return Ok(CircleMeasure::lebesgue());
    }
    if let Some(x) = s.strip_prefix("dirac:") {
        let x: f64 = x.parse().map_err(|_| format!("bad dirac position {x:?}"))?;
        if !(0.0..1.0).contains(&x) {
            return Err(format!("dirac position {x} outside [0, 1)"));
        }
        return Ok(CircleMeasure::dirac(x));
    }
    if let Some(body) = s.strip_prefix("mix:") {
        let terms = body
            .split('+')
            .map(|t| {
                let (w, m) = t.split_once('*').ok_or_else(|| format!("mix term {t:?} needs <weight>*<measure>"))?;
                let w: f64 = w.trim().parse().map_err(|_| format!("bad weight {w:?}"))?;
                Ok((w, parse_measure(m)?))
            })
            .collect::<Result<Vec<_>, String>>()?;
        return convex_sum(&terms).map_err(|e| e.to_string());
    }
    if let Some(path) = s.strip_prefix("file:") {
        let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
        return serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"));
    }
    Err(format!("unknown measure literal {s:?}"))
}

/// A field description, sampled on demand.
#[derive(Debug, Clone)]
pub enum FieldSpec {
    Trig(FourierField),
    Pieces(PiecewiseAffine),
    Samples(Vec<f64>),
}

impl FieldSpec {
    pub fn tangent(&self, grid: usize) -> TangentField {
        match self {
            FieldSpec::Trig(f) => TangentField::from_fourier(f.clone(), grid),
            FieldSpec::Pieces(p) => TangentField::from_pieces(p.clone(), grid),
            FieldSpec::Samples(s) => TangentField::from_samples(s.clone()),
        }
    }
}

fn trig_term(s: &str) -> Result<FourierField, String> {
    let (w, mode) = match s.split_once('*') {
        Some((w, m)) => (w.trim().parse::<f64>().map_err(|_| format!("bad coefficient {w:?}"))?, m.trim()),
        None => (1.0, s.trim()),
    };
    let (kind, k) = mode.split_once(':').ok_or_else(|| format!("expected cos:<k> or sin:<k>, got {mode:?}"))?;
    let k: usize = k.parse().map_err(|_| format!("bad frequency {k:?}"))?;
    if k == 0 {
        return Err("frequency must be positive".into());
    }
    let f = match kind {
        "cos" => FourierField::cos_mode(k),
        "sin" => FourierField::sin_mode(k),
        other => return Err(format!("unknown trig mode {other:?}")),
    };
    Ok(f.scale(w))
}

/// `cos:<k>`, `sin:<k>`, sums like `0.5*cos:1+sin:2`, `saw`, `sawtooth:<k>`,
/// `cantor:<depth>` or `file:<path>` (JSON array of grid samples).
pub fn parse_field(s: &str) -> Result<FieldSpec, String> {
    let s = s.trim();
    if s == "saw" {
        let p = PiecewiseAffine::new(vec![AffinePiece { start: 0.0, end: 1.0, left: 0.5, right: -0.5 }])
            .map_err(|e| e.to_string())?;
        return Ok(FieldSpec::Pieces(p));
    }
    if let Some(k) = s.strip_prefix("sawtooth:") {
        let k = k.parse().map_err(|_| format!("bad sawtooth k {k:?}"))?;
        return sawtooth(k).map(FieldSpec::Pieces).map_err(|e| e.to_string());
    }
    if let Some(depth) = s.strip_prefix("cantor:") {
        let depth = depth.parse().map_err(|_| format!("bad Cantor depth {depth:?}"))?;
        return cantor_pieces(depth).map(FieldSpec::Pieces).map_err(|e| e.to_string());
    }
    if let Some(path) = s.strip_prefix("file:") {
        let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
        let samples: Vec<f64> = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
        if samples.len() < 2 {
            return Err(format!("{path}: need at least 2 samples"));
        }
        return Ok(FieldSpec::Samples(samples));
    }
    let mut total = FourierField::zeros(0);
    for term in s.split('+') {
        total = total.add(&trig_term(term)?);
    }
    Ok(FieldSpec::Trig(total))
}

/// `1e-1:1e-4` (one value per decade) or a comma list.
pub fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?}"));
    let out = match s.split_once(':') {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if !(a > 0.0 && b > 0.0) {
                return Err(format!("range {s:?} must be positive"));
            }
            decades(a, b)
        }
        None => s.split(',').map(num).collect::<Result<_, _>>()?,
    };
    if out.is_empty() {
        return Err("empty range".into());
    }
    Ok(out)
}

/// Comma-separated weights.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?}"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps() {
        let m = parse_map("d=3,eps=0.5").unwrap();
        assert_eq!((m.degree(), m.epsilon()), (3, 0.5));
        assert!(parse_map("d=2,eps=0").unwrap().is_model());
        assert!(parse_map("d=2,foo=1").is_err());
        assert!(parse_map("d=1").is_err());
    }

    #[test]
    fn measures() {
        assert_eq!(parse_measure("uniform").unwrap(), CircleMeasure::lebesgue());
        assert_eq!(parse_measure("dirac:0.25").unwrap(), CircleMeasure::dirac(0.25));
        let m = parse_measure("mix:0.5*uniform+0.5*dirac:0.1").unwrap();
        assert!((m.atomic.mass() - 0.5).abs() < 1e-15);
        assert!(parse_measure("mix:0.5*uniform").is_err());
        assert!(parse_measure("dirac:1.5").is_err());
        assert!(parse_measure("gauss").is_err());
    }

    #[test]
    fn fields() {
        let FieldSpec::Trig(f) = parse_field("0.5*cos:1+sin:2").unwrap() else { panic!() };
        assert_eq!(f.coefficient(1), (0.5, 0.0));
        assert_eq!(f.coefficient(2), (0.0, 1.0));
        assert!(matches!(parse_field("saw").unwrap(), FieldSpec::Pieces(_)));
        assert!(matches!(parse_field("sawtooth:4").unwrap(), FieldSpec::Pieces(_)));
        assert!(parse_field("cos:0").is_err());
        assert!(parse_field("tan:1").is_err());
    }

    #[test]
    fn ranges() {
        let r = parse_range("1e-1:1e-4").unwrap();
        assert_eq!(r.len(), 4);
        assert!((r[3] - 1e-4).abs() < 1e-18);
        assert_eq!(parse_range("0.1,0.05").unwrap(), vec![0.1, 0.05]);
        assert!(parse_range("0:1e-3").is_err());
    }
}
