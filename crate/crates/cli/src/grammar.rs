//! Parsers for the compact argument forms: chirps, grids, ranks and theta rules.

use std::str::FromStr;

use pdmd_core::pdmd::{OrderPolicy, RankPolicy};
use pdmd_core::ArcsinRule;

fn num(field: &str, raw: &str) -> Result<f64, String> {
    raw.trim().parse::<f64>().map_err(|_| format!("{field}: cannot parse {raw:?} as a number"))
}

fn fields<'a, const N: usize>(s: &'a str, form: &str) -> Result<[&'a str; N], String> {
    let parts: Vec<&str> = s.split(':').collect();
    parts.try_into().map_err(|_| format!("expected {form}, got {s:?}"))
}

/// `f0:f1:duration:dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChirpSpec {
    pub f0: f64,
    pub f1: f64,
    pub duration: f64,
    pub dt: f64,
}

impl FromStr for ChirpSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let [f0, f1, d, dt] = fields::<4>(s, "F0:F1:DURATION:DT")?;
        Ok(Self { f0: num("f0", f0)?, f1: num("f1", f1)?, duration: num("duration", d)?, dt: num("dt", dt)? })
    }
}

/// `auto`, `auto:FRACTION` or a fixed order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderSpec(pub OrderPolicy);

impl FromStr for OrderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self(OrderPolicy::Energy(0.95)));
        }
        if let Some(f) = s.strip_prefix("auto:") {
            let f = num("energy fraction", f)?;
            if !(f > 0.0 && f <= 1.0) {
                return Err(format!("energy fraction must lie in (0, 1], got {f}"));
            }
            return Ok(Self(OrderPolicy::Energy(f)));
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Self(OrderPolicy::Fixed(n))),
            _ => Err(format!("expected `auto`, `auto:FRACTION` or a positive order, got {s:?}")),
        }
    }
}

/// `auto`, `energy:F`, `tol:T` or a fixed rank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSpec(pub RankPolicy);

impl FromStr for RankSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self(RankPolicy::default()));
        }
        if let Some(f) = s.strip_prefix("energy:") {
            return Ok(Self(RankPolicy::Energy(num("energy fraction", f)?)));
        }
        if let Some(t) = s.strip_prefix("tol:") {
            return Ok(Self(RankPolicy::Tolerance(num("tolerance", t)?)));
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Self(RankPolicy::Explicit(n))),
            _ => Err(format!("expected `auto`, `energy:F`, `tol:T` or a positive rank, got {s:?}")),
        }
    }
}

/// `start:stop:step` (inclusive) or `log:lo:hi:n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(rest) = s.strip_prefix("log:") {
            let [lo, hi, n] = fields::<3>(rest, "log:LO:HI:N")?;
            let (lo, hi) = (num("lo", lo)?, num("hi", hi)?);
            let n: usize = n.parse().map_err(|_| format!("n: cannot parse {n:?} as a count"))?;
            if !(lo > 0.0 && hi > lo) || n < 2 {
                return Err(format!("log grid needs 0 < lo < hi and n >= 2, got {s:?}"));
            }
            let (a, b) = (lo.ln(), hi.ln());
            let mut v: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
            // Pin the ends exactly; exp(ln(x)) can miss by an ulp.
            v[0] = lo;
            v[n - 1] = hi;
            return Ok(Self(v));
        }
        let [a, b, step] = fields::<3>(s, "START:STOP:STEP or log:LO:HI:N")?;
        let (a, b, step) = (num("start", a)?, num("stop", b)?, num("step", step)?);
        if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
            return Err(format!("grid needs start <= stop and a positive step, got {s:?}"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize + 1;
        if n > 10_000_000 {
            return Err(format!("grid {s:?} has too many points"));
        }
        Ok(Self((0..n).map(|i| a + step * i as f64).collect()))
    }
}

/// `LO:HI`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let [lo, hi] = fields::<2>(s, "LO:HI")?;
        let (lo, hi) = (num("lo", lo)?, num("hi", hi)?);
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(format!("range needs finite lo <= hi, got {s:?}"));
        }
        Ok(Self { lo, hi })
    }
}

/// Which state a theta rule reads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RuleTarget {
    /// Velocity of a chain node (1-based); states are laid out `[q; v]`.
    Node(usize),
    LastNode,
    /// 1-based state index.
    State(usize),
}

/// `arcsin:node=K|last:V0=SPEED` or `arcsin:state=K:V0=SPEED`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaRuleSpec {
    pub target: RuleTarget,
    pub reference_speed: f64,
}

impl FromStr for ThetaRuleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let form = "arcsin:node=K|last:V0=SPEED or arcsin:state=K:V0=SPEED";
        let [kind, target, speed] = fields::<3>(s, form)?;
        if kind != "arcsin" {
            return Err(format!("unknown theta rule {kind:?}; only `arcsin` is supported"));
        }
        let index = |v: &str| match v.parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(format!("expected a 1-based index, got {v:?}")),
        };
        let target = match target.split_once('=') {
            Some(("node", "last")) => RuleTarget::LastNode,
            Some(("node", k)) => RuleTarget::Node(index(k)?),
            Some(("state", k)) => RuleTarget::State(index(k)?),
            _ => return Err(format!("expected node=K, node=last or state=K, got {target:?}")),
        };
        let speed = match speed.split_once('=') {
            Some(("V0", v)) => num("V0", v)?,
            _ => return Err(format!("expected V0=SPEED, got {speed:?}")),
        };
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(format!("V0 must be positive, got {speed}"));
        }
        Ok(Self { target, reference_speed: speed })
    }
}

impl ThetaRuleSpec {
    /// Resolves the target against a full state of dimension `n_x`.
    pub fn resolve(&self, n_x: usize) -> Result<ArcsinRule<f64>, String> {
        let nodes = n_x / 2;
        let index = match self.target {
            RuleTarget::State(k) if k <= n_x => k - 1,
            RuleTarget::State(k) => return Err(format!("theta rule reads state {k} of only {n_x}")),
            _ if n_x % 2 != 0 => return Err(format!("node rules need a [q; v] state of even dimension, got {n_x}")),
            RuleTarget::LastNode => n_x - 1,
            RuleTarget::Node(k) if k <= nodes => nodes + k - 1,
            RuleTarget::Node(k) => return Err(format!("theta rule reads node {k} of only {nodes}")),
        };
        Ok(ArcsinRule { state_index: index, reference_speed: self.reference_speed })
    }
}

/// Comma-separated state values.
#[derive(Clone, Debug, PartialEq)]
pub struct Values(pub Vec<f64>);

impl FromStr for Values {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = s.split(',').map(|x| num("value", x)).collect::<Result<Vec<_>, _>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err("values must be finite".into());
        }
        Ok(Self(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chirp() {
        let c: ChirpSpec = "0.1:10:10:0.001".parse().unwrap();
        assert_eq!(c, ChirpSpec { f0: 0.1, f1: 10.0, duration: 10.0, dt: 0.001 });
        assert!("0.1:10:10".parse::<ChirpSpec>().is_err());
        assert!("a:10:10:0.1".parse::<ChirpSpec>().is_err());
    }

    #[test]
    fn orders_and_ranks() {
        assert_eq!("auto:0.95".parse::<OrderSpec>().unwrap().0, OrderPolicy::Energy(0.95));
        assert_eq!("auto".parse::<OrderSpec>().unwrap().0, OrderPolicy::Energy(0.95));
        assert_eq!("12".parse::<OrderSpec>().unwrap().0, OrderPolicy::Fixed(12));
        assert!("0".parse::<OrderSpec>().is_err());
        assert!("auto:1.5".parse::<OrderSpec>().is_err());
        assert_eq!("7".parse::<RankSpec>().unwrap().0, RankPolicy::Explicit(7));
        assert_eq!("tol:1e-8".parse::<RankSpec>().unwrap().0, RankPolicy::Tolerance(1e-8));
        assert_eq!("energy:0.9".parse::<RankSpec>().unwrap().0, RankPolicy::Energy(0.9));
        assert_eq!("auto".parse::<RankSpec>().unwrap().0, RankPolicy::default());
        assert!("fast".parse::<RankSpec>().is_err());
    }

    #[test]
    fn linear_grid_includes_endpoint() {
        let g: Grid = "-1:1:0.05".parse().unwrap();
        assert_eq!(g.0.len(), 41);
        assert_eq!(g.0[0], -1.0);
        assert!((g.0[40] - 1.0).abs() < 1e-12);
        assert_eq!("0:1:0.3".parse::<Grid>().unwrap().0.len(), 4);
        assert_eq!("2:2:1".parse::<Grid>().unwrap().0, vec![2.0]);
        assert!("1:0:0.1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
    }

    #[test]
    fn log_grid() {
        let g: Grid = "log:0.1:40:100".parse().unwrap();
        assert_eq!(g.0.len(), 100);
        assert_eq!((g.0[0], g.0[99]), (0.1, 40.0));
        assert!(g.0.windows(2).all(|w| w[1] > w[0]));
        let ratio = g.0[1] / g.0[0];
        assert!((g.0[51] / g.0[50] - ratio).abs() < 1e-12);
        assert!("log:0:1:10".parse::<Grid>().is_err());
        assert!("log:1:10:1".parse::<Grid>().is_err());
    }

    #[test]
    fn theta_rules() {
        let r: ThetaRuleSpec = "arcsin:node=last:V0=22".parse().unwrap();
        assert_eq!(r.target, RuleTarget::LastNode);
        assert_eq!(r.resolve(20).unwrap().state_index, 19);
        let r: ThetaRuleSpec = "arcsin:node=1:V0=2".parse().unwrap();
        assert_eq!(r.resolve(20).unwrap().state_index, 10);
        assert!(r.resolve(7).is_err());
        let r: ThetaRuleSpec = "arcsin:state=3:V0=1".parse().unwrap();
        assert_eq!(r.resolve(7).unwrap().state_index, 2);
        assert!(r.resolve(2).is_err());
        assert!("arcsin:node=0:V0=1".parse::<ThetaRuleSpec>().is_err());
        assert!("arcsin:node=1:V0=-1".parse::<ThetaRuleSpec>().is_err());
        assert!("atan:node=1:V0=1".parse::<ThetaRuleSpec>().is_err());
    }

    #[test]
    fn ranges_and_values() {
        assert_eq!("-1:1".parse::<Range>().unwrap(), Range { lo: -1.0, hi: 1.0 });
        assert!("1:-1".parse::<Range>().is_err());
        assert_eq!("1,-2.5,0".parse::<Values>().unwrap().0, vec![1.0, -2.5, 0.0]);
        assert!("1,,2".parse::<Values>().is_err());
    }
}
