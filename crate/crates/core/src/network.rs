//! Power networks in the bus injection model: buses with injection and
//! voltage bounds, directed lines with series impedance, optional taps and
//! line charging, and generation cost data.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chordal::Graph;

pub type Complex = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("malformed case data: {0}")]
    Malformed(String),
    #[error("islanded network: bus {0} is unreachable from the slack bus")]
    Islanded(usize),
    #[error("multiple slack buses ({0} and {1})")]
    MultipleSlack(usize, usize),
    #[error("no slack bus")]
    NoSlack,
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("unsupported cost data: {0}")]
    UnsupportedCost(String),
}

/// How the bus shunt term enters the injection `s_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuntConvention {
    /// `|V_j|² y_jjᴴ`, consistent with `s = V Iᴴ`.
    #[default]
    Conjugated,
    /// `|V_j|² y_jj`.
    AsDisplayed,
}

/// Serializes complex bounds with `"inf"`/`"-inf"` strings for unbounded parts.
mod bound_serde {
    use super::Complex;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }

    fn enc(x: f64) -> Num {
        if x.is_finite() {
            Num::F(x)
        } else if x > 0.0 {
            Num::S("inf".into())
        } else {
            Num::S("-inf".into())
        }
    }

    fn dec<E: Error>(n: Num) -> Result<f64, E> {
        match n {
            Num::F(x) => Ok(x),
            Num::S(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(E::custom(format!("bad bound {s:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(c: &Complex, s: S) -> Result<S::Ok, S::Error> {
        [enc(c.re), enc(c.im)].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex, D::Error> {
        let [re, im] = <[Num; 2]>::deserialize(d)?;
        Ok(Complex::new(dec(re)?, dec(im)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// Bus number in the source data.
    pub label: usize,
    /// Lower bound on the net injection `s_j` (per unit).
    #[serde(with = "bound_serde")]
    pub s_min: Complex,
    #[serde(with = "bound_serde")]
    pub s_max: Complex,
    /// Voltage magnitude bounds.
    pub v_min: f64,
    pub v_max: f64,
    pub y_shunt: Complex,
}

impl Bus {
    /// A bus with unbounded injection, the given voltage band and no shunt.
    pub fn free(label: usize, v_min: f64, v_max: f64) -> Self {
        let inf = f64::INFINITY;
        Bus {
            label,
            s_min: Complex::new(-inf, -inf),
            s_max: Complex::new(inf, inf),
            v_min,
            v_max,
            y_shunt: Complex::new(0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series impedance.
    pub z: Complex,
    /// Series admittance `1/z`.
    pub y: Complex,
    /// Off-nominal tap ratio on the from side.
    pub tap: Complex,
    /// Total line-charging susceptance.
    pub b_charge: f64,
}

impl Line {
    pub fn new(from: usize, to: usize, z: Complex) -> Self {
        Line {
            from,
            to,
            z,
            y: z.inv(),
            tap: Complex::new(1.0, 0.0),
            b_charge: 0.0,
        }
    }

    pub fn from_admittance(from: usize, to: usize, y: Complex) -> Self {
        Line {
            from,
            to,
            z: y.inv(),
            y,
            tap: Complex::new(1.0, 0.0),
            b_charge: 0.0,
        }
    }

    pub fn with_tap(mut self, tap: Complex) -> Self {
        self.tap = tap;
        self
    }

    pub fn with_charging(mut self, b: f64) -> Self {
        self.b_charge = b;
        self
    }

    pub fn has_tap(&self) -> bool {
        self.tap != Complex::new(1.0, 0.0)
    }

    /// Two-port admittances `(y_ff, y_ft, y_tf, y_tt)` of the standard
    /// π model with an ideal transformer on the from side.
    pub fn two_port(&self) -> [Complex; 4] {
        let t = self.tap;
        let ys = self.y;
        let half = Complex::new(0.0, self.b_charge / 2.0);
        [
            (ys + half) / t.norm_sqr(),
            -ys / t.conj(),
            -ys / t,
            ys + half,
        ]
    }

    /// Sending-end current `y (V_from − V_to)` of a plain line.
    pub fn current(&self, v: &[Complex]) -> Complex {
        self.y * (v[self.from] - v[self.to])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostKind {
    LossMin,
    WeightedGen,
}

/// Objective data. For `WeightedGen` the cost of bus `j` is
/// `quadratic_j g_j² + linear_j g_j + constant_j` with generation
/// `g_j = Re s_j + p_d_j` in per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub kind: CostKind,
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub quadratic: Vec<f64>,
    #[serde(default)]
    pub constant: Vec<f64>,
    #[serde(default)]
    pub p_d: Vec<f64>,
}

impl CostSpec {
    pub fn loss_min() -> Self {
        CostSpec {
            kind: CostKind::LossMin,
            linear: vec![],
            quadratic: vec![],
            constant: vec![],
            p_d: vec![],
        }
    }

    pub fn weighted(linear: Vec<f64>, p_d: Vec<f64>) -> Self {
        let n = linear.len();
        CostSpec {
            kind: CostKind::WeightedGen,
            linear,
            quadratic: vec![0.0; n],
            constant: vec![0.0; n],
            p_d,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), NetworkError> {
        if self.kind == CostKind::LossMin {
            return Ok(());
        }
        for (name, v) in [
            ("linear", &self.linear),
            ("quadratic", &self.quadratic),
            ("constant", &self.constant),
            ("p_d", &self.p_d),
        ] {
            if v.len() != n {
                return Err(NetworkError::UnsupportedCost(format!(
                    "{name} has {} entries for {n} buses",
                    v.len()
                )));
            }
        }
        if self.linear.iter().chain(&self.quadratic).any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(NetworkError::UnsupportedCost("negative or non-finite weight".into()));
        }
        Ok(())
    }

    /// Cost of a given injection vector.
    pub fn evaluate(&self, s: &[Complex]) -> f64 {
        match self.kind {
            CostKind::LossMin => s.iter().map(|x| x.re).sum(),
            CostKind::WeightedGen => s
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let g = x.re + self.p_d[j];
                    self.quadratic[j] * g * g + self.linear[j] * g + self.constant[j]
                })
                .sum(),
        }
    }

    pub fn has_quadratic(&self) -> bool {
        self.kind == CostKind::WeightedGen && self.quadratic.iter().any(|&c| c != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    /// Bus 0 is the slack bus.
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub shunt_convention: ShuntConvention,
}

impl Network {
    /// Validates and assembles a network. Bus 0 is the slack bus.
    pub fn new(
        name: impl Into<String>,
        base_mva: f64,
        buses: Vec<Bus>,
        lines: Vec<Line>,
    ) -> Result<Self, NetworkError> {
        let net = Network {
            name: name.into(),
            base_mva,
            buses,
            lines,
            shunt_convention: ShuntConvention::default(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }

    pub fn m(&self) -> usize {
        self.lines.len()
    }

    pub fn slack(&self) -> usize {
        0
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let n = self.n();
        let bad = |m: String| Err(NetworkError::Invalid(m));
        if n == 0 {
            return bad("no buses".into());
        }
        if !(self.base_mva > 0.0) {
            return bad("base MVA must be positive".into());
        }
        for (j, b) in self.buses.iter().enumerate() {
            if !(b.v_min > 0.0 && b.v_min <= b.v_max) {
                return bad(format!("bus {j}: voltage band [{}, {}]", b.v_min, b.v_max));
            }
            if b.s_min.re > b.s_max.re || b.s_min.im > b.s_max.im {
                return bad(format!("bus {j}: injection lower bound exceeds upper bound"));
            }
            if b.s_min.re.is_nan() || b.s_min.im.is_nan() || b.s_max.re.is_nan() || b.s_max.im.is_nan() {
                return bad(format!("bus {j}: NaN bound"));
            }
            if !(b.y_shunt.re.is_finite() && b.y_shunt.im.is_finite()) {
                return bad(format!("bus {j}: non-finite shunt"));
            }
        }
        let mut seen = BTreeMap::new();
        for (l, line) in self.lines.iter().enumerate() {
            if line.from >= n || line.to >= n {
                return bad(format!("line {l} references a missing bus"));
            }
            if line.from == line.to {
                return bad(format!("line {l} is a self-loop"));
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if let Some(prev) = seen.insert(key, l) {
                return bad(format!("lines {prev} and {l} join the same buses"));
            }
            if !(line.z.norm() > 0.0) || !(line.tap.norm() > 0.0) {
                return bad(format!("line {l}: zero impedance or tap"));
            }
            if (line.y * line.z - 1.0).norm() > 1e-12 {
                return bad(format!("line {l}: y·z ≠ 1"));
            }
        }
        let b0 = &self.buses[0];
        if b0.v_min != b0.v_max {
            return bad("slack bus voltage magnitude is not pinned".into());
        }
        if let Some(u) = self.graph().unreachable_from(0) {
            return Err(NetworkError::Islanded(self.buses[u].label));
        }
        Ok(())
    }

    /// Undirected topology.
    pub fn graph(&self) -> Graph {
        let edges: Vec<(usize, usize)> = self.lines.iter().map(|l| (l.from, l.to)).collect();
        Graph::from_edges(self.n(), &edges)
    }

    /// Index of the line joining `j` and `k` in either orientation.
    pub fn line_between(&self, j: usize, k: usize) -> Option<usize> {
        self.lines
            .iter()
            .position(|l| (l.from == j && l.to == k) || (l.from == k && l.to == j))
    }

    pub fn has_taps(&self) -> bool {
        self.lines.iter().any(Line::has_tap)
    }

    /// Shunt coefficient multiplying `|V_j|²` in `s_j`.
    pub fn shunt_coefficient(&self, j: usize) -> Complex {
        let y = self.buses[j].y_shunt;
        match self.shunt_convention {
            ShuntConvention::Conjugated => y.conj(),
            ShuntConvention::AsDisplayed => y,
        }
    }

    /// Net injection at bus `j` for voltages `v`.
    pub fn injection(&self, v: &[Complex], j: usize) -> Complex {
        let mut s = v[j].norm_sqr() * self.shunt_coefficient(j);
        for line in &self.lines {
            let [yff, yft, ytf, ytt] = line.two_port();
            if line.from == j {
                s += v[j] * (yff * v[j] + yft * v[line.to]).conj();
            } else if line.to == j {
                s += v[j] * (ytf * v[line.from] + ytt * v[j]).conj();
            }
        }
        s
    }

    pub fn injections(&self, v: &[Complex]) -> Vec<Complex> {
        (0..self.n()).map(|j| self.injection(v, j)).collect()
    }

    /// Whether `v` meets all injection and voltage bounds within `tol`.
    pub fn check_feasible(&self, v: &[Complex], tol: f64) -> bool {
        if v.len() != self.n() {
            return false;
        }
        self.buses.iter().enumerate().all(|(j, b)| {
            let m = v[j].norm();
            let s = self.injection(v, j);
            m >= b.v_min - tol
                && m <= b.v_max + tol
                && s.re >= b.s_min.re - tol
                && s.re <= b.s_max.re + tol
                && s.im >= b.s_min.im - tol
                && s.im <= b.s_max.im + tol
        })
    }

    /// Adds resistance `eps` to every line with zero resistance.
    pub fn fix_zero_resistance(&self, eps: f64) -> Network {
        assert!(eps > 0.0, "eps must be positive");
        let mut out = self.clone();
        for line in &mut out.lines {
            if line.z.re == 0.0 {
                line.z.re = eps;
                line.y = line.z.inv();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let net: Network =
            serde_json::from_str(text).map_err(|e| NetworkError::Malformed(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }
}

// ---------------------------------------------------------------------------
// MATPOWER case files

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_number(tok: &str) -> Result<f64, NetworkError> {
    match tok {
        "Inf" | "inf" | "+Inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok
            .parse::<f64>()
            .map_err(|_| NetworkError::Malformed(format!("bad number {tok:?}"))),
    }
}

/// Extracts the rows of `mpc.<name> = [ ... ];`.
fn matrix(text: &str, name: &str) -> Result<Option<Vec<Vec<f64>>>, NetworkError> {
    let key = format!("mpc.{name}");
    let mut body = String::new();
    let mut inside = false;
    let mut found = false;
    for raw in text.lines() {
        let line = strip_comment(raw);
        if !inside {
            let t = line.trim_start();
            if let Some(rest) = t.strip_prefix(&key) {
                let rest = rest.trim_start();
                if let Some(rest) = rest.strip_prefix('=') {
                    let Some(open) = rest.find('[') else {
                        return Err(NetworkError::Malformed(format!("{key} is not a matrix")));
                    };
                    found = true;
                    inside = true;
                    let after = &rest[open + 1..];
                    if let Some(close) = after.find(']') {
                        body.push_str(&after[..close]);
                        inside = false;
                        break;
                    }
                    body.push_str(after);
                    body.push('\n');
                }
            }
        } else if let Some(close) = line.find(']') {
            body.push_str(&line[..close]);
            inside = false;
            break;
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    if !found {
        return Ok(None);
    }
    if inside {
        return Err(NetworkError::Malformed(format!("{key} is not terminated")));
    }
    let mut rows = Vec::new();
    for chunk in body.split(|c| c == ';' || c == '\n') {
        let toks: Vec<&str> = chunk
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if toks.is_empty() {
            continue;
        }
        let row = toks.into_iter().map(parse_number).collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Some(rows))
}

fn scalar(text: &str, name: &str) -> Result<Option<f64>, NetworkError> {
    let key = format!("mpc.{name}");
    for raw in text.lines() {
        let line = strip_comment(raw).trim();
        if let Some(rest) = line.strip_prefix(&key) {
            if let Some(v) = rest.trim_start().strip_prefix('=') {
                let v = v.trim().trim_end_matches(';').trim();
                return parse_number(v).map(Some);
            }
        }
    }
    Ok(None)
}

fn case_name(text: &str) -> String {
    for raw in text.lines() {
        let line = strip_comment(raw).trim();
        if let Some(rest) = line.strip_prefix("function") {
            if let Some(eq) = rest.find('=') {
                return rest[eq + 1..].trim().to_string();
            }
        }
    }
    String::from("case")
}

fn check_width(rows: &[Vec<f64>], min: usize, what: &str) -> Result<(), NetworkError> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() < min {
            return Err(NetworkError::Malformed(format!(
                "{what} row {} has {} columns, expected at least {min}",
                i + 1,
                r.len()
            )));
        }
    }
    Ok(())
}

/// Parses a MATPOWER version 2 case (`baseMVA`, `bus`, `gen`, `branch`,
/// optional `gencost`).
///
/// Buses are renumbered densely with the slack bus first. Generator limits
/// are aggregated per bus and loads subtracted, so bus bounds describe the
/// net injection. The slack bus voltage magnitude is pinned to its
/// generator setpoint. Parallel branches with equal taps are merged by
/// adding admittances.
pub fn parse_matpower(text: &str) -> Result<(Network, CostSpec), NetworkError> {
    let base = scalar(text, "baseMVA")?
        .ok_or_else(|| NetworkError::Malformed("missing baseMVA".into()))?;
    let bus = matrix(text, "bus")?.ok_or_else(|| NetworkError::Malformed("missing bus".into()))?;
    let gen = matrix(text, "gen")?.unwrap_or_default();
    let branch =
        matrix(text, "branch")?.ok_or_else(|| NetworkError::Malformed("missing branch".into()))?;
    let gencost = matrix(text, "gencost")?;
    check_width(&bus, BUS_COLS, "bus")?;
    check_width(&gen, GEN_COLS, "gen")?;
    check_width(&branch, BRANCH_COLS, "branch")?;

    // slack first, remaining buses in file order
    let mut slack: Option<usize> = None;
    for (i, r) in bus.iter().enumerate() {
        if r[1] == 3.0 {
            if let Some(s) = slack {
                return Err(NetworkError::MultipleSlack(bus[s][0] as usize, r[0] as usize));
            }
            slack = Some(i);
        }
        if r[1] == 4.0 {
            return Err(NetworkError::Malformed(format!("bus {} is marked isolated", r[0])));
        }
    }
    let slack = slack.ok_or(NetworkError::NoSlack)?;
    let mut order = vec![slack];
    order.extend((0..bus.len()).filter(|&i| i != slack));
    let mut index = BTreeMap::new();
    for (new, &old) in order.iter().enumerate() {
        let label = bus[old][0];
        if label < 0.0 || label.fract() != 0.0 {
            return Err(NetworkError::Malformed(format!("bad bus number {label}")));
        }
        if index.insert(label as usize, new).is_some() {
            return Err(NetworkError::Malformed(format!("duplicate bus number {label}")));
        }
    }
    let lookup = |label: f64| -> Result<usize, NetworkError> {
        index
            .get(&(label as usize))
            .copied()
            .ok_or_else(|| NetworkError::Malformed(format!("reference to unknown bus {label}")))
    };

    let n = order.len();
    let mut buses: Vec<Bus> = order
        .iter()
        .map(|&old| {
            let r = &bus[old];
            let load = Complex::new(r[2], r[3]) / base;
            Bus {
                label: r[0] as usize,
                s_min: -load,
                s_max: -load,
                v_min: r[12],
                v_max: r[11],
                y_shunt: Complex::new(r[4], r[5]) / base,
            }
        })
        .collect();
    let p_d: Vec<f64> = order.iter().map(|&old| bus[old][2] / base).collect();

    // generators
    let mut gens_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut slack_vg = None;
    for (g, r) in gen.iter().enumerate() {
        if r[7] <= 0.0 {
            continue;
        }
        let j = lookup(r[0])?;
        gens_at[j].push(g);
        let b = &mut buses[j];
        b.s_min += Complex::new(r[9], r[4]) / base;
        b.s_max += Complex::new(r[8], r[3]) / base;
        if j == 0 && slack_vg.is_none() {
            slack_vg = Some(r[5]);
        }
    }
    if let Some(vg) = slack_vg {
        buses[0].v_min = vg;
        buses[0].v_max = vg;
    }

    let cost = match gencost {
        None => CostSpec::loss_min(),
        Some(rows) => {
            let mut cost = CostSpec {
                kind: CostKind::WeightedGen,
                linear: vec![0.0; n],
                quadratic: vec![0.0; n],
                constant: vec![0.0; n],
                p_d,
            };
            for (j, gs) in gens_at.iter().enumerate() {
                let mut coeffs: Option<[f64; 3]> = None;
                for &g in gs {
                    let r = rows.get(g).ok_or_else(|| {
                        NetworkError::UnsupportedCost(format!("no gencost row for generator {}", g + 1))
                    })?;
                    let c = polynomial_cost(r, g)?;
                    match coeffs {
                        None => coeffs = Some(c),
                        Some(prev) if prev == c => {}
                        Some(_) => {
                            return Err(NetworkError::UnsupportedCost(format!(
                                "generators at bus {} have different costs",
                                buses[j].label
                            )))
                        }
                    }
                }
                if let Some([c2, c1, c0]) = coeffs {
                    // k identical units share the output equally
                    let k = gs.len() as f64;
                    cost.quadratic[j] = c2 * base * base / k;
                    cost.linear[j] = c1 * base;
                    cost.constant[j] = c0 * k;
                }
            }
            cost
        }
    };

    // branches, merging parallel ones
    let mut lines: Vec<Line> = Vec::new();
    let mut by_pair: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in &branch {
        if r[10] <= 0.0 {
            continue;
        }
        let f = lookup(r[0])?;
        let t = lookup(r[1])?;
        if f == t {
            return Err(NetworkError::Malformed(format!("branch {}-{} is a self-loop", r[0], r[1])));
        }
        let z = Complex::new(r[2], r[3]);
        if z.norm() == 0.0 {
            return Err(NetworkError::Malformed(format!("branch {}-{} has zero impedance", r[0], r[1])));
        }
        let ratio = if r[8] == 0.0 { 1.0 } else { r[8] };
        let tap = Complex::from_polar(ratio, r[9].to_radians());
        let line = Line::new(f, t, z).with_tap(tap).with_charging(r[4]);
        let key = (f.min(t), f.max(t));
        match by_pair.get(&key) {
            None => {
                by_pair.insert(key, lines.len());
                lines.push(line);
            }
            Some(&l) => {
                let prev = &mut lines[l];
                let same_dir = prev.from == f;
                if prev.tap != line.tap || (line.has_tap() && !same_dir) {
                    return Err(NetworkError::Malformed(format!(
                        "parallel branches {}-{} with different transformers",
                        r[0], r[1]
                    )));
                }
                prev.y += line.y;
                prev.z = prev.y.inv();
                prev.b_charge += line.b_charge;
            }
        }
    }

    let mut net = Network {
        name: case_name(text),
        base_mva: base,
        buses,
        lines,
        shunt_convention: ShuntConvention::default(),
    };
    // a generator-less slack keeps its bus-table band; pin it to the upper limit
    if net.buses[0].v_min != net.buses[0].v_max {
        net.buses[0].v_min = net.buses[0].v_max;
    }
    net.validate()?;
    cost.validate(net.n())?;
    Ok((net, cost))
}

/// Polynomial cost `[c2, c1, c0]` of one gencost row (model 2, up to degree 2).
fn polynomial_cost(r: &[f64], g: usize) -> Result<[f64; 3], NetworkError> {
    if r.len() < 4 {
        return Err(NetworkError::Malformed(format!("gencost row {} too short", g + 1)));
    }
    if r[0] != 2.0 {
        return Err(NetworkError::UnsupportedCost(format!(
            "generator {} uses a piecewise-linear cost",
            g + 1
        )));
    }
    let k = r[3] as usize;
    if r.len() < 4 + k {
        return Err(NetworkError::Malformed(format!("gencost row {} too short", g + 1)));
    }
    let c = &r[4..4 + k];
    let mut out = [0.0; 3];
    for (i, &v) in c.iter().rev().enumerate() {
        if i > 2 {
            if v != 0.0 {
                return Err(NetworkError::UnsupportedCost(format!(
                    "generator {} has a cost of degree {}",
                    g + 1,
                    k - 1
                )));
            }
        } else {
            out[2 - i] = v;
        }
    }
    Ok(out)
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "Inf".into()
    } else if x == f64::NEG_INFINITY {
        "-Inf".into()
    } else {
        format!("{x:?}")
    }
}

/// Writes `net` and `cost` as a MATPOWER case that [`parse_matpower`] reads
/// back to the same network. Every bus gets one generator carrying its
/// injection bounds.
pub fn to_matpower(net: &Network, cost: &CostSpec) -> String {
    let base = net.base_mva;
    let weighted = cost.kind == CostKind::WeightedGen;
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {}", net.name);
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {};", fmt_num(base));
    let _ = writeln!(out, "mpc.bus = [");
    for (j, b) in net.buses.iter().enumerate() {
        let pd = if weighted { cost.p_d[j] } else { 0.0 };
        let kind = if j == 0 { 3 } else { 2 };
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t0\t{}\t{}\t1\t1\t0\t0\t1\t{}\t{};",
            j + 1,
            kind,
            fmt_num(pd * base),
            fmt_num(b.y_shunt.re * base),
            fmt_num(b.y_shunt.im * base),
            fmt_num(b.v_max),
            fmt_num(b.v_min)
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "mpc.gen = [");
    for (j, b) in net.buses.iter().enumerate() {
        let pd = if weighted { cost.p_d[j] } else { 0.0 };
        let _ = writeln!(
            out,
            "\t{}\t0\t0\t{}\t{}\t{}\t{}\t1\t{}\t{};",
            j + 1,
            fmt_num(b.s_max.im * base),
            fmt_num(b.s_min.im * base),
            fmt_num(b.v_min),
            fmt_num(base),
            fmt_num((b.s_max.re + pd) * base),
            fmt_num((b.s_min.re + pd) * base)
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "mpc.branch = [");
    for l in &net.lines {
        let ratio = if l.has_tap() { l.tap.norm() } else { 0.0 };
        let angle = if l.has_tap() { l.tap.arg().to_degrees() } else { 0.0 };
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t{}\t{}\t1;",
            l.from + 1,
            l.to + 1,
            fmt_num(l.z.re),
            fmt_num(l.z.im),
            fmt_num(l.b_charge),
            fmt_num(ratio),
            fmt_num(angle)
        );
    }
    let _ = writeln!(out, "];");
    if weighted {
        let _ = writeln!(out, "mpc.gencost = [");
        for j in 0..net.n() {
            let _ = writeln!(
                out,
                "\t2\t0\t0\t3\t{}\t{}\t{};",
                fmt_num(cost.quadratic[j] / (base * base)),
                fmt_num(cost.linear[j] / base),
                fmt_num(cost.constant[j])
            );
        }
        let _ = writeln!(out, "];");
    }
    out
}

/// Breadth-first reachability helper shared with the graph code.
pub(crate) fn bfs_order(adj: &[Vec<usize>], root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
    let n = adj.len();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    if n == 0 {
        return (order, parent);
    }
    seen[root] = true;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(u);
                queue.push_back(w);
            }
        }
    }
    (order, parent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn two_bus(y: Complex) -> Network {
        Network::new(
            "two",
            100.0,
            vec![Bus::free(1, 1.0, 1.0), Bus::free(2, 0.9, 1.1)],
            vec![Line::from_admittance(0, 1, y)],
        )
        .unwrap()
    }

    #[test]
    fn flat_voltage_carries_no_power() {
        let net = two_bus(c(0.0, -1.0));
        let s = net.injection(&[c(1.0, 0.0), c(1.0, 0.0)], 0);
        assert!(s.norm() < 1e-15);
    }

    #[test]
    fn two_bus_injection_by_hand() {
        // V1 (V1 − V2)ᴴ yᴴ = 1 · 0.1 · i
        let net = two_bus(c(0.0, -1.0));
        let s = net.injection(&[c(1.0, 0.0), c(0.9, 0.0)], 0);
        assert!((s - c(0.0, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn y_times_z_is_one() {
        let line = Line::new(0, 1, c(0.1, 0.2));
        assert!((line.y - c(0.1, -0.2) / 0.05).norm() < 1e-12);
        assert!((line.y * line.z - 1.0).norm() < 1e-15);
    }

    #[test]
    fn zero_resistance_fixed() {
        let net = Network::new(
            "z",
            100.0,
            vec![Bus::free(1, 1.0, 1.0), Bus::free(2, 0.9, 1.1), Bus::free(3, 0.9, 1.1)],
            vec![Line::new(0, 1, c(0.0, 0.2)), Line::new(1, 2, c(0.1, 0.2))],
        )
        .unwrap();
        let fixed = net.fix_zero_resistance(1e-5);
        assert_eq!(fixed.lines[0].z, c(1e-5, 0.2));
        assert!((fixed.lines[0].y * fixed.lines[0].z - 1.0).norm() < 1e-12);
        assert_eq!(fixed.lines[1], net.lines[1]);
        fixed.validate().unwrap();
    }

    #[test]
    fn shunt_convention_switch() {
        let mut net = two_bus(c(0.0, -1.0));
        net.buses[1].y_shunt = c(0.0, 0.5);
        let v = [c(1.0, 0.0), c(1.0, 0.0)];
        assert!((net.injection(&v, 1) - c(0.0, -0.5)).norm() < 1e-15);
        net.shunt_convention = ShuntConvention::AsDisplayed;
        assert!((net.injection(&v, 1) - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn unpinned_slack_rejected() {
        let err = Network::new(
            "x",
            100.0,
            vec![Bus::free(1, 0.9, 1.1), Bus::free(2, 0.9, 1.1)],
            vec![Line::new(0, 1, c(0.1, 0.2))],
        );
        assert!(err.is_err());
    }

    #[test]
    fn infinite_bounds_survive_json() {
        let net = two_bus(c(0.5, -1.0));
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn matrix_literals_tolerate_commas_and_comments() {
        let text = "mpc.bus = [ 1, 2 ; % first\n 3 4\n];";
        let m = matrix(text, "bus").unwrap().unwrap();
        assert_eq!(m, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let one_line = "mpc.gen = [1 2; 3 Inf];";
        let m = matrix(one_line, "gen").unwrap().unwrap();
        assert_eq!(m[1][1], f64::INFINITY);
    }

    #[test]
    fn polynomial_cost_padding() {
        assert_eq!(polynomial_cost(&[2.0, 0.0, 0.0, 2.0, 3.0, 4.0], 0).unwrap(), [0.0, 3.0, 4.0]);
        assert_eq!(polynomial_cost(&[2.0, 0.0, 0.0, 1.0, 4.0], 0).unwrap(), [0.0, 0.0, 4.0]);
        assert!(polynomial_cost(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 10.0, 5.0], 0).is_err());
        assert!(polynomial_cost(&[2.0, 0.0, 0.0, 4.0, 1.0, 0.0, 0.0, 0.0], 0).is_err());
    }
}
