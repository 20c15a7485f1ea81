//! Conic programs for the four relaxations of optimal power flow:
//! the full SDP (R1), the chordal SDP (Rch), the edge-wise SOCP (R2) in the
//! bus injection model, and the SOCP of the branch flow model.
//!
//! W-based programs use one variable per entry of `I_G` (the diagonal plus
//! real and imaginary parts of each edge entry). PSD blocks are the real
//! embedding `[[Re W, −Im W], [Im W, Re W]]` written as a linear image of
//! those variables, so clique overlaps share variables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use opfrelax_conic::{svec_index, ConeBlock, ConicProgram, SparseMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chordal::{chordal_extend, ChordalExtension, Graph};
use crate::network::{Complex, CostKind, CostSpec, Network, NetworkError};
use crate::partial::GPartialMatrix;
use crate::recovery::BranchFlowPoint;

const R2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error("{n} buses exceed the dense PSD cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("branch flow relaxation supports plain lines only; line {0} has an off-nominal tap")]
    TapPresent(usize),
    #[error("chordal extension does not cover the network graph")]
    ExtensionMismatch,
    #[error("invalid pin: {0}")]
    BadPin(String),
    #[error("objective has {0} coefficients for {1} buses")]
    BadObjective(usize, usize),
    #[error(transparent)]
    Cost(#[from] NetworkError),
    #[error(transparent)]
    Solver(#[from] opfrelax_conic::ConicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relaxation {
    R1,
    Rch,
    R2,
    /// Branch flow SOCP.
    Bf,
}

impl Relaxation {
    pub const ALL: [Relaxation; 4] = [Relaxation::R1, Relaxation::Rch, Relaxation::R2, Relaxation::Bf];

    pub fn name(self) -> &'static str {
        match self {
            Relaxation::R1 => "r1",
            Relaxation::Rch => "rch",
            Relaxation::R2 => "r2",
            Relaxation::Bf => "bf",
        }
    }
}

impl fmt::Display for Relaxation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relaxation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "r1" => Ok(Relaxation::R1),
            "rch" => Ok(Relaxation::Rch),
            "r2" => Ok(Relaxation::R2),
            "bf" => Ok(Relaxation::Bf),
            other => Err(format!("unknown relaxation {other:?} (expected r1, rch, r2 or bf)")),
        }
    }
}

/// Model quantity behind a program variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    /// `W_jj`
    WDiag(usize),
    /// `Re W_jk`, `j < k`
    WRe(usize, usize),
    /// `Im W_jk`, `j < k`
    WIm(usize, usize),
    /// `Re S` of a line
    P(usize),
    /// `Im S` of a line
    Q(usize),
    /// `ℓ` of a line
    Ell(usize),
    /// `v_j`
    V(usize),
    /// Epigraph of the quadratic cost at a bus.
    CostEpigraph(usize),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Symbol::WDiag(j) => write!(f, "W[{j},{j}]"),
            Symbol::WRe(j, k) => write!(f, "ReW[{j},{k}]"),
            Symbol::WIm(j, k) => write!(f, "ImW[{j},{k}]"),
            Symbol::P(l) => write!(f, "P[{l}]"),
            Symbol::Q(l) => write!(f, "Q[{l}]"),
            Symbol::Ell(l) => write!(f, "ell[{l}]"),
            Symbol::V(j) => write!(f, "v[{j}]"),
            Symbol::CostEpigraph(j) => write!(f, "t[{j}]"),
        }
    }
}

impl FromStr for Symbol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad symbol {s:?}");
        let open = s.find('[').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(']').ok_or_else(bad)?;
        let idx: Vec<usize> = inner
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let sym = match (&s[..open], idx.as_slice()) {
            ("W", &[j, k]) if j == k => Symbol::WDiag(j),
            ("ReW", &[j, k]) if j < k => Symbol::WRe(j, k),
            ("ImW", &[j, k]) if j < k => Symbol::WIm(j, k),
            ("P", &[l]) => Symbol::P(l),
            ("Q", &[l]) => Symbol::Q(l),
            ("ell", &[l]) => Symbol::Ell(l),
            ("v", &[j]) => Symbol::V(j),
            ("t", &[j]) => Symbol::CostEpigraph(j),
            _ => return Err(bad()),
        };
        Ok(sym)
    }
}

/// `s_j(W) = Σ φ · W_ab` over entries `(a, b)` of `I_G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionMap {
    pub terms: Vec<Vec<((usize, usize), Complex)>>,
}

impl InjectionMap {
    /// Evaluates every `s_j` on a partial matrix.
    pub fn evaluate(&self, w: &GPartialMatrix) -> Vec<Complex> {
        self.terms
            .iter()
            .map(|t| {
                t.iter()
                    .map(|&((a, b), phi)| phi * w.get(a, b).expect("entry in pattern"))
                    .sum()
            })
            .collect()
    }
}

/// Coefficients of each injection as a linear function of `W`, folding the
/// π-model two-port admittances and the bus shunt into the diagonal and
/// edge entries.
pub fn build_injection_map(net: &Network) -> InjectionMap {
    let n = net.n();
    let mut acc: Vec<BTreeMap<(usize, usize), Complex>> = vec![BTreeMap::new(); n];
    for j in 0..n {
        let sh = net.shunt_coefficient(j);
        if sh != Complex::new(0.0, 0.0) {
            *acc[j].entry((j, j)).or_default() += sh;
        }
    }
    for line in &net.lines {
        let [yff, yft, ytf, ytt] = line.two_port();
        let (f, t) = (line.from, line.to);
        *acc[f].entry((f, f)).or_default() += yff.conj();
        *acc[f].entry((f, t)).or_default() += yft.conj();
        *acc[t].entry((t, t)).or_default() += ytt.conj();
        *acc[t].entry((t, f)).or_default() += ytf.conj();
    }
    InjectionMap {
        terms: acc.into_iter().map(|m| m.into_iter().collect()).collect(),
    }
}

/// Equality pins on top of the network bounds. A pin replaces the bound
/// rows of the quantity it fixes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pin {
    /// `W_jj = value` (or `v_j` in the branch flow model).
    VoltageSquared { bus: usize, value: f64 },
    ActivePower { bus: usize, value: f64 },
    ReactivePower { bus: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Generation cost of the network.
    Cost,
    /// `Σ_j p_coef_j p_j + q_coef_j q_j`, minimized.
    Injections { p: Vec<f64>, q: Vec<f64> },
}

/// A network with its cost, pins and objective.
#[derive(Debug, Clone, PartialEq)]
pub struct OpfModel {
    pub network: Network,
    pub cost: CostSpec,
    pub pins: Vec<Pin>,
    pub objective: Objective,
    /// Largest bus count accepted by the full SDP.
    pub psd_cap: usize,
}

impl OpfModel {
    pub fn new(network: Network, cost: CostSpec) -> Self {
        OpfModel {
            network,
            cost,
            pins: Vec::new(),
            objective: Objective::Cost,
            psd_cap: 150,
        }
    }

    pub fn with_pins(mut self, pins: Vec<Pin>) -> Self {
        self.pins = pins;
        self
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }
}

/// Sparse affine expression `Σ a_i x_i + c`.
#[derive(Debug, Clone, Default, PartialEq)]
struct Affine {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Affine {
    fn var(i: usize, a: f64) -> Self {
        Affine {
            terms: vec![(i, a)],
            constant: 0.0,
        }
    }

    fn constant(c: f64) -> Self {
        Affine {
            terms: vec![],
            constant: c,
        }
    }

    fn add(&mut self, other: &Affine, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(i, a)| (i, a * scale)));
        self.constant += other.constant * scale;
    }

    fn scaled(&self, s: f64) -> Affine {
        let mut out = Affine::default();
        out.add(self, s);
        out
    }
}

/// Incrementally assembles a [`ConicProgram`].
#[derive(Debug, Default)]
struct Assembler {
    labels: Vec<Symbol>,
    objective: Vec<(usize, f64)>,
    offset: f64,
    eq: Vec<(usize, usize, f64)>,
    eq_rhs: Vec<f64>,
    /// (cone, rows)
    blocks: Vec<(ConeBlock, Vec<Affine>)>,
}

impl Assembler {
    fn var(&mut self, sym: Symbol) -> usize {
        self.labels.push(sym);
        self.labels.len() - 1
    }

    fn minimize(&mut self, e: &Affine) {
        self.objective.extend_from_slice(&e.terms);
        self.offset += e.constant;
    }

    fn equal(&mut self, e: &Affine, rhs: f64) {
        let r = self.eq_rhs.len();
        for &(i, a) in &e.terms {
            self.eq.push((r, i, a));
        }
        self.eq_rhs.push(rhs - e.constant);
    }

    /// `e ≥ 0`
    fn nonneg(&mut self, e: Affine) {
        self.blocks.push((ConeBlock::Nonneg { dim: 1 }, vec![e]));
    }

    /// `lo ≤ e ≤ hi`, or `e = lo` when the bounds coincide; infinite sides are skipped.
    fn bounded(&mut self, e: &Affine, lo: f64, hi: f64) {
        if lo == hi {
            self.equal(e, lo);
            return;
        }
        if lo.is_finite() {
            let mut r = e.clone();
            r.constant -= lo;
            self.nonneg(r);
        }
        if hi.is_finite() {
            let mut r = e.scaled(-1.0);
            r.constant += hi;
            self.nonneg(r);
        }
    }

    fn cone(&mut self, block: ConeBlock, rows: Vec<Affine>) {
        debug_assert_eq!(block.dim(), rows.len());
        self.blocks.push((block, rows));
    }

    fn finish(self) -> ConicProgram {
        let n = self.labels.len();
        let mut objective = vec![0.0; n];
        for (i, a) in self.objective {
            objective[i] += a;
        }
        // merge consecutive scalar nonnegative rows into one block
        let mut cones: Vec<ConeBlock> = Vec::new();
        let mut trip = Vec::new();
        let mut h = Vec::new();
        for (block, rows) in self.blocks {
            match (block, cones.last_mut()) {
                (ConeBlock::Nonneg { dim }, Some(ConeBlock::Nonneg { dim: last })) => *last += dim,
                _ => cones.push(block),
            }
            for e in rows {
                let r = h.len();
                for (i, a) in e.terms {
                    trip.push((r, i, -a));
                }
                h.push(e.constant);
            }
        }
        ConicProgram {
            num_vars: n,
            objective,
            objective_offset: self.offset,
            eq_matrix: SparseMatrix::from_triplets(self.eq_rhs.len(), n, &self.eq)
                .expect("assembled indices are in range"),
            eq_rhs: self.eq_rhs,
            cone_matrix: SparseMatrix::from_triplets(h.len(), n, &trip)
                .expect("assembled indices are in range"),
            cone_rhs: h,
            cones,
            labels: self.labels.iter().map(Symbol::to_string).collect(),
        }
    }
}

/// Variable indices of a W-based program.
#[derive(Debug, Clone, PartialEq)]
struct WLayout {
    pattern: Graph,
    diag: Vec<usize>,
    /// `(j, k)`, `j < k` → (re, im)
    edge: BTreeMap<(usize, usize), (usize, usize)>,
}

impl WLayout {
    fn new(asm: &mut Assembler, pattern: &Graph) -> Self {
        let diag = (0..pattern.n()).map(|j| asm.var(Symbol::WDiag(j))).collect();
        let mut edge = BTreeMap::new();
        for (a, b) in pattern.edges() {
            let re = asm.var(Symbol::WRe(a, b));
            let im = asm.var(Symbol::WIm(a, b));
            edge.insert((a, b), (re, im));
        }
        WLayout {
            pattern: pattern.clone(),
            diag,
            edge,
        }
    }

    /// `(Re, Im)` of `W_ab` as affine expressions.
    fn entry(&self, a: usize, b: usize) -> (Affine, Affine) {
        if a == b {
            return (Affine::var(self.diag[a], 1.0), Affine::default());
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (re, im) = self.edge[&(lo, hi)];
        let sign = if a < b { 1.0 } else { -1.0 };
        (Affine::var(re, 1.0), Affine::var(im, sign))
    }

    fn injection(&self, map: &InjectionMap, j: usize) -> (Affine, Affine) {
        let mut p = Affine::default();
        let mut q = Affine::default();
        for &((a, b), phi) in &map.terms[j] {
            let (x, y) = self.entry(a, b);
            // (φr + iφi)(x + iy)
            p.add(&x, phi.re);
            p.add(&y, -phi.im);
            q.add(&x, phi.im);
            q.add(&y, phi.re);
        }
        (p, q)
    }

    fn extract(&self, x: &[f64]) -> GPartialMatrix {
        let mut w = GPartialMatrix::zeros(self.pattern.clone());
        for (j, &i) in self.diag.iter().enumerate() {
            w.diag[j] = Complex::new(x[i], 0.0);
        }
        for (&(a, b), &(re, im)) in &self.edge {
            w.set(a, b, Complex::new(x[re], x[im]));
        }
        w
    }

    /// Real embedding of the clique block in `svec` order.
    fn psd_rows(&self, clique: &[usize]) -> Vec<Affine> {
        let k = clique.len();
        let entry = |r: usize, c: usize| -> Affine {
            let (ra, rb) = (r % k, c % k);
            let (x, y) = self.entry(clique[ra], clique[rb]);
            match (r < k, c < k) {
                (true, true) | (false, false) => x,
                (false, true) => y,
                (true, false) => y.scaled(-1.0),
            }
        };
        let mut rows = Vec::with_capacity(k * (2 * k + 1));
        for c in 0..2 * k {
            for r in 0..=c {
                let e = entry(r, c);
                rows.push(if r == c { e } else { e.scaled(std::f64::consts::SQRT_2) });
            }
        }
        debug_assert!(rows.len() == svec_index(2 * k - 1, 2 * k - 1) + 1);
        rows
    }
}

/// Variable indices of a branch flow program.
#[derive(Debug, Clone, PartialEq)]
struct BfLayout {
    p: Vec<usize>,
    q: Vec<usize>,
    ell: Vec<usize>,
    v: Vec<usize>,
}

impl BfLayout {
    fn extract(&self, x: &[f64]) -> BranchFlowPoint {
        BranchFlowPoint {
            s: self.p.iter().zip(&self.q).map(|(&p, &q)| Complex::new(x[p], x[q])).collect(),
            ell: self.ell.iter().map(|&i| x[i]).collect(),
            v: self.v.iter().map(|&i| x[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    W(WLayout),
    Bf(BfLayout),
}

/// Relaxed operating point read back from a solved program.
#[derive(Debug, Clone, PartialEq)]
pub enum RelaxedPoint {
    /// Partial matrix on the complete graph (R1), the chordal extension (Rch)
    /// or the network graph (R2).
    Matrix(GPartialMatrix),
    BranchFlow(BranchFlowPoint),
}

/// A program together with the map from its variables back to the model.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltProgram {
    pub relaxation: Relaxation,
    pub program: ConicProgram,
    /// Cliques hosting PSD blocks (R1, Rch) or the edges (R2); empty for branch flow.
    pub blocks: Vec<Vec<usize>>,
    symbols: Vec<Symbol>,
    layout: Layout,
}

impl BuiltProgram {
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Variable index of a model symbol.
    pub fn variable(&self, sym: &Symbol) -> Option<usize> {
        self.symbols.iter().position(|s| s == sym)
    }

    pub fn extract(&self, x: &[f64]) -> RelaxedPoint {
        match &self.layout {
            Layout::W(l) => RelaxedPoint::Matrix(l.extract(x)),
            Layout::Bf(l) => RelaxedPoint::BranchFlow(l.extract(x)),
        }
    }
}

/// `(p_j, q_j)` expressions for every bus.
type Injections = Vec<(Affine, Affine)>;

fn add_bounds_and_pins(
    asm: &mut Assembler,
    model: &OpfModel,
    vsq: &[Affine],
    inj: &Injections,
) -> Result<(), RelaxError> {
    let net = &model.network;
    let n = net.n();
    let mut v_pinned = vec![false; n];
    let mut p_pinned = vec![false; n];
    let mut q_pinned = vec![false; n];
    for pin in &model.pins {
        let (bus, value, flag, expr) = match *pin {
            Pin::VoltageSquared { bus, value } => (bus, value, &mut v_pinned, vsq.get(bus)),
            Pin::ActivePower { bus, value } => (bus, value, &mut p_pinned, inj.get(bus).map(|e| &e.0)),
            Pin::ReactivePower { bus, value } => (bus, value, &mut q_pinned, inj.get(bus).map(|e| &e.1)),
        };
        let expr = expr.ok_or_else(|| RelaxError::BadPin(format!("bus {bus} out of range")))?;
        if !value.is_finite() || flag[bus] {
            return Err(RelaxError::BadPin(format!("{pin:?}")));
        }
        flag[bus] = true;
        asm.equal(expr, value);
    }
    for (j, b) in net.buses.iter().enumerate() {
        if !v_pinned[j] {
            asm.bounded(&vsq[j], b.v_min * b.v_min, b.v_max * b.v_max);
        }
        if !p_pinned[j] {
            asm.bounded(&inj[j].0, b.s_min.re, b.s_max.re);
        }
        if !q_pinned[j] {
            asm.bounded(&inj[j].1, b.s_min.im, b.s_max.im);
        }
    }
    Ok(())
}

fn add_objective(asm: &mut Assembler, model: &OpfModel, inj: &Injections) -> Result<(), RelaxError> {
    let n = model.network.n();
    match &model.objective {
        Objective::Injections { p, q } => {
            if p.len() != n || q.len() != n {
                return Err(RelaxError::BadObjective(p.len().max(q.len()), n));
            }
            for j in 0..n {
                asm.minimize(&inj[j].0.scaled(p[j]));
                asm.minimize(&inj[j].1.scaled(q[j]));
            }
        }
        Objective::Cost => {
            let cost = &model.cost;
            cost.validate(n)?;
            match cost.kind {
                CostKind::LossMin => {
                    for e in inj {
                        asm.minimize(&e.0);
                    }
                }
                CostKind::WeightedGen => {
                    for j in 0..n {
                        // generation g_j = p_j + p_d_j
                        let mut g = inj[j].0.clone();
                        g.constant += cost.p_d[j];
                        asm.minimize(&g.scaled(cost.linear[j]));
                        asm.minimize(&Affine::constant(cost.constant[j]));
                        let q = cost.quadratic[j];
                        if q > 0.0 {
                            // 2 (t/λ)(λ/2) ≥ (√q g)², with λ balancing both sides near full output
                            let bus = &model.network.buses[j];
                            let g_ref = [bus.s_min.re, bus.s_max.re]
                                .iter()
                                .filter(|v| v.is_finite())
                                .map(|v| (v + cost.p_d[j]).abs())
                                .fold(0.0, f64::max);
                            let g_ref = if g_ref > 1e-3 { g_ref } else { 1.0 };
                            let lambda = (2.0 * q).sqrt() * g_ref;
                            let t = asm.var(Symbol::CostEpigraph(j));
                            asm.minimize(&Affine::var(t, 1.0));
                            asm.cone(
                                ConeBlock::RotatedSecondOrder { dim: 3 },
                                vec![Affine::var(t, 1.0 / lambda), Affine::constant(lambda / 2.0), g.scaled(q.sqrt())],
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn build_w_program(
    model: &OpfModel,
    relaxation: Relaxation,
    pattern: &Graph,
    blocks: Vec<Vec<usize>>,
) -> Result<BuiltProgram, RelaxError> {
    let net = &model.network;
    let map = build_injection_map(net);
    let mut asm = Assembler::default();
    let layout = WLayout::new(&mut asm, pattern);
    let vsq: Vec<Affine> = layout.diag.iter().map(|&i| Affine::var(i, 1.0)).collect();
    let inj: Injections = (0..net.n()).map(|j| layout.injection(&map, j)).collect();
    add_objective(&mut asm, model, &inj)?;
    add_bounds_and_pins(&mut asm, model, &vsq, &inj)?;
    match relaxation {
        Relaxation::R2 => {
            for e in &blocks {
                let (a, b) = (e[0], e[1]);
                let (x, y) = layout.entry(a, b);
                asm.cone(
                    ConeBlock::RotatedSecondOrder { dim: 4 },
                    vec![vsq[a].scaled(R2), vsq[b].scaled(R2), x, y],
                );
            }
        }
        _ => {
            for c in &blocks {
                let rows = layout.psd_rows(c);
                asm.cone(ConeBlock::PsdReal { order: 2 * c.len() }, rows);
            }
        }
    }
    let symbols = asm.labels.clone();
    Ok(BuiltProgram {
        relaxation,
        program: asm.finish(),
        blocks,
        symbols,
        layout: Layout::W(layout),
    })
}

/// Full SDP: one Hermitian PSD block over all buses.
pub fn build_r1(model: &OpfModel) -> Result<BuiltProgram, RelaxError> {
    let n = model.network.n();
    if n > model.psd_cap {
        return Err(RelaxError::CapExceeded { n, cap: model.psd_cap });
    }
    let ext = ChordalExtension::complete(&model.network.graph());
    let mut built = build_rch(model, &ext)?;
    built.relaxation = Relaxation::R1;
    Ok(built)
}

/// Chordal SDP: one PSD block per maximal clique of the extension, with
/// variables on the extended pattern shared between overlapping cliques.
pub fn build_rch(model: &OpfModel, ext: &ChordalExtension) -> Result<BuiltProgram, RelaxError> {
    let g = model.network.graph();
    if ext.base != g {
        return Err(RelaxError::ExtensionMismatch);
    }
    let filled = ext.filled();
    build_w_program(model, Relaxation::Rch, &filled, ext.maximal_cliques.clone())
}

/// Edge-wise SOCP: `W_ii W_jj ≥ |W_ij|²` on every line.
pub fn build_r2(model: &OpfModel) -> Result<BuiltProgram, RelaxError> {
    let g = model.network.graph();
    let edges = g.edges().into_iter().map(|(a, b)| vec![a, b]).collect();
    build_w_program(model, Relaxation::R2, &g, edges)
}

/// Branch flow SOCP over `x = (P, Q, ℓ, v)`.
pub fn build_bf(model: &OpfModel) -> Result<BuiltProgram, RelaxError> {
    let net = &model.network;
    if let Some(l) = net.lines.iter().position(|l| l.has_tap()) {
        return Err(RelaxError::TapPresent(l));
    }
    let n = net.n();
    let m = net.m();
    let mut asm = Assembler::default();
    let p: Vec<usize> = (0..m).map(|l| asm.var(Symbol::P(l))).collect();
    let q: Vec<usize> = (0..m).map(|l| asm.var(Symbol::Q(l))).collect();
    let ell: Vec<usize> = (0..m).map(|l| asm.var(Symbol::Ell(l))).collect();
    let v: Vec<usize> = (0..n).map(|j| asm.var(Symbol::V(j))).collect();

    // bus shunt plus half the charging of every incident line
    let mut shunt: Vec<Complex> = (0..n).map(|j| net.shunt_coefficient(j)).collect();
    for line in &net.lines {
        let half = Complex::new(0.0, line.b_charge / 2.0).conj();
        shunt[line.from] += half;
        shunt[line.to] += half;
    }
    let mut inj: Injections = (0..n)
        .map(|j| (Affine::var(v[j], shunt[j].re), Affine::var(v[j], shunt[j].im)))
        .collect();
    for (l, line) in net.lines.iter().enumerate() {
        let (f, t) = (line.from, line.to);
        inj[f].0.add(&Affine::var(p[l], 1.0), 1.0);
        inj[f].1.add(&Affine::var(q[l], 1.0), 1.0);
        // receiving end: −(S − z ℓ)
        inj[t].0.add(&Affine::var(p[l], -1.0), 1.0);
        inj[t].0.add(&Affine::var(ell[l], line.z.re), 1.0);
        inj[t].1.add(&Affine::var(q[l], -1.0), 1.0);
        inj[t].1.add(&Affine::var(ell[l], line.z.im), 1.0);
    }
    let vsq: Vec<Affine> = v.iter().map(|&i| Affine::var(i, 1.0)).collect();
    add_objective(&mut asm, model, &inj)?;
    add_bounds_and_pins(&mut asm, model, &vsq, &inj)?;
    for (l, line) in net.lines.iter().enumerate() {
        // v_t − v_f + 2 Re(zᴴ S) − |z|² ℓ = 0
        let z = line.z;
        let e = Affine {
            terms: vec![
                (v[line.to], 1.0),
                (v[line.from], -1.0),
                (p[l], 2.0 * z.re),
                (q[l], 2.0 * z.im),
                (ell[l], -z.norm_sqr()),
            ],
            constant: 0.0,
        };
        asm.equal(&e, 0.0);
    }
    for (l, line) in net.lines.iter().enumerate() {
        asm.cone(
            ConeBlock::RotatedSecondOrder { dim: 4 },
            vec![
                Affine::var(ell[l], R2),
                Affine::var(v[line.from], R2),
                Affine::var(p[l], 1.0),
                Affine::var(q[l], 1.0),
            ],
        );
    }
    let symbols = asm.labels.clone();
    Ok(BuiltProgram {
        relaxation: Relaxation::Bf,
        program: asm.finish(),
        blocks: Vec::new(),
        symbols,
        layout: Layout::Bf(BfLayout { p, q, ell, v }),
    })
}

/// Builds the requested relaxation; Rch uses the minimum-degree extension.
pub fn build(model: &OpfModel, relaxation: Relaxation) -> Result<BuiltProgram, RelaxError> {
    match relaxation {
        Relaxation::R1 => build_r1(model),
        Relaxation::Rch => build_rch(model, &chordal_extend(&model.network.graph())),
        Relaxation::R2 => build_r2(model),
        Relaxation::Bf => build_bf(model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip_through_labels() {
        let syms = [
            Symbol::WDiag(3),
            Symbol::WRe(0, 7),
            Symbol::WIm(2, 5),
            Symbol::P(1),
            Symbol::Q(0),
            Symbol::Ell(4),
            Symbol::V(9),
            Symbol::CostEpigraph(2),
        ];
        for s in syms {
            assert_eq!(s.to_string().parse::<Symbol>().unwrap(), s);
        }
        assert!("ReW[3,1]".parse::<Symbol>().is_err());
        assert!("X[1]".parse::<Symbol>().is_err());
    }

    #[test]
    fn bounded_emits_equality_for_equal_bounds() {
        let mut asm = Assembler::default();
        let x = asm.var(Symbol::V(0));
        asm.bounded(&Affine::var(x, 1.0), 2.0, 2.0);
        asm.bounded(&Affine::var(x, 1.0), 1.0, f64::INFINITY);
        let prog = asm.finish();
        assert_eq!(prog.eq_rhs, vec![2.0]);
        assert_eq!(prog.cone_rhs, vec![-1.0]);
    }
}
