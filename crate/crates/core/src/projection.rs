//! Two-dimensional projections of feasible sets.
//!
//! Convex relaxations are traced by a support-point sweep: for each unit
//! direction `d` the relaxation is solved with objective `max d·(a₁, a₂)`,
//! where `(a₁, a₂)` is `(p₁, p₂)` or `(q₁, q₂)`. Nonconvex sets are sampled
//! on angle grids with every voltage magnitude pinned. Power pins, which
//! have measure zero on a grid, are kept as a band of half a grid step.

use std::f64::consts::PI;

use opfrelax_conic::{solve, SolveStatus, SolverSettings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Complex, CostSpec, Network};
use crate::recovery::{g_inv, recover, ExactnessTolerances, RecoveryError};
use crate::relax::{build, build_injection_map, InjectionMap, Objective, OpfModel, Pin, RelaxError, RelaxedPoint, Relaxation};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("invalid projection: {0}")]
    BadSpec(String),
    #[error("pins are infeasible (direction {0})")]
    Infeasible(usize),
    #[error("solver stopped with status {status} in direction {direction}")]
    SolverFailed { direction: usize, status: SolveStatus },
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Conic(#[from] opfrelax_conic::ConicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// `(p₁, p₂)`.
    P1P2,
    /// `(q₁, q₂)`.
    Q1Q2,
}

impl Plane {
    fn coords(self, s: &[Complex]) -> (f64, f64) {
        match self {
            Plane::P1P2 => (s[0].re, s[1].re),
            Plane::Q1Q2 => (s[0].im, s[1].im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub plane: Plane,
    pub pins: Vec<Pin>,
    /// Number of sweep directions for convex sets.
    pub directions: usize,
    /// Points per angle axis for nonconvex sets.
    pub grid: usize,
}

impl ProjectionSpec {
    /// `W11 = W22 = W33 = 1`, `p₃ = −0.95` on the 3-bus network.
    pub fn table1(plane: Plane) -> Self {
        let mut pins: Vec<Pin> = (0..3).map(|bus| Pin::VoltageSquared { bus, value: 1.0 }).collect();
        pins.push(Pin::ActivePower { bus: 2, value: -0.95 });
        ProjectionSpec {
            plane,
            pins,
            directions: 16,
            grid: 512,
        }
    }

    pub fn validate(&self) -> Result<(), ProjectionError> {
        if self.directions < 4 {
            return Err(ProjectionError::BadSpec(format!("directions = {} < 4", self.directions)));
        }
        if self.grid < 16 {
            return Err(ProjectionError::BadSpec(format!("grid = {} < 16", self.grid)));
        }
        Ok(())
    }

    /// Unit direction `i` of the sweep, `(cos 2πi/k, sin 2πi/k)`.
    pub fn direction(&self, i: usize) -> (f64, f64) {
        let a = 2.0 * PI * i as f64 / self.directions as f64;
        (a.cos(), a.sin())
    }
}

/// Optimizer of one sweep direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub index: usize,
    pub dx: f64,
    pub dy: f64,
    pub x: f64,
    pub y: f64,
    /// `max d·(a₁, a₂)` over the relaxed set.
    pub support: f64,
    pub eig_ratio: f64,
    pub cycle_residual: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CloudPoint {
    pub x: f64,
    pub y: f64,
}

fn check_network(net: &Network) -> Result<(), ProjectionError> {
    if net.n() < 2 {
        return Err(ProjectionError::BadSpec("projection needs at least two buses".into()));
    }
    Ok(())
}

/// Support-point sweep of a convex relaxation under the pins, sorted by
/// direction index.
pub fn project_convex(
    net: &Network,
    spec: &ProjectionSpec,
    which: Relaxation,
    settings: &SolverSettings,
    tol: &ExactnessTolerances,
) -> Result<Vec<SupportPoint>, ProjectionError> {
    spec.validate()?;
    check_network(net)?;
    let n = net.n();
    let map = build_injection_map(net);
    let mut out = Vec::with_capacity(spec.directions);
    for i in 0..spec.directions {
        let (dx, dy) = spec.direction(i);
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let c = match spec.plane {
            Plane::P1P2 => &mut p,
            Plane::Q1Q2 => &mut q,
        };
        c[0] = -dx;
        c[1] = -dy;
        let model = OpfModel::new(net.clone(), CostSpec::loss_min())
            .with_pins(spec.pins.clone())
            .with_objective(Objective::Injections { p, q });
        let built = build(&model, which)?;
        let sol = solve(&built.program, settings)?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::PrimalInfeasible => return Err(ProjectionError::Infeasible(i)),
            status => return Err(ProjectionError::SolverFailed { direction: i, status }),
        }
        let point = built.extract(&sol.x);
        let w = match &point {
            RelaxedPoint::Matrix(w) => w.clone(),
            RelaxedPoint::BranchFlow(x) => g_inv(x, net),
        };
        let (x, y) = spec.plane.coords(&map.evaluate(&w));
        let rep = recover(&point, which, &built.blocks, net, tol)?;
        out.push(SupportPoint {
            index: i,
            dx,
            dy,
            x,
            y,
            support: dx * x + dy * y,
            eig_ratio: rep.eig_ratio,
            cycle_residual: rep.cycle_residual,
            exact: rep.exact,
        });
    }
    Ok(out)
}

/// Largest `d·point` over a cloud; `-∞` when empty.
pub fn support(points: &[CloudPoint], d: (f64, f64)) -> f64 {
    points
        .iter()
        .map(|p| d.0 * p.x + d.1 * p.y)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Entries `W_ab = m_a m_b e^{iψ_ab}` with pinned magnitudes and phases
/// driven by a few grid parameters.
struct PhaseSampler<'a> {
    map: &'a InjectionMap,
    net: &'a Network,
    mag: Vec<f64>,
    pins: Vec<(usize, bool, f64)>,
}

impl<'a> PhaseSampler<'a> {
    fn new(net: &'a Network, map: &'a InjectionMap, spec: &ProjectionSpec) -> Result<Self, ProjectionError> {
        let n = net.n();
        let mut mag = vec![f64::NAN; n];
        let mut pins = Vec::new();
        for pin in &spec.pins {
            match *pin {
                Pin::VoltageSquared { bus, value } if bus < n && value >= 0.0 => mag[bus] = value.sqrt(),
                Pin::ActivePower { bus, value } if bus < n => pins.push((bus, false, value)),
                Pin::ReactivePower { bus, value } if bus < n => pins.push((bus, true, value)),
                _ => return Err(ProjectionError::BadSpec(format!("bad pin {pin:?}"))),
            }
        }
        if let Some(j) = mag.iter().position(|m| m.is_nan()) {
            return Err(ProjectionError::BadSpec(format!("angle grids need every |V| pinned; bus {j} is free")));
        }
        Ok(PhaseSampler { map, net, mag, pins })
    }

    /// Injections and, when `grad` is given, `∂s_j/∂param` for every bus.
    /// `phase(a, b)` returns `ψ_ab` and its dependence on at most two
    /// parameters.
    fn eval(
        &self,
        phase: &dyn Fn(usize, usize) -> (f64, [(usize, f64); 2]),
        nparams: usize,
        grad: Option<&mut Vec<Vec<Complex>>>,
    ) -> Vec<Complex> {
        let n = self.mag.len();
        let mut s = vec![Complex::new(0.0, 0.0); n];
        let mut gbuf = grad;
        if let Some(g) = gbuf.as_deref_mut() {
            g.clear();
            g.resize(n, vec![Complex::new(0.0, 0.0); nparams]);
        }
        for (j, terms) in self.map.terms.iter().enumerate() {
            for &((a, b), phi) in terms {
                let m = self.mag[a] * self.mag[b];
                if a == b {
                    s[j] += phi * m;
                    continue;
                }
                let (psi, deps) = phase(a, b);
                let t = phi * Complex::from_polar(m, psi);
                s[j] += t;
                if let Some(g) = gbuf.as_deref_mut() {
                    for (k, c) in deps {
                        if c != 0.0 {
                            g[j][k] += Complex::new(0.0, c) * t;
                        }
                    }
                }
            }
        }
        s
    }

    /// Half-grid-width test of every power pin.
    fn pins_hold(&self, s: &[Complex], grad: &[Vec<Complex>], h: f64) -> bool {
        self.pins.iter().all(|&(bus, reactive, value)| {
            let part = |z: Complex| if reactive { z.im } else { z.re };
            let band = 0.5 * h * grad[bus].iter().map(|g| part(*g).abs()).sum::<f64>();
            (part(s[bus]) - value).abs() <= band
        })
    }

    /// Network injection bounds of every bus not fixed by a pin.
    fn bounds_hold(&self, s: &[Complex]) -> bool {
        let pinned = |bus: usize, reactive: bool| self.pins.iter().any(|&(b, r, _)| b == bus && r == reactive);
        self.net.buses.iter().enumerate().all(|(j, b)| {
            (pinned(j, false) || (s[j].re >= b.s_min.re && s[j].re <= b.s_max.re))
                && (pinned(j, true) || (s[j].im >= b.s_min.im && s[j].im <= b.s_max.im))
        })
    }
}

fn grid_angle(i: usize, grid: usize) -> f64 {
    -PI + 2.0 * PI * i as f64 / grid as f64
}

/// Iterates over all `grid^k` index tuples.
fn for_each_tuple(k: usize, grid: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; k];
    loop {
        f(&idx);
        let mut d = 0;
        loop {
            if d == k {
                return;
            }
            idx[d] += 1;
            if idx[d] < grid {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

const MAX_SAMPLES: f64 = 1e9;

fn sorted(mut pts: Vec<CloudPoint>) -> Vec<CloudPoint> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts
}

/// Samples the projection of the nonconvex feasible set: every voltage has
/// its pinned magnitude and the angles of the non-slack buses run over a
/// grid on `[−π, π)`. Output is sorted.
pub fn project_nonconvex(net: &Network, spec: &ProjectionSpec) -> Result<Vec<CloudPoint>, ProjectionError> {
    spec.validate()?;
    check_network(net)?;
    let map = build_injection_map(net);
    let sampler = PhaseSampler::new(net, &map, spec)?;
    let k = net.n() - 1;
    if (spec.grid as f64).powi(k as i32) > MAX_SAMPLES {
        return Err(ProjectionError::BadSpec(format!("grid^{k} samples is too many")));
    }
    let h = 2.0 * PI / spec.grid as f64;
    let slack = net.slack();
    // parameter of bus j is its angle; the slack bus has none
    let param = |j: usize| if j == slack { None } else { Some(if j < slack { j } else { j - 1 }) };
    let mut theta = vec![0.0; net.n()];
    let mut grad = Vec::new();
    let mut out = Vec::new();
    for_each_tuple(k, spec.grid, |idx| {
        for j in 0..net.n() {
            theta[j] = param(j).map_or(0.0, |p| grid_angle(idx[p], spec.grid));
        }
        let phase = |a: usize, b: usize| {
            let mut deps = [(0, 0.0); 2];
            if let Some(p) = param(a) {
                deps[0] = (p, 1.0);
            }
            if let Some(p) = param(b) {
                deps[1] = (p, -1.0);
            }
            (theta[a] - theta[b], deps)
        };
        let s = sampler.eval(&phase, k, Some(&mut grad));
        if sampler.pins_hold(&s, &grad, h) && sampler.bounds_hold(&s) {
            let (x, y) = spec.plane.coords(&s);
            out.push(CloudPoint { x, y });
        }
    });
    Ok(sorted(out))
}

/// Samples the projection of the set whose `W` is rank one on every edge
/// but need not be consistent around cycles. Each edge carries its own
/// angle on the grid. Edges touching a bus with a power pin are screened
/// against the pins first; the others are then swept freely.
pub fn project_edge_rank1(net: &Network, spec: &ProjectionSpec) -> Result<Vec<CloudPoint>, ProjectionError> {
    spec.validate()?;
    check_network(net)?;
    let map = build_injection_map(net);
    let sampler = PhaseSampler::new(net, &map, spec)?;
    let edges = net.graph().edges();
    let pinned_bus = |j: usize| sampler.pins.iter().any(|&(b, _, _)| b == j);
    let (constrained, free): (Vec<usize>, Vec<usize>) =
        (0..edges.len()).partition(|&e| pinned_bus(edges[e].0) || pinned_bus(edges[e].1));
    let g = spec.grid as f64;
    if g.powi(constrained.len() as i32) > MAX_SAMPLES || g.powi(free.len() as i32) > MAX_SAMPLES {
        return Err(ProjectionError::BadSpec("too many edge-angle samples".into()));
    }
    let h = 2.0 * PI / spec.grid as f64;
    let m = edges.len();
    let edge_of = |a: usize, b: usize| {
        let key = if a < b { (a, b) } else { (b, a) };
        edges.binary_search(&key).expect("injection terms lie on edges")
    };
    let mut phi = vec![0.0; m];
    let mut grad = Vec::new();
    let mut out = Vec::new();
    for_each_tuple(constrained.len(), spec.grid, |idx| {
        for (c, &e) in constrained.iter().enumerate() {
            phi[e] = grid_angle(idx[c], spec.grid);
        }
        for &e in &free {
            phi[e] = 0.0;
        }
        let phase = |a: usize, b: usize| {
            let e = edge_of(a, b);
            let sign = if a < b { 1.0 } else { -1.0 };
            (sign * phi[e], [(e, sign), (0, 0.0)])
        };
        let s = sampler.eval(&phase, m, Some(&mut grad));
        if !sampler.pins_hold(&s, &grad, h) {
            return;
        }
        let fixed = phi.clone();
        for_each_tuple(free.len(), spec.grid, |fidx| {
            let mut cur = fixed.clone();
            for (c, &e) in free.iter().enumerate() {
                cur[e] = grid_angle(fidx[c], spec.grid);
            }
            let phase = |a: usize, b: usize| {
                let e = edge_of(a, b);
                let sign = if a < b { 1.0 } else { -1.0 };
                (sign * cur[e], [(e, sign), (0, 0.0)])
            };
            let s = sampler.eval(&phase, m, None);
            if sampler.bounds_hold(&s) {
                let (x, y) = spec.plane.coords(&s);
                out.push(CloudPoint { x, y });
            }
        });
    });
    Ok(sorted(out))
}

/// Connected components of a point cloud drawn on a `res × res` raster
/// spanning its bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterComponents {
    /// Components of the occupied pixels (8-connected).
    pub occupied: usize,
    /// Components of the empty pixels including the outside (4-connected).
    pub complement: usize,
}

impl RasterComponents {
    /// Bounded empty regions enclosed by the cloud.
    pub fn holes(&self) -> usize {
        self.complement.saturating_sub(1)
    }
}

/// Raster side used to count components of a cloud sampled on a `grid`
/// per axis angle grid: four grid steps per cell, so neighbouring samples
/// of a connected set land in touching cells.
pub fn raster_resolution(grid: usize) -> usize {
    (grid / 4).max(16)
}

pub fn raster_components(points: &[CloudPoint], res: usize) -> RasterComponents {
    if points.is_empty() || res == 0 {
        return RasterComponents {
            occupied: 0,
            complement: 1,
        };
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    // one empty pixel of padding on each side keeps the outside connected
    let side = res + 2;
    let mut occ = vec![false; side * side];
    let cell = |v: f64, lo: f64, hi: f64| {
        if hi > lo {
            (((v - lo) / (hi - lo) * res as f64) as usize).min(res - 1)
        } else {
            res / 2
        }
    };
    for p in points {
        let i = cell(p.x, x0, x1) + 1;
        let j = cell(p.y, y0, y1) + 1;
        occ[j * side + i] = true;
    }
    let n8: &[(isize, isize)] = &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
    let n4: &[(isize, isize)] = &[(-1, 0), (1, 0), (0, -1), (0, 1)];
    let count = |want: bool, nbrs: &[(isize, isize)]| {
        let mut seen = vec![false; side * side];
        let mut comps = 0;
        let mut stack = Vec::new();
        for start in 0..side * side {
            if occ[start] != want || seen[start] {
                continue;
            }
            comps += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                let (ci, cj) = ((c % side) as isize, (c / side) as isize);
                for &(di, dj) in nbrs {
                    let (ni, nj) = (ci + di, cj + dj);
                    if ni < 0 || nj < 0 || ni >= side as isize || nj >= side as isize {
                        continue;
                    }
                    let nb = nj as usize * side + ni as usize;
                    if occ[nb] == want && !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
        comps
    };
    RasterComponents {
        occupied: count(true, n8),
        complement: count(false, n4),
    }
}

/// Writes rows as CSV with a header line.
pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// A gnuplot script overlaying CSV point files (header row skipped).
pub fn gnuplot_script(plane: Plane, files: &[(&str, &str)]) -> String {
    let (xl, yl) = match plane {
        Plane::P1P2 => ("p1", "p2"),
        Plane::Q1Q2 => ("q1", "q2"),
    };
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{xl}'\nset ylabel '{yl}'\nplot \\\n"
    );
    let body: Vec<String> = files
        .iter()
        .map(|(file, title)| format!("  '{file}' using 'x':'y' with points pt 7 ps 0.3 title '{title}'"))
        .collect();
    s.push_str(&body.join(", \\\n"));
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(pts: &mut Vec<CloudPoint>, r0: f64, r1: f64) {
        for i in 0..200 {
            for k in 0..4000 {
                let r = r0 + (r1 - r0) * i as f64 / 199.0;
                let a = 2.0 * PI * k as f64 / 4000.0;
                pts.push(CloudPoint { x: r * a.cos(), y: r * a.sin() });
            }
        }
    }

    #[test]
    fn annulus_has_one_hole() {
        let mut pts = Vec::new();
        ring(&mut pts, 0.5, 1.0);
        let c = raster_components(&pts, 128);
        assert_eq!(c.occupied, 1);
        assert_eq!(c.holes(), 1);
    }

    #[test]
    fn disk_has_no_hole() {
        let mut pts = Vec::new();
        ring(&mut pts, 0.0, 1.0);
        let c = raster_components(&pts, 128);
        assert_eq!((c.occupied, c.holes()), (1, 0));
    }

    #[test]
    fn tuples_cover_the_grid() {
        let mut n = 0;
        for_each_tuple(3, 4, |_| n += 1);
        assert_eq!(n, 64);
        let mut m = 0;
        for_each_tuple(0, 4, |_| m += 1);
        assert_eq!(m, 1);
    }

    #[test]
    fn spec_limits_are_checked() {
        let mut spec = ProjectionSpec::table1(Plane::P1P2);
        assert!(spec.validate().is_ok());
        spec.directions = 3;
        assert!(spec.validate().is_err());
    }
}
