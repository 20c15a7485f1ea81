//! Bundled test networks.
//!
//! The MATPOWER texts of case9, case14 and case30 are vendored under
//! `data/` (transcribed from the MATPOWER/PYPOWER distributions). The
//! 3-bus network is encoded by hand from its admittance table.

use std::path::Path;

use thiserror::Error;

use crate::network::{parse_matpower, Bus, Complex, CostSpec, Line, Network, NetworkError};
use crate::relax::Relaxation;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("unknown case {0:?} (not bundled and no such file)")]
    Unknown(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Resistance given to lines with `r = 0` when loading a case.
pub const MIN_RESISTANCE: f64 = 1e-5;

/// A vendored case with reference optima.
#[derive(Debug, Clone, Copy)]
pub struct BundledCase {
    pub name: &'static str,
    pub text: &'static str,
    /// Reference optimal cost per relaxation.
    pub expected: &'static [(Relaxation, f64)],
    /// Largest acceptable eigenvalue ratio at an exact R1 optimum.
    pub eig_ratio_bound: f64,
}

pub const BUNDLED: &[BundledCase] = &[
    BundledCase {
        name: "case9",
        text: include_str!("../data/case9.m"),
        expected: &[(Relaxation::R1, 5297.4), (Relaxation::Rch, 5297.4), (Relaxation::R2, 5297.4)],
        eig_ratio_bound: 1e-5,
    },
    BundledCase {
        name: "case14",
        text: include_str!("../data/case14.m"),
        expected: &[(Relaxation::R1, 8081.7), (Relaxation::Rch, 8081.7), (Relaxation::R2, 8075.3)],
        eig_ratio_bound: 1e-5,
    },
    BundledCase {
        name: "case30",
        text: include_str!("../data/case30.m"),
        expected: &[],
        eig_ratio_bound: 1e-5,
    },
];

/// Name of the hand-encoded 3-bus network.
pub const TABLE1: &str = "table1";

/// The 3-bus network: shunts `y11 = i0.375`, `y22 = i0.5`, `y33 = i0.575`
/// and line admittances `y12`, `y13`, `y23`. Injections are unbounded,
/// bus 1 is held at `|V| = 1` and the others may range over `[0.9, 1.1]`.
pub fn table1() -> (Network, CostSpec) {
    let shunts = [0.375, 0.5, 0.575];
    let buses = shunts
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let (lo, hi) = if j == 0 { (1.0, 1.0) } else { (0.9, 1.1) };
            Bus {
                y_shunt: Complex::new(0.0, b),
                ..Bus::free(j + 1, lo, hi)
            }
        })
        .collect();
    let lines = vec![
        Line::from_admittance(0, 1, Complex::new(0.0517, -1.1087)),
        Line::from_admittance(0, 2, Complex::new(0.1673, -1.5954)),
        Line::from_admittance(1, 2, Complex::new(0.0444, -1.3319)),
    ];
    let net = Network::new(TABLE1, 100.0, buses, lines).expect("3-bus data is valid");
    (net, CostSpec::loss_min())
}

pub fn bundled(name: &str) -> Option<&'static BundledCase> {
    BUNDLED.iter().find(|c| c.name == name)
}

/// Loads a bundled case by name, or a MATPOWER file (or network JSON) by
/// path. Zero-resistance lines get [`MIN_RESISTANCE`].
pub fn load_case(name_or_path: &str) -> Result<(Network, CostSpec), CaseError> {
    let (net, cost) = if name_or_path == TABLE1 {
        table1()
    } else if let Some(case) = bundled(name_or_path) {
        parse_matpower(case.text)?
    } else {
        let path = Path::new(name_or_path);
        if !path.is_file() {
            return Err(CaseError::Unknown(name_or_path.to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
            path: name_or_path.to_string(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            (Network::from_json(&text)?, CostSpec::loss_min())
        } else {
            parse_matpower(&text)?
        }
    };
    Ok((net.fix_zero_resistance(MIN_RESISTANCE), cost))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_cases_parse() {
        for case in BUNDLED {
            let (net, _) = load_case(case.name).unwrap();
            assert!(net.n() >= 9, "{}", case.name);
            assert!(net.lines.iter().all(|l| l.z.re > 0.0));
        }
    }

    #[test]
    fn flat_start_injections_are_conjugated_shunts() {
        let (net, _) = table1();
        let v = vec![Complex::new(1.0, 0.0); 3];
        for (j, s) in net.injections(&v).into_iter().enumerate() {
            assert!((s - net.buses[j].y_shunt.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn missing_file_is_unknown() {
        assert!(matches!(load_case("no/such/case.m"), Err(CaseError::Unknown(_))));
    }
}
