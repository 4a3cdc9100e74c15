//! Boxes, entry times and decay envelopes of extinction regimes.

use serde::Serialize;

use super::SkeletonError;
use crate::conditions::Witness;
use crate::model::{SupportSet, SystemSpec};
use crate::odeint::{integrate, TrajectoryGrid};

/// Extinction constants taken from a regime witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxFamily {
    pub persistent: SupportSet,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub dbar: Vec<f64>,
    pub eps: f64,
    pub theta: f64,
}

impl BoxFamily {
    pub fn from_witness(n: usize, w: &Witness) -> Result<Self, SkeletonError> {
        let missing = |name: &str| SkeletonError::Precondition(format!("extinction witness lacks {name}"));
        let persistent = w.support.ok_or_else(|| missing("the persistent set"))?;
        if persistent.n() != n {
            return Err(SkeletonError::Precondition("witness dimension mismatch".into()));
        }
        let d = w.d.clone().ok_or_else(|| missing("d"))?;
        let dbar = w.dbar.clone().unwrap_or_else(|| vec![0.0; n]);
        Ok(BoxFamily {
            persistent,
            c: w.c.clone().ok_or_else(|| missing("c"))?,
            d,
            dbar,
            eps: w.eps.ok_or_else(|| missing("eps"))?,
            theta: w.theta.ok_or_else(|| missing("theta"))?,
        })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Upper corner `d_i + k theta c_i` of `A_k`.
    pub fn corner(&self, k: f64) -> Vec<f64> {
        self.d.iter().zip(&self.c).map(|(d, c)| d + k * self.theta * c).collect()
    }

    pub fn contains(&self, k: f64, u: &[f64]) -> bool {
        u.iter().zip(self.corner(k)).all(|(x, hi)| *x >= 0.0 && *x < hi)
    }

    /// Componentwise bounds that define entry: `dbar_i < u_i < d_i` on the
    /// persistent set and `u_j < d_j` elsewhere.
    pub fn entered(&self, u: &[f64]) -> bool {
        (0..self.n()).all(|i| {
            let upper = u[i] < self.d[i];
            if self.persistent.contains(i) {
                upper && u[i] > self.dbar[i]
            } else {
                upper
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// Earliest sampled time after which the entry bounds hold to the end.
    pub entry_time: Option<f64>,
    /// Largest `u_j(t) / (d_j e^{-eps (t - t*)})` over extinct species and
    /// sampled `t >= t*`.
    pub worst_ratio: f64,
    pub samples: usize,
}

/// First sampled time from which `entered` holds on every later sample.
pub fn entry_time(boxes: &BoxFamily, grid: &TrajectoryGrid, dt: f64) -> Option<f64> {
    let times = grid.uniform_times(dt);
    let mut entry = None;
    for &t in &times {
        let u = grid.at(t)?;
        if boxes.entered(&u) {
            entry.get_or_insert(t);
        } else {
            entry = None;
        }
    }
    entry
}

/// Integrate from `(t0, u0)` over `horizon` and compare the extinct species
/// with the envelope `d_j e^{-eps (t - t*)}`.
pub fn extinction_envelope(spec: &SystemSpec, boxes: &BoxFamily, u0: &[f64], t0: f64, horizon: f64, dt: f64) -> Result<EnvelopeReport, SkeletonError> {
    let grid = integrate(spec, t0, u0, t0 + horizon, 1e-10, 1e-14)?;
    let Some(ts) = entry_time(boxes, &grid, dt) else {
        return Ok(EnvelopeReport { entry_time: None, worst_ratio: f64::INFINITY, samples: 0 });
    };
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for t in grid.uniform_times(dt).into_iter().filter(|&t| t >= ts) {
        let u = grid.at(t).expect("sample inside grid");
        for j in boxes.persistent.absent() {
            worst = worst.max(u[j] / (boxes.d[j] * (-boxes.eps * (t - ts)).exp()));
        }
        samples += 1;
    }
    Ok(EnvelopeReport { entry_time: Some(ts), worst_ratio: worst, samples })
}

/// Latest sampled time at which a forward trajectory from inside `A_k`
/// is outside it, if any.
pub fn box_exit(spec: &SystemSpec, boxes: &BoxFamily, k: f64, u0: &[f64], t0: f64, horizon: f64, dt: f64) -> Result<Option<f64>, SkeletonError> {
    if !boxes.contains(k, u0) {
        return Err(SkeletonError::Precondition(format!("initial point is not in the box of index {k}")));
    }
    let grid = integrate(spec, t0, u0, t0 + horizon, 1e-10, 1e-14)?;
    for t in grid.uniform_times(dt) {
        if !boxes.contains(k, &grid.at(t).expect("sample inside grid")) {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family() -> BoxFamily {
        BoxFamily {
            persistent: SupportSet::from_present(2, [0]),
            c: vec![1.0, 1.0],
            d: vec![3.0, 0.5],
            dbar: vec![1.0, 0.0],
            eps: 0.5,
            theta: 0.25,
        }
    }

    #[test]
    fn corners_and_entry() {
        let b = family();
        assert_eq!(b.corner(2.0), vec![3.5, 1.0]);
        assert!(b.contains(0.0, &[2.9, 0.4]));
        assert!(!b.contains(0.0, &[3.0, 0.4]));
        assert!(b.entered(&[2.0, 0.1]));
        assert!(!b.entered(&[0.5, 0.1]));
    }

    #[test]
    fn decoupled_extinction_envelope() {
        // u1 logistic towards 2, u2' = -u2 (u2 + 1)
        let spec = SystemSpec::parse(&["2", "0-1"], &[&["1", "0"], &["0", "1"]]).unwrap();
        let b = family();
        let rep = extinction_envelope(&spec, &b, &[0.2, 0.8], 0.0, 30.0, 0.01).unwrap();
        let ts = rep.entry_time.unwrap();
        assert!(ts > 0.0 && ts < 10.0);
        assert!(rep.worst_ratio <= 1.0 + 1e-6, "{}", rep.worst_ratio);
        assert_eq!(box_exit(&spec, &b, 1.0, &[3.0, 0.5], 0.0, 30.0, 0.01).unwrap(), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn boxes_are_forward_invariant(k in prop::sample::select(vec![0.0, 1.0, 3.0]), x in 0.0f64..1.0, y in 0.0f64..1.0) {
                let spec = SystemSpec::parse(&["2", "0-1"], &[&["1", "-0.1"], &["-0.1", "1"]]).unwrap();
                let b = family();
                let hi = b.corner(k);
                let u0 = [x * hi[0], y * hi[1]];
                prop_assert_eq!(box_exit(&spec, &b, k, &u0, 0.0, 40.0, 0.05).unwrap(), None);
            }
        }
    }
}
