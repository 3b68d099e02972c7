//! Acceptance criteria for the nvcavity models, run by the `acceptance`
//! test target. Each check returns an [`Outcome`]; runtime limits are applied
//! by the runner.

use std::time::Duration;

pub mod cavity;
pub mod determinism;
pub mod hierarchy;
pub mod levels;
pub mod maser;
pub mod reconstruction;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
    /// Extra lines printed under the verdict.
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into(), notes: Vec::new() }
    }

    pub fn note(mut self, line: impl Into<String>) -> Self {
        self.notes.push(line.into());
        self
    }

    pub fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub limit: Option<Duration>,
    pub run: fn() -> Outcome,
}

const fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "bridge equivalence", limit: secs(1), run: cavity::bridge },
        Criterion { id: 2, name: "splitting formula", limit: secs(1), run: cavity::splitting_formula },
        Criterion { id: 3, name: "avoided-crossing fit round trip", limit: secs(30), run: cavity::crossing_fit },
        Criterion { id: 4, name: "cumulant closure vs exact oracle", limit: secs(60), run: hierarchy::closure_vs_oracle },
        Criterion { id: 5, name: "pinned inversion reduction", limit: secs(10), run: hierarchy::pinned_reduction },
        Criterion { id: 6, name: "temperature law", limit: secs(300), run: hierarchy::temperature_law },
        Criterion { id: 7, name: "reconstruction round trip", limit: secs(120), run: reconstruction::round_trip },
        Criterion { id: 8, name: "weight conservation", limit: None, run: reconstruction::weight },
        Criterion { id: 9, name: "cavity-protection pole track", limit: secs(30), run: cavity::pole_track },
        Criterion { id: 10, name: "splitting vs width asymmetry", limit: secs(30), run: cavity::width_asymmetry },
        Criterion { id: 11, name: "maser floor and region", limit: secs(300), run: maser::floor_and_region },
        Criterion { id: 12, name: "maser sum rule", limit: None, run: maser::sum_rule },
        Criterion { id: 13, name: "NV levels", limit: secs(5), run: levels::levels },
        Criterion { id: 14, name: "determinism", limit: None, run: determinism::determinism },
    ]
}

/// Maximum of a unimodal `f` on [a, b] by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_vertex() {
        let x = golden_max(|x| -(x - 0.3).powi(2), -2.0, 5.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
    }
}
