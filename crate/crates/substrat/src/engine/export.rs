//! Trace and summary export. Reruns are byte-identical except for the
//! timestamp, which is isolated to a single header line in each artifact.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::trajectory::{tail_diameters, Trajectory, Verdict};

pub const TRACE_SCHEMA: &str = "trace-v1";

/// Trace CSV: one row per iterate with header
/// `k, x_0..x_{n-1}, f, alpha, vnorm, policy`. The final row has no step, so
/// its alpha/vnorm columns are empty.
pub fn trace_csv(traj: &Trajectory, config_hash: u64, timestamp: &str) -> String {
    let n = traj.points[0].len();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# schema: {TRACE_SCHEMA} config_hash={config_hash:016x} seed={} truncated={}",
        traj.seed, traj.left_domain
    );
    let _ = writeln!(out, "# timestamp: {timestamp}");
    let mut header = String::from("k");
    for i in 0..n {
        let _ = write!(header, ",x_{i}");
    }
    header.push_str(",f,alpha,vnorm,policy");
    let _ = writeln!(out, "{header}");
    for (k, p) in traj.points.iter().enumerate() {
        let _ = write!(out, "{k}");
        for i in 0..n {
            let _ = write!(out, ",{}", p[i]);
        }
        let _ = write!(out, ",{}", traj.values[k]);
        if k < traj.horizon() {
            let _ = write!(
                out,
                ",{},{},{}",
                traj.steps[k],
                traj.subgradients[k].norm(),
                traj.policy.tag()
            );
        } else {
            let _ = write!(out, ",,,{}", traj.policy.tag());
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    /// the only line that may differ between reruns
    pub timing: String,
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
    pub policy: String,
    pub truncated: bool,
    pub final_point: Vec<f64>,
    pub final_value: f64,
    pub verdict: Verdict,
    /// (k, diam(x_[k..K])) subsampled to at most 64 entries
    pub tail_diameter_curve: Vec<(usize, f64)>,
}

pub fn summarize(
    traj: &Trajectory,
    verdict: Verdict,
    config_hash: u64,
    wall_seconds: f64,
    timestamp: &str,
) -> RunSummary {
    let tails = tail_diameters(traj);
    let total = tails.len();
    let stride = (total / 64).max(1);
    let curve: Vec<(usize, f64)> = (0..total).step_by(stride).map(|k| (k, tails[k])).collect();
    RunSummary {
        timing: format!("{timestamp} wall={wall_seconds:.3}s"),
        schema: TRACE_SCHEMA.into(),
        config_hash: format!("{config_hash:016x}"),
        seed: traj.seed,
        policy: traj.policy.tag().into(),
        truncated: traj.left_domain,
        final_point: traj.last_point().iter().copied().collect(),
        final_value: *traj.values.last().expect("nonempty"),
        verdict,
        tail_diameter_curve: curve,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::schedule::StepSchedule;
    use crate::engine::trajectory::{detect_convergence, run};
    use crate::minnorm::SelectionPolicy;

    #[test]
    fn csv_shape_and_determinism() {
        let f = crate::corpus::get("quad1d").unwrap().function;
        let t = run(
            &f,
            &nalgebra::DVector::from_vec(vec![1.0]),
            &StepSchedule::Constant { c: 0.1 },
            SelectionPolicy::MinNorm,
            5,
            3,
            1e-9,
        )
        .unwrap();
        let a = trace_csv(&t, 0xabcd, "T0");
        let b = trace_csv(&t, 0xabcd, "T1");
        let strip = |s: &str| {
            s.lines()
                .filter(|l| !l.starts_with("# timestamp"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&a), strip(&b));
        assert_ne!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert!(lines[2].starts_with("k,x_0,f,alpha,vnorm,policy"));
        assert_eq!(lines.len(), 3 + 6);
        // last row's alpha/vnorm are empty
        assert!(lines.last().unwrap().contains(",,,"));

        let v = detect_convergence(&t, 1e-6);
        let s = summarize(&t, v, 0xabcd, 0.0, "T0");
        let js = serde_json::to_string_pretty(&s).unwrap();
        assert!(js.lines().nth(1).unwrap().contains("\"timing\""));
    }
}
