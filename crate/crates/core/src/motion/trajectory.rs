//! Per-segment trapezoidal velocity profiles, synchronized across joints
//! and sampled for export.
//!
//! Every waypoint-to-waypoint segment is profiled independently with zero
//! boundary velocity: each joint gets the time-optimal trapezoid (or
//! triangle, when the move is too short to reach cruise speed) at the
//! derated caps, then all joints are re-timed to finish together with the
//! slowest one. Re-timing keeps the acceleration at the cap and lowers the
//! peak velocity, so the caps hold by construction.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::motion::gantry::{GantryModel, JointState};

/// Gantry axes run at 20% of their rated limits to keep the heavy axes
/// from oscillating plant tissue.
pub const VELOCITY_CAP_FRACTION: f64 = 0.2;
pub const ACCEL_CAP_FRACTION: f64 = 0.2;

/// Export sample rate for trajectory CSVs.
pub const CSV_SAMPLE_HZ: f64 = 100.0;

#[derive(Debug, Clone, Copy, Serialize)]
struct JointProfile {
    /// Signed acceleration magnitude (cap with the sign of the move).
    accel: f64,
    /// Signed peak velocity.
    v_peak: f64,
    t_acc: f64,
    t_cruise: f64,
}

impl JointProfile {
    fn stationary(duration: f64) -> Self {
        Self {
            accel: 0.0,
            v_peak: 0.0,
            t_acc: 0.0,
            t_cruise: duration,
        }
    }

    /// Position/velocity/acceleration offsets at local time `tau`.
    fn eval(&self, tau: f64) -> (f64, f64, f64) {
        let ta = self.t_acc;
        let tc = self.t_cruise;
        let end = 2.0 * ta + tc;
        let tau = tau.clamp(0.0, end);
        if tau < ta {
            (0.5 * self.accel * tau * tau, self.accel * tau, self.accel)
        } else if tau < ta + tc {
            let dc = tau - ta;
            (
                0.5 * self.accel * ta * ta + self.v_peak * dc,
                self.v_peak,
                0.0,
            )
        } else {
            let dd = tau - ta - tc;
            let v = self.v_peak - self.accel * dd;
            (
                0.5 * self.accel * ta * ta + self.v_peak * tc + self.v_peak * dd
                    - 0.5 * self.accel * dd * dd,
                if dd >= ta { 0.0 } else { v },
                -self.accel,
            )
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Segment {
    start: [f64; 6],
    t_start: f64,
    duration: f64,
    joints: [JointProfile; 6],
}

/// Piecewise trapezoidal joint trajectory. Analytic inside; sampled only
/// for export and checking.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    segments: Vec<Segment>,
    duration: f64,
    end: [f64; 6],
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Joint positions, velocities and accelerations at time `t` (clamped
    /// to the trajectory span).
    pub fn sample(&self, t: f64) -> ([f64; 6], [f64; 6], [f64; 6]) {
        let mut q = self.end;
        let mut v = [0.0; 6];
        let mut a = [0.0; 6];
        if self.segments.is_empty() {
            return (q, v, a);
        }
        let t = t.clamp(0.0, self.duration);
        let seg = match self
            .segments
            .iter()
            .rposition(|s| s.t_start <= t)
        {
            Some(i) => &self.segments[i],
            None => &self.segments[0],
        };
        let tau = t - seg.t_start;
        for j in 0..6 {
            let (dq, vj, aj) = seg.joints[j].eval(tau);
            q[j] = seg.start[j] + dq;
            v[j] = vj;
            a[j] = aj;
        }
        (q, v, a)
    }

    /// Segment and phase boundaries (s); sampling that includes these
    /// points makes trapezoid-rule integration of the velocity exact.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0];
        for seg in &self.segments {
            for j in &seg.joints {
                pts.push(seg.t_start + j.t_acc);
                pts.push(seg.t_start + j.t_acc + j.t_cruise);
                pts.push(seg.t_start + 2.0 * j.t_acc + j.t_cruise);
            }
            pts.push(seg.t_start + seg.duration);
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }

    /// Fixed-rate CSV export: `t, x, y, z, yaw, pitch, roll, v_x ... v_roll`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "t,x,y,z,yaw,pitch,roll,v_x,v_y,v_z,v_yaw,v_pitch,v_roll"
        )?;
        let dt = 1.0 / CSV_SAMPLE_HZ;
        let steps = (self.duration / dt).ceil() as usize;
        for i in 0..=steps {
            let t = (i as f64 * dt).min(self.duration);
            let (q, v, _) = self.sample(t);
            write!(w, "{t:.4}")?;
            for x in q.iter().chain(v.iter()) {
                write!(w, ",{x:.9}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Time-optimal single-joint trapezoid time for distance `d` at caps
/// `(v, a)`.
fn min_time(d: f64, v: f64, a: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if d * a <= v * v {
        2.0 * (d / a).sqrt()
    } else {
        d / v + v / a
    }
}

/// Profile one joint to cover `d` (signed) in exactly `duration` seconds at
/// acceleration cap `a`.
fn retime(d: f64, a: f64, duration: f64) -> JointProfile {
    let dist = d.abs();
    if dist == 0.0 || duration <= 0.0 {
        return JointProfile::stationary(duration.max(0.0));
    }
    let sign = d.signum();
    // v² - a T v + a d = 0; the smaller root is the feasible peak.
    let disc = (a * duration).powi(2) - 4.0 * a * dist;
    let v_peak = (a * duration - disc.max(0.0).sqrt()) / 2.0;
    let t_acc = v_peak / a;
    let t_cruise = (duration - 2.0 * t_acc).max(0.0);
    JointProfile {
        accel: sign * a,
        v_peak: sign * v_peak,
        t_acc,
        t_cruise,
    }
}

/// Build the synchronized trapezoidal trajectory over a waypoint path. A
/// path with fewer than two waypoints yields an empty trajectory.
pub fn trapezoid_profile(path: &[JointState], model: &GantryModel) -> Result<Trajectory> {
    model.validate()?;
    let v_caps: Vec<f64> = model.v_max.iter().map(|v| v * VELOCITY_CAP_FRACTION).collect();
    let a_caps: Vec<f64> = model.a_max.iter().map(|a| a * ACCEL_CAP_FRACTION).collect();

    let mut segments = Vec::new();
    let mut t_start = 0.0;
    for pair in path.windows(2) {
        let (from, to) = (&pair[0], &pair[1]);
        let mut duration = 0.0f64;
        let mut deltas = [0.0; 6];
        for j in 0..6 {
            deltas[j] = to.q[j] - from.q[j];
            duration = duration.max(min_time(deltas[j].abs(), v_caps[j], a_caps[j]));
        }
        if duration == 0.0 {
            continue; // coincident waypoints
        }
        if !duration.is_finite() {
            return Err(Error::Input("non-finite waypoint delta".into()));
        }
        let mut joints = [JointProfile::stationary(duration); 6];
        for j in 0..6 {
            joints[j] = retime(deltas[j], a_caps[j], duration);
        }
        segments.push(Segment {
            start: from.q,
            t_start,
            duration,
            joints,
        });
        t_start += duration;
    }
    let end = path.last().map(|s| s.q).unwrap_or([0.0; 6]);
    Ok(Trajectory {
        segments,
        duration: t_start,
        end,
    })
}
