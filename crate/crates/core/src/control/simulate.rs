use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::controller::{Controller, FeedbackLaw};
use super::rng::{Channel, GaussianStream};
use crate::error::{Error, Result};
use crate::lti::{decompose, StateSpaceModel};

/// State-norm threshold that flags a diverging loop.
pub const INSTABILITY_GUARD: f64 = 1e12;

/// Standard deviations of the excitation, process and measurement noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_c: f64,
    pub sigma_w: f64,
    pub sigma_v: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_c: f64, sigma_w: f64, sigma_v: f64, seed: u64) -> Result<Self> {
        for (name, s) in [("sigma_c", sigma_c), ("sigma_w", sigma_w), ("sigma_v", sigma_v)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Domain(format!("{name} must be finite and nonnegative, got {s}")));
            }
        }
        Ok(Self { sigma_c, sigma_w, sigma_v, seed })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Signals a learner never sees. Columns are time samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub f: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub xs: DMatrix<f64>,
    pub xu: DMatrix<f64>,
}

/// One closed-loop record of length `ℓ + 1`; columns are samples `k = 0..=ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub c: Option<DMatrix<f64>>,
    pub truth: Option<GroundTruth>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.u.ncols()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn p(&self) -> usize {
        self.u.nrows()
    }
    pub fn m(&self) -> usize {
        self.y.nrows()
    }

    /// The first `len` samples. Samples of a causal recursion do not depend
    /// on later ones, so a prefix is itself a valid trajectory.
    pub fn prefix(&self, len: usize) -> Result<Trajectory> {
        if len > self.len() {
            return Err(Error::Range(format!("prefix {len} exceeds trajectory length {}", self.len())));
        }
        let cut = |m: &DMatrix<f64>| m.columns(0, len).into_owned();
        Ok(Trajectory {
            u: cut(&self.u),
            y: cut(&self.y),
            c: self.c.as_ref().map(cut),
            truth: self.truth.as_ref().map(|t| GroundTruth {
                f: cut(&t.f),
                w: cut(&t.w),
                v: cut(&t.v),
                x: cut(&t.x),
                xs: cut(&t.xs),
                xu: cut(&t.xu),
            }),
        })
    }

    /// Drops the ground-truth channels.
    pub fn observed(&self) -> Trajectory {
        Trajectory { truth: None, ..self.clone() }
    }

    /// Writes `k,u_*,y_*,c_*` and, when present and requested, `f_*,w_*,v_*,x_*`.
    /// Values use the shortest representation that parses back to the same bits.
    pub fn write_csv<W: Write>(&self, out: W, with_truth: bool) -> Result<()> {
        let mut blocks: Vec<(&str, &DMatrix<f64>)> = vec![("u", &self.u), ("y", &self.y)];
        if let Some(c) = &self.c {
            blocks.push(("c", c));
        }
        if with_truth {
            if let Some(t) = &self.truth {
                blocks.extend([("f", &t.f), ("w", &t.w), ("v", &t.v), ("x", &t.x)]);
            }
        }
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string()];
        for (name, m) in &blocks {
            header.extend((1..=m.nrows()).map(|i| format!("{name}_{i}")));
        }
        wtr.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![k.to_string()];
            for (_, m) in &blocks {
                row.extend(m.column(k).iter().map(|v| v.to_string()));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `u_*`, `y_*` and optional `c_*` columns; other columns, including
    /// ground truth, are ignored. Rows must be in order `k = 0, 1, …`.
    pub fn read_csv<R: Read>(input: R) -> Result<Trajectory> {
        Ok(Self::read_csv_with_feedback(input)?.0)
    }

    /// As [`Trajectory::read_csv`], also returning the recorded feedback
    /// signal `f_*` when the file carries it.
    pub fn read_csv_with_feedback<R: Read>(input: R) -> Result<(Trajectory, Option<DMatrix<f64>>)> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rdr.headers()?.clone();
        let cols_of = |prefix: &str| -> Result<Vec<usize>> {
            let mut found: Vec<(usize, usize)> = Vec::new();
            for (pos, h) in header.iter().enumerate() {
                if let Some(idx) = h.strip_prefix(prefix).and_then(|s| s.strip_prefix('_')) {
                    let i: usize = idx.parse().map_err(|_| Error::Parse {
                        line: 1,
                        msg: format!("bad column name `{h}`"),
                    })?;
                    found.push((i, pos));
                }
            }
            found.sort();
            for (want, (i, _)) in found.iter().enumerate() {
                if *i != want + 1 {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("columns {prefix}_* must be numbered 1..n without gaps"),
                    });
                }
            }
            Ok(found.into_iter().map(|(_, pos)| pos).collect())
        };
        let k_col = header.iter().position(|h| h == "k");
        let (uc, yc, cc, fc) = (cols_of("u")?, cols_of("y")?, cols_of("c")?, cols_of("f")?);
        if uc.is_empty() || yc.is_empty() {
            return Err(Error::Parse { line: 1, msg: "header needs u_1.. and y_1.. columns".into() });
        }
        if !fc.is_empty() && fc.len() != uc.len() {
            return Err(Error::Parse {
                line: 1,
                msg: format!("{} feedback columns for {} inputs", fc.len(), uc.len()),
            });
        }
        if !cc.is_empty() && cc.len() != uc.len() {
            return Err(Error::Parse {
                line: 1,
                msg: format!("{} excitation columns for {} inputs", cc.len(), uc.len()),
            });
        }
        let (mut u, mut y, mut c, mut f) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut count = 0usize;
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let get = |pos: usize| -> Result<f64> {
                let s = rec.get(pos).unwrap_or("");
                let v: f64 = s.parse().map_err(|_| Error::Parse { line, msg: format!("`{s}` is not a number") })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, msg: format!("non-finite value `{s}`") });
                }
                Ok(v)
            };
            if let Some(kc) = k_col {
                let k: usize = rec.get(kc).unwrap_or("").parse().map_err(|_| Error::Parse {
                    line,
                    msg: "bad sample index".into(),
                })?;
                if k != count {
                    return Err(Error::Parse { line, msg: format!("expected k = {count}, found {k}") });
                }
            }
            for &pos in &uc {
                u.push(get(pos)?);
            }
            for &pos in &yc {
                y.push(get(pos)?);
            }
            for &pos in &cc {
                c.push(get(pos)?);
            }
            for &pos in &fc {
                f.push(get(pos)?);
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Data("trajectory CSV has no samples".into()));
        }
        let traj = Trajectory {
            u: DMatrix::from_vec(uc.len(), count, u),
            y: DMatrix::from_vec(yc.len(), count, y),
            c: (!cc.is_empty()).then(|| DMatrix::from_vec(cc.len(), count, c)),
            truth: None,
        };
        Ok((traj, (!fc.is_empty()).then(|| DMatrix::from_vec(fc.len(), count, f))))
    }
}

/// Draws `c`, `w`, `v` for `length` samples from independent seeded streams.
pub fn draw_signals(model: &StateSpaceModel, noise: &NoiseSpec, length: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let draw = |rows: usize, sigma: f64, ch: Channel| {
        let mut g = GaussianStream::new(noise.seed, ch);
        let mut m = DMatrix::zeros(rows, length);
        g.fill(m.as_mut_slice(), sigma);
        m
    };
    (
        draw(model.p(), noise.sigma_c, Channel::Excitation),
        draw(model.l(), noise.sigma_w, Channel::Process),
        draw(model.m(), noise.sigma_v, Channel::Measurement),
    )
}

/// Runs the loop `u = f + c` on explicit signal sequences.
pub fn simulate_with_signals(
    model: &StateSpaceModel,
    law: &mut dyn FeedbackLaw,
    c: &DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<Trajectory> {
    let len = c.ncols();
    if c.nrows() != model.p() || w.shape() != (model.l(), len) || v.shape() != (model.m(), len) {
        return Err(Error::Dimension("excitation/noise sequences do not match the plant".into()));
    }
    let (a, b, bw, cm, dm) = (model.a(), model.b(), model.bw(), model.c(), model.d());
    let mut x = DVector::zeros(model.n());
    let mut xs = DMatrix::zeros(model.n(), len);
    let mut fs = DMatrix::zeros(model.p(), len);
    let mut us = DMatrix::zeros(model.p(), len);
    let mut ys = DMatrix::zeros(model.m(), len);
    for k in 0..len {
        let f = law.feedback(&x);
        let u = &f + c.column(k);
        let y = cm * &x + dm * &u + v.column(k);
        law.observe(&y);
        xs.set_column(k, &x);
        fs.set_column(k, &f);
        us.set_column(k, &u);
        ys.set_column(k, &y);
        x = a * &x + b * &u + bw * w.column(k);
        let norm = x.norm();
        if !(norm <= INSTABILITY_GUARD) {
            return Err(Error::Instability { index: k + 1, norm });
        }
    }
    let dec = decompose(model, model.unit_circle_tol())?;
    let (x_s, x_u) = dec.split_states(&xs);
    Ok(Trajectory {
        u: us,
        y: ys,
        c: Some(c.clone()),
        truth: Some(GroundTruth { f: fs, w: w.clone(), v: v.clone(), x: xs, xs: x_s, xu: x_u }),
    })
}

/// Simulates `x(k+1) = Ax + Bu + B_w w`, `y = Cx + Du + v`, `u = f + c`
/// from `x(0) = 0` for `length` samples.
pub fn simulate_closed_loop(
    model: &StateSpaceModel,
    ctrl: &Controller,
    noise: &NoiseSpec,
    length: usize,
) -> Result<Trajectory> {
    let mut law = ctrl.law(model)?;
    simulate_with_law(model, law.as_mut(), noise, length)
}

/// As [`simulate_closed_loop`] for an arbitrary strictly causal law.
pub fn simulate_with_law(
    model: &StateSpaceModel,
    law: &mut dyn FeedbackLaw,
    noise: &NoiseSpec,
    length: usize,
) -> Result<Trajectory> {
    let (c, w, v) = draw_signals(model, noise, length);
    simulate_with_signals(model, law, &c, &w, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::design_lqr;
    use crate::lti::presets;

    fn lqr4() -> Controller {
        design_lqr(&presets::example4(), &DMatrix::identity(3, 3), &DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn silent_loop_stays_at_rest() {
        let model = presets::stable_siso();
        let noise = NoiseSpec::new(0.0, 0.0, 0.0, 3).unwrap();
        let traj = simulate_closed_loop(&model, &Controller::Zero, &noise, 50).unwrap();
        assert!(traj.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_u_equals_f_plus_c() {
        let model = presets::example4();
        let noise = NoiseSpec::new(1.0, 0.3, 0.1, 11).unwrap();
        let a = simulate_closed_loop(&model, &lqr4(), &noise, 300).unwrap();
        let b = simulate_closed_loop(&model, &lqr4(), &noise, 300).unwrap();
        assert_eq!(a, b);
        let t = a.truth.as_ref().unwrap();
        assert_eq!(a.u, &t.f + a.c.as_ref().unwrap());
    }

    #[test]
    fn open_loop_unstable_plant_trips_guard() {
        let model = presets::example4();
        let noise = NoiseSpec::new(0.0, 1.0, 0.0, 1).unwrap();
        let err = simulate_closed_loop(&model, &Controller::Zero, &noise, 500).unwrap_err();
        assert!(matches!(err, Error::Instability { index, .. } if index < 100));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let model = presets::example4();
        let noise = NoiseSpec::new(1.0, 0.5, 0.2, 5).unwrap();
        let traj = simulate_closed_loop(&model, &lqr4(), &noise, 64).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, true).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, traj.observed());
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = "k,u_1,y_1,c_1\n0,1,2,3\n1,1,oops,3\n";
        match Trajectory::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prefix_matches_shorter_run() {
        let model = presets::example4();
        let noise = NoiseSpec::new(1.0, 0.5, 0.2, 9).unwrap();
        let long = simulate_closed_loop(&model, &lqr4(), &noise, 200).unwrap();
        let short = simulate_closed_loop(&model, &lqr4(), &noise, 120).unwrap();
        assert_eq!(long.prefix(120).unwrap(), short);
    }
}
