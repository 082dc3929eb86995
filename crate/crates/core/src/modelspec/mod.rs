//! Scenario definition: `h(t,x)`, `m(t,x)` and `u(t,x)` as expressions, sampled with exact derivatives.

pub mod dual;
pub mod expr;

use std::f64::consts::PI;

pub use dual::{Dual, Scalar};
pub use expr::{parse_expr, BinaryOp, ExprAst, UnaryOp};

use crate::error::{Error, Result};

pub const DEFAULT_H_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    pub h: ExprAst,
    pub m: ExprAst,
    pub u: ExprAst,
    pub t_min: f64,
    pub t_max: f64,
    /// Spacetime dimension (2, or 4 with two flat transverse directions).
    pub n: usize,
    pub h_floor: f64,
}

/// Values and first derivatives of the model fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    pub h: Dual,
    pub m: Dual,
    pub u: Dual,
}

impl MetricModel {
    pub fn new(h: ExprAst, m: ExprAst, u: ExprAst, t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return Err(Error::Dimension(format!("time interval [{t_min}, {t_max}] is empty")));
        }
        if n != 2 && n != 4 {
            return Err(Error::Dimension(format!("spacetime dimension {n} not supported (2 or 4)")));
        }
        Ok(Self { h, m, u, t_min, t_max, n, h_floor: DEFAULT_H_FLOOR })
    }

    pub fn parse(h: &str, m: &str, u: &str, t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        Self::new(parse_expr(h)?, parse_expr(m)?, parse_expr(u)?, t_min, t_max, n)
    }

    pub fn with_interval(&self, t_min: f64, t_max: f64) -> Result<Self> {
        Self::new(self.h.clone(), self.m.clone(), self.u.clone(), t_min, t_max, self.n).map(|m| Self { h_floor: self.h_floor, ..m })
    }

    fn eval_field(e: &ExprAst, t: f64, x: f64) -> Result<Dual> {
        e.eval(Dual::var_t(t), Dual::var_x(x)).map_err(|message| Error::Eval { t, x, message })
    }

    /// All fields with derivatives; enforces the ellipticity floor on `h`.
    pub fn point(&self, t: f64, x: f64) -> Result<ModelPoint> {
        let h = Self::eval_field(&self.h, t, x)?;
        if !(h.v >= self.h_floor) {
            return Err(Error::Ellipticity { t, x, value: h.v, floor: self.h_floor });
        }
        Ok(ModelPoint { h, m: Self::eval_field(&self.m, t, x)?, u: Self::eval_field(&self.u, t, x)? })
    }

    pub fn is_static(&self) -> bool {
        !self.h.depends_on_t() && !self.m.depends_on_t()
    }

    pub fn has_conformal_factor(&self) -> bool {
        self.u != ExprAst::Const(0.0)
    }

    /// Time-reversed scenario `t ↦ −t` on the mirrored interval.
    pub fn time_reversed(&self) -> Self {
        let neg_t = ExprAst::unary(UnaryOp::Neg, ExprAst::T);
        Self {
            h: self.h.substitute_t(&neg_t),
            m: self.m.substitute_t(&neg_t),
            u: self.u.substitute_t(&neg_t),
            t_min: -self.t_max,
            t_max: -self.t_min,
            ..self.clone()
        }
    }

    /// Largest `|f(t, 0) − f(t, 2π)|` over `h`, `m`, `u` at the given times.
    pub fn periodicity_defect(&self, times: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &t in times {
            for e in [&self.h, &self.m, &self.u] {
                let a = e.eval(t, 0.0).map_err(|message| Error::Eval { t, x: 0.0, message })?;
                let b = e.eval(t, 2.0 * PI).map_err(|message| Error::Eval { t, x: 2.0 * PI, message })?;
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

/// Uniform samples of all fields on `times × {2πj/M}`; arrays are indexed `[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledModel {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub h_t: Vec<Vec<f64>>,
    pub h_x: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub m_t: Vec<Vec<f64>>,
    pub m_x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub u_t: Vec<Vec<f64>>,
    pub u_x: Vec<Vec<f64>>,
}

pub fn uniform_times(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| if i + 1 == count { t_max } else { t_min + (t_max - t_min) * i as f64 / (count - 1) as f64 }).collect()
}

pub fn sample_model(model: &MetricModel, t_n: usize, m_n: usize) -> Result<SampledModel> {
    if t_n < 2 {
        return Err(Error::Dimension(format!("need at least 2 time samples, got {t_n}")));
    }
    sample_at(model, &uniform_times(model.t_min, model.t_max, t_n), m_n)
}

/// Samples at arbitrary times. Reports the grid point with the smallest `h` on a floor violation.
pub fn sample_at(model: &MetricModel, times: &[f64], m_n: usize) -> Result<SampledModel> {
    if m_n < 4 || m_n % 2 != 0 {
        return Err(Error::Dimension(format!("space grid must be even and at least 4, got {m_n}")));
    }
    let x = crate::psdo::x_points(m_n);
    let mut s = SampledModel {
        t: times.to_vec(),
        x: x.clone(),
        h: vec![],
        h_t: vec![],
        h_x: vec![],
        m: vec![],
        m_t: vec![],
        m_x: vec![],
        u: vec![],
        u_t: vec![],
        u_x: vec![],
    };
    let mut worst: Option<(f64, f64, f64)> = None;
    for &t in times {
        let mut rows: [Vec<f64>; 9] = Default::default();
        for &xj in &x {
            let h = MetricModel::eval_field(&model.h, t, xj)?;
            if !(h.v >= model.h_floor) && worst.is_none_or(|w| h.v < w.2 || h.v.is_nan()) {
                worst = Some((t, xj, h.v));
            }
            let m = MetricModel::eval_field(&model.m, t, xj)?;
            let u = MetricModel::eval_field(&model.u, t, xj)?;
            for (row, v) in rows.iter_mut().zip([h.v, h.dt, h.dx, m.v, m.dt, m.dx, u.v, u.dt, u.dx]) {
                row.push(v);
            }
        }
        let [h, h_t, h_x, m, m_t, m_x, u, u_t, u_x] = rows;
        s.h.push(h);
        s.h_t.push(h_t);
        s.h_x.push(h_x);
        s.m.push(m);
        s.m_t.push(m_t);
        s.m_x.push(m_x);
        s.u.push(u);
        s.u_t.push(u_t);
        s.u_x.push(u_x);
    }
    if let Some((t, x, value)) = worst {
        return Err(Error::Ellipticity { t, x, value, floor: model.h_floor });
    }
    Ok(s)
}

/// Largest disagreement between the dual-number derivatives of `h`, `m`, `u` and fourth-order
/// central differences with step `step`, relative to the sup of each derivative over the samples.
pub fn derivative_discrepancy(model: &MetricModel, times: &[f64], xs: &[f64], step: f64) -> Result<f64> {
    let fd = |e: &ExprAst, t: f64, x: f64, along_t: bool| -> Result<f64> {
        let at = |s: f64| {
            let (tt, xx) = if along_t { (t + s * step, x) } else { (t, x + s * step) };
            MetricModel::eval_field(e, tt, xx).map(|d| d.v)
        };
        Ok((8.0 * (at(1.0)? - at(-1.0)?) - (at(2.0)? - at(-2.0)?)) / (12.0 * step))
    };
    let mut worst: f64 = 0.0;
    for e in [&model.h, &model.m, &model.u] {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &t in times {
            for &x in xs {
                let d = MetricModel::eval_field(e, t, x)?;
                diff = diff.max((d.dt - fd(e, t, x, true)?).abs()).max((d.dx - fd(e, t, x, false)?).abs());
                scale = scale.max(d.dt.abs()).max(d.dx.abs());
            }
        }
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        } else {
            worst = worst.max(diff);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_derivatives_match_differences() {
        let m = MetricModel::parse("(1+0.2*tanh(t)*cos(x))^2", "1+0.1*sin(x+t)", "0.3*exp(-t^2)*cos(2*x)", -1.0, 1.0, 2).unwrap();
        let times = [-0.7, 0.0, 0.4];
        let xs = crate::psdo::x_points(8);
        assert!(derivative_discrepancy(&m, &times, &xs, 1e-3).unwrap() < 1e-8);
    }

    #[test]
    fn flat_has_zero_derivatives() {
        let m = MetricModel::parse("1", "1", "0", 0.0, 1.0, 2).unwrap();
        let s = sample_model(&m, 3, 8).unwrap();
        assert!(s.h_t.iter().flatten().all(|&v| v == 0.0));
        assert!(s.h_x.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn ellipticity_error_names_worst_point() {
        let m = MetricModel::parse("cos(x)", "1", "0", 0.0, 1.0, 2).unwrap();
        match sample_model(&m, 2, 8).unwrap_err() {
            Error::Ellipticity { x, value, .. } => {
                assert!((x - PI).abs() < 1e-12);
                assert!((value + 1.0).abs() < 1e-12);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn grid_preconditions() {
        let m = MetricModel::parse("1", "1", "0", 0.0, 1.0, 2).unwrap();
        assert!(sample_model(&m, 1, 8).is_err());
        assert!(sample_model(&m, 2, 7).is_err());
        assert!(sample_model(&m, 2, 2).is_err());
    }

    #[test]
    fn periodicity_defect_detects_nonperiodic() {
        let good = MetricModel::parse("1+0.1*cos(x)", "1", "0", 0.0, 1.0, 2).unwrap();
        let bad = MetricModel::parse("1+0.01*x", "1", "0", 0.0, 1.0, 2).unwrap();
        assert!(good.periodicity_defect(&[0.0, 1.0]).unwrap() < 1e-12);
        assert!(bad.periodicity_defect(&[0.0]).unwrap() > 0.06);
    }

    #[test]
    fn time_reversal_mirrors_interval() {
        let m = MetricModel::parse("1+0.1*tanh(t)", "1", "0", -1.0, 2.0, 2).unwrap();
        let r = m.time_reversed();
        assert_eq!((r.t_min, r.t_max), (-2.0, 1.0));
        assert_eq!(r.point(0.5, 0.0).unwrap().h.v, m.point(-0.5, 0.0).unwrap().h.v);
    }
}
