//! Closed contours in the complex wave-speed plane and argument-principle
//! winding numbers.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::tolerances::MAX_ARG_JUMP;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Axis-aligned rectangle with corners `lo` and `hi`.
    Rectangle {
        lo: Complex64,
        hi: Complex64,
    },
    Disk {
        center: Complex64,
        radius: f64,
    },
    /// `{ |c - center| < radius, Im c > floor }` for a real `center`.
    UpperSemidisk {
        center: f64,
        radius: f64,
        floor: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ContourError<E> {
    #[error("contour passes through (or too close to) a zero near c = {at}")]
    ContourThroughZero { at: Complex64 },
    #[error(transparent)]
    Function(E),
}

#[derive(Debug, Clone)]
pub struct Winding {
    pub count: i32,
    /// Raw argument increment divided by `2 pi`.
    pub turns: f64,
    pub nodes: usize,
    pub min_modulus: f64,
}

impl Region {
    /// Point at parameter `s` in `[0, 1)`, traversed counter-clockwise.
    pub fn point(&self, s: f64) -> Complex64 {
        let s = s.rem_euclid(1.0);
        match *self {
            Region::Rectangle { lo, hi } => {
                let (w, h) = (hi.re - lo.re, hi.im - lo.im);
                let per = 2.0 * (w + h);
                let d = s * per;
                if d < w {
                    Complex64::new(lo.re + d, lo.im)
                } else if d < w + h {
                    Complex64::new(hi.re, lo.im + d - w)
                } else if d < 2.0 * w + h {
                    Complex64::new(hi.re - (d - w - h), hi.im)
                } else {
                    Complex64::new(lo.re, hi.im - (d - 2.0 * w - h))
                }
            }
            Region::Disk { center, radius } => center + Complex64::from_polar(radius, TAU * s),
            Region::UpperSemidisk { center, radius, floor } => {
                let theta0 = (floor / radius).asin();
                let half_chord = radius * theta0.cos();
                let base = 2.0 * half_chord;
                let arc = radius * (PI - 2.0 * theta0);
                let d = s * (base + arc);
                if d < base {
                    Complex64::new(center - half_chord + d, floor)
                } else {
                    let theta = theta0 + (d - base) / radius;
                    Complex64::new(center, 0.0) + Complex64::from_polar(radius, theta)
                }
            }
        }
    }

    pub fn contains(&self, c: Complex64) -> bool {
        match *self {
            Region::Rectangle { lo, hi } => c.re > lo.re && c.re < hi.re && c.im > lo.im && c.im < hi.im,
            Region::Disk { center, radius } => (c - center).norm() < radius,
            Region::UpperSemidisk { center, radius, floor } => {
                (c - Complex64::new(center, 0.0)).norm() < radius && c.im > floor
            }
        }
    }

    /// The same region grown outward by `d` (shrunk for negative `d`).
    pub fn perturbed(&self, d: f64) -> Region {
        match *self {
            Region::Rectangle { lo, hi } => {
                let shift = Complex64::new(d, d);
                Region::Rectangle { lo: lo - shift, hi: hi + shift }
            }
            Region::Disk { center, radius } => Region::Disk { center, radius: radius + d },
            Region::UpperSemidisk { center, radius, floor } => {
                Region::UpperSemidisk { center, radius: radius + d, floor: (floor - 0.5 * d).max(0.25 * floor) }
            }
        }
    }

    /// Split into four sub-rectangles (bounding box for disks).
    pub fn quarters(&self) -> [Region; 4] {
        let (lo, hi) = self.bounding_box();
        let mid = (lo + hi) * 0.5;
        [
            Region::Rectangle { lo, hi: mid },
            Region::Rectangle { lo: Complex64::new(mid.re, lo.im), hi: Complex64::new(hi.re, mid.im) },
            Region::Rectangle { lo: Complex64::new(lo.re, mid.im), hi: Complex64::new(mid.re, hi.im) },
            Region::Rectangle { lo: mid, hi },
        ]
    }

    pub fn bounding_box(&self) -> (Complex64, Complex64) {
        match *self {
            Region::Rectangle { lo, hi } => (lo, hi),
            Region::Disk { center, radius } => {
                let r = Complex64::new(radius, radius);
                (center - r, center + r)
            }
            Region::UpperSemidisk { center, radius, floor } => {
                (Complex64::new(center - radius, floor), Complex64::new(center + radius, radius))
            }
        }
    }

    pub fn center(&self) -> Complex64 {
        let (lo, hi) = self.bounding_box();
        (lo + hi) * 0.5
    }
}

/// Winding number of `f` along the boundary of `region`. Nodes are added
/// until consecutive values differ in argument by less than `pi/4`.
pub fn winding<E: Send>(
    f: &(impl Fn(Complex64) -> Result<Complex64, E> + Sync),
    region: &Region,
    initial_nodes: usize,
) -> Result<Winding, ContourError<E>> {
    let n0 = initial_nodes.max(8);
    let mut params: Vec<f64> = (0..n0).map(|i| i as f64 / n0 as f64).collect();
    let mut values = evaluate(f, region, &params)?;
    loop {
        let n = params.len();
        let mut insert = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            let step = arg_step(values[i], values[j]);
            if step.abs() >= MAX_ARG_JUMP {
                let (a, b) = (params[i], if j == 0 { 1.0 } else { params[j] });
                if b - a < 1e-10 {
                    return Err(ContourError::ContourThroughZero { at: region.point(a) });
                }
                insert.push((i, 0.5 * (a + b)));
            }
        }
        if insert.is_empty() {
            break;
        }
        let mids: Vec<f64> = insert.iter().map(|&(_, s)| s).collect();
        let new_vals = evaluate(f, region, &mids)?;
        let mut merged_p = Vec::with_capacity(n + mids.len());
        let mut merged_v = Vec::with_capacity(n + mids.len());
        let mut it = insert.iter().zip(new_vals).peekable();
        for i in 0..n {
            merged_p.push(params[i]);
            merged_v.push(values[i]);
            if let Some(((idx, s), v)) = it.peek() {
                if *idx == i {
                    merged_p.push(*s);
                    merged_v.push(*v);
                    it.next();
                }
            }
        }
        params = merged_p;
        values = merged_v;
    }
    let n = values.len();
    let total: f64 = (0..n).map(|i| arg_step(values[i], values[(i + 1) % n])).sum();
    let turns = total / TAU;
    let count = turns.round();
    let min_modulus = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if (turns - count).abs() > 0.05 {
        return Err(ContourError::ContourThroughZero { at: region.point(0.0) });
    }
    Ok(Winding { count: count as i32, turns, nodes: n, min_modulus })
}

fn arg_step(a: Complex64, b: Complex64) -> f64 {
    (b / a).arg()
}

fn evaluate<E: Send>(
    f: &(impl Fn(Complex64) -> Result<Complex64, E> + Sync),
    region: &Region,
    params: &[f64],
) -> Result<Vec<Complex64>, ContourError<E>> {
    let vals: Vec<Result<Complex64, E>> = params.par_iter().map(|&s| f(region.point(s))).collect();
    let mut out = Vec::with_capacity(vals.len());
    for (v, &s) in vals.into_iter().zip(params) {
        let v = v.map_err(ContourError::Function)?;
        if v.norm() == 0.0 || !v.re.is_finite() || !v.im.is_finite() {
            return Err(ContourError::ContourThroughZero { at: region.point(s) });
        }
        out.push(v);
    }
    Ok(out)
}
