//! Grid function I/O: CSV rows `(x_0, .., x_{n-1}, value)` and a binary
//! block `{u32 ndim, u64 counts[ndim], f64 h, f64 lower[ndim],
//! f64 upper[ndim], f64 values[..]}`, little-endian. Values may be `-inf`.

use std::io::{Read, Write};

use super::grid::{BoxDomain, Face, GridFunction, Side};
use crate::{Error, Result};

impl GridFunction {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.domain.dim();
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        out.write_record(&header)?;
        for (i, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.domain.point(i).iter().map(|c| c.to_string()).collect();
            row.push(v.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a CSV written in lattice order; the lattice is rebuilt from the
    /// distinct coordinates of each axis.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let n = rdr.headers()?.len().checked_sub(1).filter(|n| *n > 0).ok_or_else(|| Error::Format("CSV needs coordinate columns and a value column".into()))?;
        let mut points = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != n + 1 {
                return Err(Error::Format(format!("row with {} fields, expected {}", rec.len(), n + 1)));
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            let parsed = parsed.map_err(|e| Error::Format(format!("bad number: {e}")))?;
            values.push(parsed[n]);
            points.push(parsed[..n].to_vec());
        }
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for a in 0..n {
            let mut coords: Vec<f64> = points.iter().map(|p| p[a]).collect();
            coords.sort_by(f64::total_cmp);
            coords.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
            if coords.len() < 2 {
                return Err(Error::Format(format!("axis {a} has fewer than two coordinates")));
            }
            lower.push(coords[0]);
            upper.push(*coords.last().expect("nonempty"));
            counts.push(coords.len());
        }
        let domain = BoxDomain::new(lower, upper, counts)?;
        if points.len() != domain.len() {
            return Err(Error::Format(format!("{} rows for a lattice of {} points", points.len(), domain.len())));
        }
        for (i, p) in points.iter().enumerate() {
            let q = domain.point(i);
            let off = (0..n).any(|a| (p[a] - q[a]).abs() > 1e-9 * (1.0 + domain.diameter()));
            if off {
                return Err(Error::Format(format!("row {i} at {p:?} is not the lattice point {q:?}")));
            }
        }
        let blowup = infer_blowup(&domain, &values);
        GridFunction::new(domain, values, blowup)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let d = &self.domain;
        w.write_all(&(d.dim() as u32).to_le_bytes())?;
        for c in d.counts() {
            w.write_all(&(*c as u64).to_le_bytes())?;
        }
        w.write_all(&d.h_min().to_le_bytes())?;
        for v in d.lower().iter().chain(d.upper()).chain(&self.values) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        crate::tolerances::check_dim(n)?;
        let mut counts = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            counts.push(usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Format("count overflow".into()))?);
        }
        let mut f64s = |k: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(k);
            for _ in 0..k {
                r.read_exact(&mut b8)?;
                out.push(f64::from_le_bytes(b8));
            }
            Ok(out)
        };
        let h = f64s(1)?[0];
        let lower = f64s(n)?;
        let upper = f64s(n)?;
        let total = counts.iter().try_fold(1usize, |acc, c| acc.checked_mul(*c)).ok_or_else(|| Error::Format("lattice too large".into()))?;
        let domain = BoxDomain::new(lower, upper, counts)?;
        if (domain.h_min() - h).abs() > 1e-12 * (1.0 + h.abs()) {
            return Err(Error::Format(format!("stored spacing {h} disagrees with the corners (h = {})", domain.h_min())));
        }
        let values = f64s(total)?;
        let blowup = infer_blowup(&domain, &values);
        GridFunction::new(domain, values, blowup)
    }
}

/// The unique face containing every `-inf` value, if there is one.
fn infer_blowup(domain: &BoxDomain, values: &[f64]) -> Option<Face> {
    let bad: Vec<usize> = (0..values.len()).filter(|i| values[*i] == f64::NEG_INFINITY).collect();
    if bad.is_empty() {
        return None;
    }
    (0..domain.dim())
        .flat_map(|axis| [Side::Lower, Side::Upper].map(|side| Face { axis, side }))
        .find(|f| bad.iter().all(|i| domain.on_face(*i, *f)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridFunction {
        let d = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 0.5], vec![5, 3]).unwrap();
        GridFunction::from_fn(&d, |x| x[0] * 0.1 + x[1].sin()).unwrap()
    }

    #[test]
    fn csv_roundtrip() {
        let g = sample();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values, g.values);
        assert_eq!(back.domain.counts(), g.domain.counts());
    }

    #[test]
    fn binary_roundtrip() {
        let g = sample();
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 2 * 8 + 8 + 4 * 8 + 15 * 8);
        let back = GridFunction::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(GridFunction::read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn negative_infinity_survives_csv() {
        let d = BoxDomain::unit_cube(1, 3).unwrap();
        let g = GridFunction::new(d, vec![0.0, 1.0, f64::NEG_INFINITY], Some(Face { axis: 0, side: Side::Upper })).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().contains("-inf"));
        assert_eq!(GridFunction::read_csv(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn interior_negative_infinity_is_rejected() {
        let text = "x0,value\n0,1\n0.5,-inf\n1,2\n";
        assert!(GridFunction::read_csv(text.as_bytes()).is_err());
    }
}
