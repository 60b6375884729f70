//! Text serialisation of curves, event logs and plane-current grids.
//!
//! Columns are fixed. Every number is written with 17 significant digits so
//! that parsing the text gives back the exact `f64`.

use std::io::{self, Write};

use crate::ensemble::ArrivalCurves;
use crate::fields::PlaneCurrent;
use crate::trajectories::TrajectoryRecord;

pub const CURVES_HEADER: &str = "t,q_exact,q_emp,se_q,p_emp,se_p";
pub const EXACT_HEADER: &str = "t,q_exact";
pub const EVENTS_HEADER: &str = "trajectory_id,t_cross,y,z,direction";
pub const CURRENTS_HEADER: &str = "t,y,z,density,jcx,jlx,vbx,vblx";

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_row<W: Write>(w: &mut W, values: &[f64]) -> io::Result<()> {
    let line: Vec<String> = values.iter().map(|&v| fmt_num(v)).collect();
    writeln!(w, "{}", line.join(","))
}

pub fn write_curves_csv<W: Write>(w: &mut W, curves: &ArrivalCurves) -> io::Result<()> {
    writeln!(w, "{CURVES_HEADER}")?;
    for i in 0..curves.t_grid.len() {
        write_row(
            w,
            &[
                curves.t_grid[i],
                curves.q_exact[i],
                curves.q_emp[i],
                curves.se_q[i],
                curves.p_emp[i],
                curves.se_p[i],
            ],
        )?;
    }
    Ok(())
}

pub fn write_exact_csv<W: Write>(w: &mut W, t: &[f64], q: &[f64]) -> io::Result<()> {
    writeln!(w, "{EXACT_HEADER}")?;
    for (&t, &q) in t.iter().zip(q) {
        write_row(w, &[t, q])?;
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(w: &mut W, records: &[TrajectoryRecord]) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for (id, r) in records.iter().enumerate() {
        for e in &r.events {
            writeln!(
                w,
                "{id},{},{},{},{}",
                fmt_num(e.t_cross),
                fmt_num(e.y),
                fmt_num(e.z),
                e.direction.as_str()
            )?;
        }
    }
    Ok(())
}

pub fn write_currents_csv<W: Write>(w: &mut W, samples: &[PlaneCurrent]) -> io::Result<()> {
    writeln!(w, "{CURRENTS_HEADER}")?;
    for s in samples {
        write_row(w, &[s.t, s.y, s.z, s.density, s.jcx, s.jlx, s.vbx, s.vblx])?;
    }
    Ok(())
}

/// Parses an all-numeric table written by this module.
pub fn read_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty table")?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(format!("row {}: expected {} fields", i + 1, header.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn printed_numbers_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn table_round_trip() {
        let mut buf = Vec::new();
        write_exact_csv(&mut buf, &[0.0, 0.1, 1.0 / 3.0], &[1e-13, 0.25, 0.9]).unwrap();
        let (header, rows) = read_numeric_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(header.join(","), EXACT_HEADER);
        assert_eq!(rows[2], vec![1.0 / 3.0, 0.9]);
        assert!(read_numeric_csv("a,b\n1,2,3\n").is_err());
    }
}
