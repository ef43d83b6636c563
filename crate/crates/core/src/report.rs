//! CSV helpers shared by every report type.
//!
//! Floats are written with 9 significant digits in plain decimal notation
//! when `1e-4 ≤ |x| < 1e9`, in scientific notation otherwise. Infinities are
//! written as `inf` and `-inf`.

/// Formats `x` with 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x == f64::INFINITY {
        return "inf".into();
    }
    if x == f64::NEG_INFINITY {
        return "-inf".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs();
    if (1e-4..1e9).contains(&mag) {
        let exp = mag.log10().floor() as i32;
        let prec = (8 - exp).max(0) as usize;
        format!("{x:.prec$}")
    } else {
        format!("{x:.8e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Writes a header and rows into a CSV string.
pub fn to_csv<I, R>(header: &[&str], rows: I) -> crate::Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_float(0.188721875540867), "0.188721876");
        assert_eq!(fmt_float(1.0), "1.00000000");
        assert_eq!(fmt_float(50.0), "50.0000000");
        assert_eq!(fmt_float(-1.415037499278844), "-1.41503750");
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_float(1.5e-7), "1.50000000e-7");
    }

    #[test]
    fn csv_has_header() {
        let s = to_csv(&["a", "b"], [vec!["1".to_string(), "2".to_string()]]).unwrap();
        assert_eq!(s, "a,b\n1,2\n");
    }
}
