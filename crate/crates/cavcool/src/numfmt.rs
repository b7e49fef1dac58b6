//! Shared numeric formatting for CSV output: 15 significant digits,
//! scientific notation, NaN spelled `nan`.

use std::fmt::Write;

pub(crate) fn push_float(buf: &mut String, x: f64) {
    if x.is_nan() {
        buf.push_str("nan");
    } else {
        write!(buf, "{x:.14e}").expect("write to String");
    }
}
