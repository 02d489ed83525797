//! Output formatting shared by the library writers and the CLI.

use std::io::{self, Write};

use crate::sim::PointConfig;

/// `x` with 12 significant digits, `%.12g` style: fixed notation for
/// exponents in `[-5, 12)`, scientific otherwise, trailing zeros dropped.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..12).contains(&exp) {
        trim_zeros(format!("{:.*}", (11 - exp) as usize, x))
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Header of the trajectory / sample dump.
pub const SAMPLE_CSV_HEADER: &str = "replicate,t,index,position";

/// Write `(replicate, t, configuration)` records, one row per particle.
pub fn write_samples_csv<W: Write>(
    mut w: W,
    records: impl IntoIterator<Item = (u64, f64, PointConfig)>,
) -> io::Result<()> {
    writeln!(w, "{SAMPLE_CSV_HEADER}")?;
    for (rep, t, cfg) in records {
        for (i, &x) in cfg.positions().iter().enumerate() {
            writeln!(w, "{rep},{},{i},{}", format_sig(t), format_sig(x))?;
        }
    }
    Ok(())
}
