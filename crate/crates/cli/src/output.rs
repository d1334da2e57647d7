use std::io::{self, Write};

use quantsine_core::mc::GAUSSIAN_METHOD;

use crate::config::ExperimentConfig;
use crate::experiments::Table;

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Metadata (`#@ key=value` re-readable by `--config`, `# ` free text),
/// the header row, then the rows. Lines end with LF.
pub fn write_csv(w: &mut impl Write, cfg: &ExperimentConfig, table: &Table) -> io::Result<()> {
    for (k, v) in cfg.metadata() {
        writeln!(w, "#@ {k}={v}")?;
    }
    writeln!(w, "#@ gaussian={GAUSSIAN_METHOD}")?;
    writeln!(w, "#@ non_coprime={}", table.non_coprime)?;
    for note in &table.notes {
        writeln!(w, "# {note}")?;
    }
    writeln!(w, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let fields: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 123456.789, 0.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s
                .split('e')
                .next()
                .unwrap()
                .trim_start_matches('-')
                .replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }
}
