//! Rendering of power CSV reports as standalone SVG charts.
//!
//! The chart is power versus cell (the parameter grid of one alternative
//! family), one polyline per procedure. Output is plain SVG text built from
//! the parsed rows only — no timestamps, no randomness — so rendering the
//! same CSV twice yields identical bytes.

use std::fmt::Write;

/// Header of the power CSV this module consumes.
const POWER_HEADER: &str = "family,cell,procedure,replications,rejections,power,mc_std_err";

/// One procedure's power value per cell, in cell order.
#[derive(Debug)]
struct Series {
    procedure: String,
    values: Vec<Option<f64>>,
}

/// Parsed content of one power CSV: the family name, the cells in first
/// appearance order, and one series per procedure.
#[derive(Debug)]
pub struct PowerPlot {
    family: String,
    cells: Vec<String>,
    series: Vec<Series>,
}

impl PowerPlot {
    /// Parse a power CSV (as written by the `power` subcommand). Comment
    /// lines starting with `#` are ignored; errors carry 1-based line
    /// numbers.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut family: Option<String> = None;
        let mut cells: Vec<String> = Vec::new();
        let mut series: Vec<Series> = Vec::new();
        let mut saw_header = false;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != POWER_HEADER {
                    return Err(format!(
                        "line {line_no}: expected header `{POWER_HEADER}`, got `{line}`"
                    ));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(format!(
                    "line {line_no}: expected 7 fields, got {}",
                    fields.len()
                ));
            }
            let row_family = fields[0];
            match &family {
                None => family = Some(row_family.to_string()),
                Some(f) if f != row_family => {
                    return Err(format!(
                        "line {line_no}: mixed families `{f}` and `{row_family}` in one file"
                    ));
                }
                _ => {}
            }
            let cell = fields[1].to_string();
            let procedure = fields[2].to_string();
            let power: f64 = fields[5]
                .parse()
                .map_err(|_| format!("line {line_no}: cannot parse power `{}`", fields[5]))?;
            if !(0.0..=1.0).contains(&power) {
                return Err(format!("line {line_no}: power {power} outside [0,1]"));
            }

            let cell_idx = match cells.iter().position(|c| c == &cell) {
                Some(idx) => idx,
                None => {
                    cells.push(cell);
                    for s in &mut series {
                        s.values.push(None);
                    }
                    cells.len() - 1
                }
            };
            let series_idx = match series.iter().position(|s| s.procedure == procedure) {
                Some(idx) => idx,
                None => {
                    series.push(Series {
                        procedure,
                        values: vec![None; cells.len()],
                    });
                    series.len() - 1
                }
            };
            series[series_idx].values[cell_idx] = Some(power);
        }

        if !saw_header {
            return Err("no header row found".into());
        }
        if cells.is_empty() {
            return Err("no data rows found".into());
        }
        Ok(Self {
            family: family.expect("rows imply a family"),
            cells,
            series,
        })
    }

    /// Render the chart as a standalone SVG document.
    pub fn to_svg(&self) -> String {
        const WIDTH: f64 = 720.0;
        const HEIGHT: f64 = 480.0;
        const LEFT: f64 = 60.0;
        const RIGHT: f64 = 170.0;
        const TOP: f64 = 40.0;
        const BOTTOM: f64 = 60.0;
        const PALETTE: [&str; 6] = [
            "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
        ];

        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let x_at = |idx: usize| -> f64 {
            if self.cells.len() == 1 {
                LEFT + plot_w / 2.0
            } else {
                LEFT + plot_w * idx as f64 / (self.cells.len() - 1) as f64
            }
        };
        let y_at = |power: f64| -> f64 { TOP + plot_h * (1.0 - power) };

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
        );
        let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
             text-anchor=\"middle\">power by cell: {}</text>",
            LEFT + plot_w / 2.0,
            escape(&self.family)
        );

        // Horizontal grid and y-axis labels at 0, 0.25, …, 1.
        for step in 0..=4 {
            let p = step as f64 / 4.0;
            let y = y_at(p);
            let _ = writeln!(
                svg,
                "<line x1=\"{LEFT:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
                 stroke=\"#cccccc\" stroke-width=\"1\"/>",
                LEFT + plot_w
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
                 text-anchor=\"end\">{p:.2}</text>",
                LEFT - 8.0,
                y + 4.0
            );
        }

        // X tick labels: the cell labels.
        for (idx, cell) in self.cells.iter().enumerate() {
            let x = x_at(idx);
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" \
                 stroke=\"#cccccc\" stroke-width=\"1\"/>",
                TOP + plot_h,
                TOP + plot_h + 5.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"middle\">{}</text>",
                TOP + plot_h + 20.0,
                escape(cell)
            );
        }

        // Axes.
        let _ = writeln!(
            svg,
            "<line x1=\"{LEFT:.1}\" y1=\"{TOP:.1}\" x2=\"{LEFT:.1}\" y2=\"{:.1}\" \
             stroke=\"black\" stroke-width=\"1\"/>",
            TOP + plot_h
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{LEFT:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
             stroke=\"black\" stroke-width=\"1\"/>",
            TOP + plot_h,
            LEFT + plot_w,
            TOP + plot_h
        );

        // One polyline plus markers per procedure, and a legend entry.
        for (s_idx, s) in self.series.iter().enumerate() {
            let color = PALETTE[s_idx % PALETTE.len()];
            let mut path = String::new();
            for (idx, value) in s.values.iter().enumerate() {
                if let Some(p) = value {
                    if !path.is_empty() {
                        path.push(' ');
                    }
                    let _ = write!(path, "{:.1},{:.1}", x_at(idx), y_at(*p));
                }
            }
            if !path.is_empty() {
                let _ = writeln!(
                    svg,
                    "<polyline points=\"{path}\" fill=\"none\" stroke=\"{color}\" \
                     stroke-width=\"2\"/>"
                );
            }
            for (idx, value) in s.values.iter().enumerate() {
                if let Some(p) = value {
                    let _ = writeln!(
                        svg,
                        "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                        x_at(idx),
                        y_at(*p)
                    );
                }
            }
            let ly = TOP + 14.0 * s_idx as f64;
            let _ = writeln!(
                svg,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
                LEFT + plot_w + 14.0,
                ly
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
                LEFT + plot_w + 30.0,
                ly + 9.0,
                escape(&s.procedure)
            );
        }

        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# table ms=0123456789abcdef
family,cell,procedure,replications,rejections,power,mc_std_err
s1,epsilon=0,model_selection,2000,100,0.05,0.004873397172404482
s1,epsilon=0,ks,2000,101,0.0505,0.004896430972122956
s1,epsilon=0.5,model_selection,2000,500,0.25,0.00968245836551854
s1,epsilon=0.5,ks,2000,180,0.09,0.006398632666803505
";

    #[test]
    fn parses_cells_and_series_in_order() {
        let plot = PowerPlot::parse(SAMPLE).unwrap();
        assert_eq!(plot.family, "s1");
        assert_eq!(plot.cells, vec!["epsilon=0", "epsilon=0.5"]);
        assert_eq!(plot.series.len(), 2);
        assert_eq!(plot.series[0].procedure, "model_selection");
        assert_eq!(plot.series[0].values, vec![Some(0.05), Some(0.25)]);
        assert_eq!(plot.series[1].values, vec![Some(0.0505), Some(0.09)]);
    }

    #[test]
    fn rejects_malformed_input_with_line_numbers() {
        let missing_header = "a,b,c\n";
        let err = PowerPlot::parse(missing_header).unwrap_err();
        assert!(err.contains("line 1"), "{err}");

        let bad_power = format!("{POWER_HEADER}\ns1,c,ks,10,5,not_a_number,0.1\n");
        let err = PowerPlot::parse(&bad_power).unwrap_err();
        assert!(err.contains("line 2") && err.contains("power"), "{err}");

        let mixed = format!("{POWER_HEADER}\ns1,c,ks,10,5,0.5,0.1\ns2,c,ks,10,5,0.5,0.1\n");
        let err = PowerPlot::parse(&mixed).unwrap_err();
        assert!(err.contains("mixed families"), "{err}");
    }

    #[test]
    fn svg_is_deterministic_and_well_formed() {
        let plot = PowerPlot::parse(SAMPLE).unwrap();
        let a = plot.to_svg();
        let b = plot.to_svg();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg "));
        assert!(a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert_eq!(a.matches("<circle").count(), 4);
        assert!(a.contains("epsilon=0.5"));
    }
}
