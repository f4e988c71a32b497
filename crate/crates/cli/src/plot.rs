//! Success and precision plots as PNG.
//!
//! Plots carry no text: the bitmap backend is built without font support.
//! Success spans overlap threshold [0,1]; precision spans error [0,50] px.

use std::path::Path;

use motionbox_core::eval::parse_curves_csv;
use motionbox_core::{Error, Result};
use plotters::prelude::*;

const SIZE: (u32, u32) = (640, 480);

fn draw(path: &Path, curve: &[(f64, f64)], x_max: f64) -> Result<()> {
    let render = || -> std::result::Result<(), Box<dyn std::error::Error>> {
        let root = BitMapBackend::new(path, SIZE).into_drawing_area();
        root.fill(&WHITE)?;
        let root = root.margin(20, 20, 20, 20);
        let mut chart = ChartBuilder::on(&root).build_cartesian_2d(0.0..x_max, 0.0..1.0)?;
        chart
            .configure_mesh()
            .x_labels(0)
            .y_labels(0)
            .disable_x_mesh()
            .disable_y_mesh()
            .draw()?;
        for i in 1..10 {
            let y = i as f64 / 10.0;
            chart.draw_series(LineSeries::new([(0.0, y), (x_max, y)], RGBColor(225, 225, 225)))?;
        }
        chart.draw_series(LineSeries::new(curve.iter().copied(), RED.stroke_width(2)))?;
        root.present()?;
        Ok(())
    };
    render().map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

pub fn run(curves: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(curves).map_err(|e| Error::Io {
        path: curves.to_path_buf(),
        source: e,
    })?;
    let (success, precision) =
        parse_curves_csv(&text).map_err(|e| Error::Dataset(format!("{}: {e}", curves.display())))?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    draw(&out.join("success.png"), &success, 1.0)?;
    draw(&out.join("precision.png"), &precision, 50.0)?;
    Ok(())
}
