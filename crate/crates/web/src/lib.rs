//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Everything crosses the boundary in file units (μm, A, G). Structured
//! results are returned as JSON strings for `JSON.parse`.

use serde_json::json;
use wasm_bindgen::prelude::*;

use chipguide::field::total_field;
use chipguide::geometry::build_y_splitter;
use chipguide::potential::{
    classify_two_wire, side_guide_height, trace_minima, SearchWindow, TraceOptions, Z_FLOOR,
};
use chipguide::units::GAUSS;
use chipguide::{AtomSpecies, Circuit, Vec3, YSplitterParams};

const UM: f64 = 1e-6;

fn js_err(e: chipguide::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn splitter(
    current: f64,
    bias_g: f64,
    ioffe_g: f64,
    fraction: f64,
) -> Result<(Circuit, f64), JsError> {
    let p = YSplitterParams::new(current, Vec3::new(ioffe_g, bias_g, 0.0) * GAUSS)
        .with_fraction(fraction);
    let c = build_y_splitter(&p).map_err(js_err)?;
    let r0 = side_guide_height(current, bias_g * GAUSS).map_err(js_err)?;
    Ok((c, r0))
}

/// Guide height `μ0 I / 2π B` in μm.
#[wasm_bindgen]
pub fn guide_height_um(current: f64, bias_g: f64) -> Result<f64, JsError> {
    side_guide_height(current, bias_g * GAUSS)
        .map(|r| r / UM)
        .map_err(js_err)
}

/// `|B|` in G on an `n × n` slice at `x_um` of a Y splitter, row `i` (y)
/// major. The window spans `±1.5 r0` in `y` and `(0, 2 r0]` in `z`; nodes on
/// a wire are NaN.
#[wasm_bindgen]
pub fn field_slice(
    current: f64,
    bias_g: f64,
    ioffe_g: f64,
    fraction: f64,
    x_um: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    if !(2..=400).contains(&n) {
        return Err(JsError::new("n must be between 2 and 400"));
    }
    let (c, r0) = splitter(current, bias_g, ioffe_g, fraction)?;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let y = -1.5 * r0 + 3.0 * r0 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let z = 2.0 * r0 * (j + 1) as f64 / n as f64;
            let b = total_field(&c, &Vec3::new(x_um * UM, y, z)).map(|b| b.norm() / GAUSS);
            out.push(b.unwrap_or(f64::NAN));
        }
    }
    Ok(out)
}

/// Minima of the ⁷Li potential on `n` slices from `x_start_um` to
/// `x_end_um`, as JSON
/// `{"r0_um", "split_x_um", "fourth_port", "points": [{"x_um","y_um","z_um","b_g","track"}]}`.
#[wasm_bindgen]
pub fn minima_trace(
    current: f64,
    bias_g: f64,
    ioffe_g: f64,
    fraction: f64,
    x_start_um: f64,
    x_end_um: f64,
    n: usize,
) -> Result<String, JsError> {
    if !(2..=400).contains(&n) {
        return Err(JsError::new("n must be between 2 and 400"));
    }
    let (c, r0) = splitter(current, bias_g, ioffe_g, fraction)?;
    let w =
        SearchWindow::new((-1.5 * r0, 1.5 * r0), (Z_FLOOR, 2.0 * r0), 61, 61).map_err(js_err)?;
    let mut opts = TraceOptions::new(w);
    opts.barriers = false;
    let t = trace_minima(
        &c,
        &AtomSpecies::lithium7(),
        (x_start_um * UM, x_end_um * UM),
        n,
        &opts,
    )
    .map_err(js_err)?;
    let points: Vec<_> = t
        .slices
        .iter()
        .flat_map(|s| {
            s.minima.iter().zip(&s.track_ids).map(|(m, id)| {
                json!({
                    "x_um": s.x / UM,
                    "y_um": m.position.y / UM,
                    "z_um": m.position.z / UM,
                    "b_g": m.field / GAUSS,
                    "track": id,
                })
            })
        })
        .collect();
    Ok(json!({
        "r0_um": r0 / UM,
        "split_x_um": t.split_x.map(|x| x / UM),
        "fourth_port": t.fourth_port.map(|f| json!({
            "track": f.track_id,
            "birth_x_um": f.birth_x / UM,
            "death_x_um": f.death_x / UM,
        })),
        "points": points,
    })
    .to_string())
}

/// Regime of two parallel wires `d_um` apart, as JSON
/// `{"case", "d_um", "d_split_um"}`.
#[wasm_bindgen]
pub fn classify(d_um: f64, current: f64, bias_g: f64) -> Result<String, JsError> {
    let v = classify_two_wire(d_um * UM, current, bias_g * GAUSS).map_err(js_err)?;
    Ok(json!({ "case": v.case, "d_um": d_um, "d_split_um": v.d_split / UM }).to_string())
}
