//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! Every entry point takes and returns JSON text; errors become JS exceptions.

pub mod ops;

use serde::de::DeserializeOwned;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn call<Req, Resp>(json: &str, op: impl FnOnce(&Req) -> Result<Resp, String>) -> Result<String, JsError>
where
    Req: DeserializeOwned,
    Resp: Serialize,
{
    let req: Req = serde_json::from_str(json).map_err(|e| JsError::new(&format!("bad request: {e}")))?;
    let resp = op(&req).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&resp).map_err(|e| JsError::new(&e.to_string()))
}

/// Letterbox, synthetic head, decode and NMS for placed objects.
#[wasm_bindgen(js_name = decodeScene)]
pub fn decode_scene(request: &str) -> Result<String, JsError> {
    call(request, ops::decode_scene)
}

/// Rotated corners and clipped hulls for label boxes.
#[wasm_bindgen(js_name = rotateBoxes)]
pub fn rotate_boxes(request: &str) -> Result<String, JsError> {
    call(request, ops::rotate_boxes)
}

/// Per-class precision-recall points and AP.
#[wasm_bindgen(js_name = prCurves)]
pub fn pr_curves(request: &str) -> Result<String, JsError> {
    call(request, ops::pr_curves)
}
