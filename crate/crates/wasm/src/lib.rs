//! wasm-bindgen bindings for the browser demo. Every method returns a JSON
//! string; errors surface as JS exceptions.

pub mod demo;

use serde::Serialize;
use trialink_core::{MethodConfig, Representation};
use wasm_bindgen::prelude::*;

fn js<T>(r: trialink_core::Result<T>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

fn json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn config(slug: &str) -> Result<MethodConfig, JsError> {
    js(slug.parse())
}

#[wasm_bindgen]
pub struct Demo(demo::Demo);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, n_articles: usize, n_registrations: usize) -> Result<Demo, JsError> {
        js(demo::Demo::new(seed, n_articles, n_registrations)).map(Demo)
    }

    pub fn registrations(&self) -> Result<String, JsError> {
        json(&self.0.registrations())
    }

    #[wasm_bindgen(js_name = registrationText)]
    pub fn registration_text(&self, nct_id: &str) -> Result<String, JsError> {
        js(self.0.registration_text(nct_id))
    }

    pub fn explore(&self, text: &str, representation: &str) -> Result<String, JsError> {
        let rep: Representation = js(representation.parse())?;
        json(&js(self.0.explore(text, rep))?)
    }

    #[wasm_bindgen(js_name = rankText)]
    pub fn rank_text(
        &self,
        text: &str,
        slug: &str,
        k: usize,
        planted_for: Option<String>,
    ) -> Result<String, JsError> {
        json(&js(self.0.rank_text(
            text,
            config(slug)?,
            k,
            planted_for.as_deref(),
        ))?)
    }

    pub fn rank(&self, nct_id: &str, slug: &str, k: usize) -> Result<String, JsError> {
        json(&js(self.0.rank(nct_id, config(slug)?, k))?)
    }

    pub fn curves(&self, max_n: usize) -> Result<String, JsError> {
        json(&js(self.0.curves(max_n))?)
    }
}
