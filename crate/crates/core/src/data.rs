//! JSON data files: an object mapping input names to numbers, bools, or
//! (nested) arrays. Ints and reals are told apart by the declared type,
//! not the JSON literal form.

use thiserror::Error;

use crate::ast::{BaseType, Program};
use crate::runtime::{Store, Value};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("data file is not a JSON object")]
    NotAnObject,
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("`{name}`: {message}")]
    BadValue { name: String, message: String },
}

/// Parses a JSON object into a store, typed against the program's
/// declarations. Unknown fields are ignored; missing inputs surface
/// later when the model is built.
pub fn load_data(program: &Program, json: &str) -> Result<Store<f64>, DataError> {
    let parsed: serde_json::Value = serde_json::from_str(json)?;
    let obj = parsed.as_object().ok_or(DataError::NotAnObject)?;
    let mut store = Store::new();
    for (name, ty, _, _) in program.decls() {
        if let Some(v) = obj.get(name) {
            let value = convert(name, v, ty.base, ty.dims.len())?;
            store.bind(name.to_string(), value);
        }
    }
    Ok(store)
}

fn convert(
    name: &str,
    v: &serde_json::Value,
    base: BaseType,
    depth: usize,
) -> Result<Value<f64>, DataError> {
    let bad = |message: String| DataError::BadValue {
        name: name.to_string(),
        message,
    };
    if depth > 0 {
        let items = v
            .as_array()
            .ok_or_else(|| bad(format!("expected an array of depth {depth}")))?;
        let converted = items
            .iter()
            .map(|item| convert(name, item, base, depth - 1))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Value::Array(converted));
    }
    match base {
        BaseType::Real => {
            let x = v
                .as_f64()
                .ok_or_else(|| bad("expected a number".to_string()))?;
            Ok(Value::Real(x))
        }
        BaseType::Int => {
            let x = v
                .as_f64()
                .ok_or_else(|| bad("expected a number".to_string()))?;
            if x.fract() != 0.0 {
                return Err(bad(format!("expected an integer, got {x}")));
            }
            Ok(Value::Int(x as i64))
        }
        BaseType::Bool => match v {
            serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
            serde_json::Value::Number(n) => {
                let x = n.as_f64().unwrap_or(f64::NAN);
                if x == 0.0 || x == 1.0 {
                    Ok(Value::Bool(x == 1.0))
                } else {
                    Err(bad("expected a bool or 0/1".to_string()))
                }
            }
            _ => Err(bad("expected a bool or 0/1".to_string())),
        },
    }
}
