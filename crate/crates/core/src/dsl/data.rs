//! Parameter maps, traces, and corrections, plus their JSON encodings.

use std::ops::Index;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use super::ast::{TransitionFn, Type, Value};
use super::DslError;

/// Parameter name to value, in declaration order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamMap(IndexMap<String, f64>);

impl ParamMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, f64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.0).expect("finite floats serialize")
    }

    /// Checks that the map covers exactly the declared parameters and
    /// reorders it to declaration order.
    pub fn validated(self, f: &TransitionFn) -> Result<Self, DslError> {
        let missing: Vec<String> = f.params.iter().filter(|p| !self.contains(p)).cloned().collect();
        let extra: Vec<String> = self.0.keys().filter(|k| !f.has_param(k)).cloned().collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(DslError::SignatureMismatch { what: "params".into(), missing, extra });
        }
        Ok(ParamMap(f.params.iter().map(|p| (p.clone(), self.0[p.as_str()])).collect()))
    }
}

impl Index<&str> for ParamMap {
    type Output = f64;
    fn index(&self, name: &str) -> &f64 {
        &self.0[name]
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for ParamMap {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        ParamMap(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Snapshot of inputs, persistent variables, and state at the start of a step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceElement {
    pub t: u64,
    pub state: String,
    pub ins: IndexMap<String, Value>,
    pub vars: IndexMap<String, Value>,
}

impl TraceElement {
    pub fn to_json(&self) -> Json {
        json!({
            "t": self.t,
            "state": self.state,
            "in": values_to_json(&self.ins),
            "var": values_to_json(&self.vars),
        })
    }

    pub fn from_json(j: &Json, f: &TransitionFn) -> Result<Self, DslError> {
        let obj = j.as_object().ok_or_else(|| schema("trace element must be an object"))?;
        for k in obj.keys() {
            if !matches!(k.as_str(), "t" | "state" | "in" | "var") {
                return Err(schema(format!("unexpected key `{k}` in trace element")));
            }
        }
        let t = obj
            .get("t")
            .and_then(Json::as_u64)
            .ok_or_else(|| schema("`t` must be a nonnegative integer"))?;
        let state = obj
            .get("state")
            .and_then(Json::as_str)
            .ok_or_else(|| schema("`state` must be a string"))?
            .to_string();
        if !f.has_state(&state) {
            return Err(DslError::UnknownState(state));
        }
        let ins_sig: Vec<(&String, Type)> = f.inputs.iter().map(|(n, t)| (n, *t)).collect();
        let var_sig: Vec<(&String, Type)> = f.persistent_vars().map(|(n, d)| (n, d.ty)).collect();
        let ins = values_from_json(obj.get("in"), &ins_sig, "in")?;
        let vars = values_from_json(obj.get("var"), &var_sig, "var")?;
        Ok(TraceElement { t, state, ins, vars })
    }
}

fn schema(msg: impl Into<String>) -> DslError {
    DslError::Schema(msg.into())
}

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Num(x) => json!(x),
        Value::Vec2(x, y) => json!([x, y]),
        Value::Bool(b) => json!(b),
        Value::State(s) => json!(s),
    }
}

fn values_to_json(m: &IndexMap<String, Value>) -> Json {
    Json::Object(m.iter().map(|(k, v)| (k.clone(), value_to_json(v))).collect::<Map<_, _>>())
}

pub fn value_from_json(j: &Json, ty: Type) -> Option<Value> {
    match ty {
        Type::Num => j.as_f64().filter(|x| x.is_finite()).map(Value::Num),
        Type::Vec2 => {
            let a = j.as_array()?;
            match a.as_slice() {
                [x, y] => {
                    let (x, y) = (x.as_f64()?, y.as_f64()?);
                    (x.is_finite() && y.is_finite()).then_some(Value::Vec2(x, y))
                }
                _ => None,
            }
        }
        Type::Bool => j.as_bool().map(Value::Bool),
        Type::State => j.as_str().map(|s| Value::State(s.to_string())),
    }
}

fn values_from_json(
    j: Option<&Json>,
    sig: &[(&String, Type)],
    what: &str,
) -> Result<IndexMap<String, Value>, DslError> {
    let empty = Map::new();
    let obj = match j {
        None => &empty,
        Some(j) => j.as_object().ok_or_else(|| schema(format!("`{what}` must be an object")))?,
    };
    let missing: Vec<String> = sig.iter().filter(|(n, _)| !obj.contains_key(*n)).map(|(n, _)| (*n).clone()).collect();
    let extra: Vec<String> = obj.keys().filter(|k| !sig.iter().any(|(n, _)| n == k)).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(DslError::SignatureMismatch { what: what.into(), missing, extra });
    }
    sig.iter()
        .map(|(n, ty)| {
            value_from_json(&obj[n.as_str()], *ty)
                .map(|v| ((*n).clone(), v))
                .ok_or_else(|| schema(format!("`{what}.{n}` must be a finite {ty}")))
        })
        .collect()
}

/// An ordered sequence of trace elements with strictly increasing timesteps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    elements: Vec<TraceElement>,
}

impl Trace {
    pub fn new(elements: Vec<TraceElement>) -> Result<Self, DslError> {
        for w in elements.windows(2) {
            if w[1].t <= w[0].t {
                return Err(schema(format!("timestep {} follows {}", w[1].t, w[0].t)));
            }
        }
        Ok(Trace { elements })
    }

    pub fn elements(&self) -> &[TraceElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element recorded at timestep `t`.
    pub fn get(&self, t: u64) -> Option<&TraceElement> {
        self.elements.binary_search_by_key(&t, |e| e.t).ok().map(|i| &self.elements[i])
    }

    pub(crate) fn push(&mut self, e: TraceElement) {
        debug_assert!(self.elements.last().is_none_or(|l| l.t < e.t));
        self.elements.push(e);
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.elements {
            s.push_str(&e.to_json().to_string());
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correction {
    pub t: u64,
    pub expected: String,
}

impl Correction {
    pub fn new(t: u64, expected: impl Into<String>) -> Self {
        Correction { t, expected: expected.into() }
    }
}

pub fn parse_trace(src: &str, f: &TransitionFn) -> Result<Trace, DslError> {
    let mut elems = Vec::new();
    for (lineno, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let j: Json = serde_json::from_str(line)
            .map_err(|e| schema(format!("line {}: {e}", lineno + 1)))?;
        elems.push(TraceElement::from_json(&j, f).map_err(|e| match e {
            DslError::Schema(m) => schema(format!("line {}: {m}", lineno + 1)),
            other => other,
        })?);
    }
    Trace::new(elems)
}

pub fn parse_corrections(src: &str, f: &TransitionFn) -> Result<Vec<Correction>, DslError> {
    let cs: Vec<Correction> = serde_json::from_str(src).map_err(|e| schema(e.to_string()))?;
    for c in &cs {
        if !f.has_state(&c.expected) {
            return Err(DslError::UnknownState(c.expected.clone()));
        }
    }
    Ok(cs)
}

pub fn parse_params(src: &str, f: &TransitionFn) -> Result<ParamMap, DslError> {
    let raw: IndexMap<String, Json> = serde_json::from_str(src).map_err(|e| schema(e.to_string()))?;
    let mut p = ParamMap::new();
    for (k, v) in raw {
        let x = v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| schema(format!("param `{k}` must be a finite number")))?;
        p.insert(k, x);
    }
    p.validated(f)
}

pub fn corrections_to_json(cs: &[Correction]) -> String {
    serde_json::to_string(cs).expect("corrections serialize")
}
