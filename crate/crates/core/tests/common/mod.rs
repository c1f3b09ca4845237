//! The configuration fleet shared by the integration tests.

use std::path::PathBuf;

use holotrace::systems::MapWeightSystem;
use serde_json::Value;

pub struct FleetSystem {
    pub name: String,
    pub system: MapWeightSystem,
    pub order: usize,
    pub eigs: usize,
    pub basis: usize,
    pub tilde: f64,
    pub granularity: usize,
    pub quadrature: bool,
}

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn load(name: &str) -> FleetSystem {
    let path = configs_dir().join(format!("{name}.json"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let sys = &v["system"];
    let tail = sys.get("tail").map(|t| serde_json::from_value(t.clone()).unwrap());
    let system = MapWeightSystem::new(
        serde_json::from_value(sys["domain"].clone()).unwrap(),
        serde_json::from_value(sys["branches"].clone()).unwrap(),
        tail,
    )
    .unwrap();
    let p = &v["params"];
    let get = |k: &str, default: u64| p.get(k).and_then(Value::as_u64).unwrap_or(default) as usize;
    FleetSystem {
        name: name.to_string(),
        system,
        order: get("order", 12),
        eigs: get("eigs", 3),
        basis: get("basis", 20),
        tilde: p.get("tilde").and_then(Value::as_f64).unwrap_or(0.85),
        granularity: get("granularity", 4),
        quadrature: p.get("quadrature").and_then(Value::as_bool).unwrap_or(false),
    }
}

pub const FLEET: [&str; 6] = ["single", "doubling", "doubling-large", "mobius", "product", "gauss64"];

pub fn fleet() -> Vec<FleetSystem> {
    FLEET.iter().map(|n| load(n)).collect()
}
