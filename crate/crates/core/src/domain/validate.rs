use super::{BenchmarkSpec, Capability, MetricKind, SourceDescriptor};

const REQUIRED_FIELDS: [&str; 3] = ["context", "question", "gold"];
const OPTIONAL_FIELDS: [&str; 2] = ["choices", "task_id"];

/// Checks a benchmark spec against every invariant and returns all
/// violations as `field: message` strings. An empty list means valid.
pub fn validate_spec(spec: &BenchmarkSpec) -> Vec<String> {
    let mut v = Vec::new();

    if spec.id.trim().is_empty() {
        v.push("id: must be nonempty".to_string());
    }
    if let Capability::Unknown(name) = &spec.capability {
        let known: Vec<&str> = Capability::ALL.iter().map(Capability::as_str).collect();
        v.push(format!(
            "capability: unknown capability '{name}', expected one of {}",
            known.join(", ")
        ));
    }

    match &spec.metric.kind {
        MetricKind::Unknown(name) => {
            v.push(format!("metric.kind: unknown metric kind '{name}'"));
        }
        MetricKind::PassAtK if spec.metric.k.unwrap_or(0) < 1 => {
            v.push("metric.k: pass_at_k requires k >= 1".to_string());
        }
        MetricKind::Judge if spec.metric.rubric_id.as_deref().unwrap_or("").is_empty() => {
            v.push("metric.rubric_id: judge metric requires a rubric id".to_string());
        }
        _ => {}
    }

    for field in REQUIRED_FIELDS {
        match spec.field_map.get(field) {
            None => v.push(format!(
                "field_map.{field}: missing mapping for canonical field '{field}'"
            )),
            Some(raw) if raw.trim().is_empty() => {
                v.push(format!("field_map.{field}: raw key must be nonempty"))
            }
            Some(_) => {}
        }
    }
    for key in spec.field_map.keys() {
        if !REQUIRED_FIELDS.contains(&key.as_str()) && !OPTIONAL_FIELDS.contains(&key.as_str()) {
            v.push(format!("field_map.{key}: not a canonical field"));
        }
    }

    if spec.template_id.trim().is_empty() {
        v.push("template_id: must be nonempty".to_string());
    }
    let (lo, hi) = spec.declared_length_range;
    if lo > hi {
        v.push(format!("length_range: lower bound {lo} exceeds upper bound {hi}"));
    }

    match &spec.source {
        SourceDescriptor::Local { uri } => {
            if uri.as_os_str().is_empty() {
                v.push("source.uri: must be nonempty".to_string());
            }
        }
        SourceDescriptor::Http { uri } => {
            if !(uri.starts_with("http://") || uri.starts_with("https://")) {
                v.push(format!("source.uri: '{uri}' is not an http(s) URL"));
            }
        }
        SourceDescriptor::Synthetic { params, .. } => {
            let d = &params.depth_fractions;
            if d.is_empty() {
                v.push("source.params.depth_fractions: must be nonempty".to_string());
            }
            if d.iter().any(|x| !(0.0..=1.0).contains(x)) {
                v.push("source.params.depth_fractions: values must lie in [0, 1]".to_string());
            }
            if d.windows(2).any(|w| w[0] > w[1]) {
                v.push("source.params.depth_fractions: must be sorted ascending".to_string());
            }
            if params.instances < 1 {
                v.push("source.params.instances: must be at least 1".to_string());
            }
            if params.context_tokens < 1 {
                v.push("source.params.context_tokens: must be at least 1".to_string());
            }
            if params.needle_count < 1 {
                v.push("source.params.needle_count: must be at least 1".to_string());
            }
            if params.chain_length < 1 {
                v.push("source.params.chain_length: must be at least 1".to_string());
            }
        }
    }
    v
}
