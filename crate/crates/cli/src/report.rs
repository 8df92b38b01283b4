use serde::Serialize;
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn failed(self) -> bool {
        matches!(self, Status::Fail | Status::Error)
    }

    fn word(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
        }
    }
}

/// One task's result: ordered key/value fields.
#[derive(Clone, Debug)]
pub struct TaskReport {
    pub kind: String,
    pub label: String,
    pub status: Status,
    pub fields: Vec<(String, Value)>,
}

impl TaskReport {
    pub fn new(kind: &str, label: impl Into<String>) -> Self {
        TaskReport { kind: kind.into(), label: label.into(), status: Status::Ok, fields: Vec::new() }
    }

    pub fn field(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.fields.push((key.into(), serde_json::to_value(value).expect("serializable")));
        self
    }

    /// Pass or fail, leaving errors alone.
    pub fn verdict(&mut self, ok: bool) -> &mut Self {
        if self.status != Status::Error {
            self.status = if ok { Status::Pass } else { Status::Fail };
        }
        self
    }

    pub fn error(kind: &str, label: impl Into<String>, err: &anyhow::Error) -> Self {
        let mut r = TaskReport::new(kind, label);
        r.status = Status::Error;
        r.field("error", format!("{err:#}"));
        r
    }
}

fn text_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => format!("[{}]", items.iter().map(text_value).collect::<Vec<_>>().join(", ")),
        Value::Object(map) => format!("{{{}}}", map.iter().map(|(k, v)| format!("{k}: {}", text_value(v))).collect::<Vec<_>>().join(", ")),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

pub fn render_text(reports: &[TaskReport]) -> String {
    let mut out = String::new();
    for (k, r) in reports.iter().enumerate() {
        out.push_str(&format!("[{}] {} {}: {}\n", k + 1, r.kind, r.label, r.status.word()));
        for (key, v) in &r.fields {
            out.push_str(&format!("    {key} = {}\n", text_value(v)));
        }
    }
    let failed = reports.iter().filter(|r| r.status.failed()).count();
    out.push_str(&format!("{} tasks, {failed} failed\n", reports.len()));
    out
}

pub fn render_structured(reports: &[TaskReport]) -> String {
    let tasks: Vec<Value> = reports
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let result: Map<String, Value> = r.fields.iter().cloned().collect();
            json!({ "index": k + 1, "kind": r.kind, "label": r.label, "status": r.status, "result": result })
        })
        .collect();
    let failed = reports.iter().filter(|r| r.status.failed()).count();
    let doc = json!({ "tasks": tasks, "summary": { "tasks": reports.len(), "failed": failed } });
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}
