//! Addressing numeric leaves of a specification tree.
//!
//! A path is a dot-separated list of segments, optionally prefixed by the
//! section name (`service.` or `net.`). On objects a segment is a key; on
//! arrays it is either `[i]` or the `id` of an element. Keys may carry index
//! suffixes: `outputs.random[0].weight`.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
enum Step {
    Key(String),
    Index(usize),
}

fn split(segment: &str) -> Result<Vec<Step>, String> {
    let mut steps = Vec::new();
    let (head, mut rest) = match segment.find('[') {
        Some(i) => (&segment[..i], &segment[i..]),
        None => (segment, ""),
    };
    if !head.is_empty() {
        steps.push(Step::Key(head.to_string()));
    }
    while !rest.is_empty() {
        let close = rest.find(']').ok_or_else(|| format!("unclosed `[` in `{segment}`"))?;
        let idx = rest[1..close]
            .parse()
            .map_err(|_| format!("bad index in `{segment}`"))?;
        steps.push(Step::Index(idx));
        rest = &rest[close + 1..];
        if !rest.is_empty() && !rest.starts_with('[') {
            return Err(format!("unexpected `{rest}` in `{segment}`"));
        }
    }
    if steps.is_empty() {
        return Err("empty path segment".into());
    }
    Ok(steps)
}

/// Mutable reference to the numeric leaf named by `path` within `root`.
pub fn resolve_mut<'v>(root: &'v mut Value, path: &str) -> Result<&'v mut Value, String> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(format!("malformed path `{path}`"));
    }
    let mut cur = root;
    let mut i = 0;
    // the section key is optional
    if let Value::Object(m) = &*cur {
        if m.len() == 1 && !m.contains_key(segments[0]) {
            let section = m.keys().next().expect("one key").clone();
            cur = cur.get_mut(&section).expect("present");
        }
    }
    while i < segments.len() {
        if let Value::Array(items) = &*cur {
            if !segments[i].starts_with('[') {
                // element by id; ids may themselves contain dots, longest match wins
                let mut found = None;
                for j in (i + 1..=segments.len()).rev() {
                    let joined = segments[i..j].join(".");
                    let (id, tail) = match joined.find('[') {
                        Some(k) => (joined[..k].to_string(), joined[k..].to_string()),
                        None => (joined.clone(), String::new()),
                    };
                    if let Some(pos) = items.iter().position(|e| e.get("id").and_then(Value::as_str) == Some(&id)) {
                        found = Some((pos, j, tail));
                        break;
                    }
                }
                let (pos, next, tail) = found.ok_or_else(|| format!("no element with id `{}` at `{path}`", segments[i]))?;
                cur = &mut cur.as_array_mut().expect("array")[pos];
                for step in if tail.is_empty() { Vec::new() } else { split(&tail)? } {
                    cur = apply(cur, &step, path)?;
                }
                i = next;
                continue;
            }
        }
        for step in split(segments[i])? {
            cur = apply(cur, &step, path)?;
        }
        i += 1;
    }
    if cur.is_number() {
        Ok(cur)
    } else {
        Err(format!("`{path}` does not name a numeric value"))
    }
}

fn apply<'v>(cur: &'v mut Value, step: &Step, path: &str) -> Result<&'v mut Value, String> {
    match (cur, step) {
        (Value::Object(m), Step::Key(k)) => m.get_mut(k).ok_or_else(|| format!("no key `{k}` at `{path}`")),
        (Value::Array(a), Step::Index(i)) => {
            let len = a.len();
            a.get_mut(*i).ok_or_else(|| format!("index {i} out of range ({len}) at `{path}`"))
        }
        (Value::Array(a), Step::Key(id)) => a
            .iter_mut()
            .find(|e| e.get("id").and_then(Value::as_str) == Some(id))
            .ok_or_else(|| format!("no element with id `{id}` at `{path}`")),
        (_, Step::Key(k)) => Err(format!("cannot select `{k}` in a non-object at `{path}`")),
        (_, Step::Index(i)) => Err(format!("cannot index [{i}] into a non-array at `{path}`")),
    }
}
