//! Prompt templates. A template file holds named sections, each opened by a
//! `=== name` line. `{{var}}` placeholders are filled in a single pass, so
//! substituted text is never rescanned.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::GenError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    sections: BTreeMap<String, String>,
}

impl Template {
    pub fn parse(text: &str) -> Self {
        let mut sections = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        for line in text.lines() {
            if let Some(name) = line.strip_prefix("=== ") {
                if let Some((n, body)) = current.take() {
                    sections.insert(n, body.join("\n").trim_end().to_string());
                }
                current = Some((name.trim().to_string(), Vec::new()));
            } else if let Some((_, body)) = current.as_mut() {
                body.push(line);
            }
        }
        if let Some((n, body)) = current {
            sections.insert(n, body.join("\n").trim_end().to_string());
        }
        Self { sections }
    }

    pub fn section(&self, name: &str) -> Result<&str, GenError> {
        self.sections
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| GenError::Template(format!("missing section '{name}'")))
    }

    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, GenError> {
        fill(self.section(name)?, vars)
            .map_err(|var| GenError::Template(format!("section '{name}': no value for {{{{{var}}}}}")))
    }
}

fn is_var_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Replaces `{{name}}` with its value. Returns the first unknown name as the
/// error. Braces that do not enclose a plain identifier are left alone.
pub fn fill(text: &str, vars: &[(&str, &str)]) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) if is_var_name(&after[..close]) => {
                let name = &after[..close];
                let value = vars
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| name.to_string())?;
                out.push_str(&rest[..open]);
                out.push_str(value);
                rest = &after[close + 2..];
            }
            _ => {
                out.push_str(&rest[..open + 2]);
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// The three prompt templates plus a version tag recorded with every run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub version: String,
    pub schema: Template,
    pub html: Template,
    pub judge: Template,
}

const REQUIRED: &[(&str, &[&str])] = &[
    ("schema", &["system", "user", "elements_present", "elements_absent"]),
    ("html", &["system", "user", "orphans_present", "assets_present", "assets_absent"]),
    ("judge", &["system", "user"]),
];

impl TemplateSet {
    /// Templates compiled into the library.
    pub fn builtin() -> Self {
        Self {
            version: "v1".to_string(),
            schema: Template::parse(include_str!("../../templates/v1/schema.txt")),
            html: Template::parse(include_str!("../../templates/v1/html.txt")),
            judge: Template::parse(include_str!("../../templates/v1/judge.txt")),
        }
    }

    /// Loads `schema.txt`, `html.txt` and `judge.txt` from `dir`. The
    /// directory name becomes the version tag.
    pub fn load_dir(dir: &Path) -> Result<Self, GenError> {
        let read = |name: &str| -> Result<Template, GenError> {
            let path = dir.join(format!("{name}.txt"));
            let text = fs::read_to_string(&path)
                .map_err(|e| GenError::Template(format!("{}: {e}", path.display())))?;
            Ok(Template::parse(&text))
        };
        let set = Self {
            version: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".into()),
            schema: read("schema")?,
            html: read("html")?,
            judge: read("judge")?,
        };
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<(), GenError> {
        for (kind, names) in REQUIRED {
            let t = match *kind {
                "schema" => &self.schema,
                "html" => &self.html,
                _ => &self.judge,
            };
            for n in *names {
                t.section(n)
                    .map_err(|e| GenError::Template(format!("{kind}.txt: {e}")))?;
            }
        }
        Ok(())
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}
