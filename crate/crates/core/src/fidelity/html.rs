//! Parser for the restricted HTML subset used by canonical ground-truth pages.
//!
//! Not a conforming HTML5 parser. It handles elements, attributes, comments,
//! doctype, character references, void elements and raw-text `script`/`style`.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct HtmlError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DomNode {
    /// Lowercased tag name. The synthetic root is `#document`.
    pub tag: String,
    /// Lowercased attribute names; values kept as written.
    pub attrs: BTreeMap<String, String>,
    pub children: Vec<DomNode>,
    /// Text directly inside this element, whitespace-normalized.
    pub text: String,
}

impl DomNode {
    pub fn element(tag: &str) -> Self {
        Self {
            tag: tag.to_string(),
            ..Self::default()
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).map(String::as_str)
    }

    /// Pre-order traversal including `self`.
    pub fn descendants(&self) -> Vec<&DomNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.descendants());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    pub root: DomNode,
    /// Recoverable problems, such as stray end tags.
    pub warnings: Vec<String>,
}

const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];
const RAW_TEXT: &[&str] = &["script", "style"];

/// Runs of ASCII whitespace become one space; leading and trailing removed.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_ascii_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let decoded = rest[1..].find(';').filter(|&end| end <= 10).and_then(|end| {
            let name = &rest[1..=end];
            decode_one(name).map(|c| (c, end + 2))
        });
        match decoded {
            Some((c, used)) => {
                out.push(c);
                rest = &rest[used..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_one(name: &str) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "copy" => '\u{a9}',
        "reg" => '\u{ae}',
        "trade" => '\u{2122}',
        "hellip" => '\u{2026}',
        "mdash" => '\u{2014}',
        "ndash" => '\u{2013}',
        "middot" => '\u{b7}',
        "laquo" => '\u{ab}',
        "raquo" => '\u{bb}',
        "times" => '\u{d7}',
        "euro" => '\u{20ac}',
        "pound" => '\u{a3}',
        _ => return None,
    })
}

struct Open {
    node: DomNode,
    raw_text: Vec<String>,
}

impl Open {
    fn new(node: DomNode) -> Self {
        Self {
            node,
            raw_text: Vec::new(),
        }
    }

    fn finish(mut self) -> DomNode {
        let joined = self.raw_text.join(" ");
        self.node.text = normalize_whitespace(&decode_entities(&joined));
        self.node
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    stack: Vec<Open>,
    warnings: Vec<String>,
}

impl<'a> Parser<'a> {
    fn line_at(&self, pos: usize) -> usize {
        self.src[..pos].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err(&self, pos: usize, message: impl Into<String>) -> HtmlError {
        HtmlError {
            line: self.line_at(pos),
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn push_text(&mut self, text: &str) {
        if !text.trim_matches(|c: char| c.is_ascii_whitespace()).is_empty() {
            self.stack.last_mut().expect("root").raw_text.push(text.to_string());
        }
    }

    fn close_top(&mut self) {
        let done = self.stack.pop().expect("non-root").finish();
        self.stack.last_mut().expect("root").node.children.push(done);
    }

    fn run(mut self) -> Result<DomTree, HtmlError> {
        while self.pos < self.src.len() {
            let rest = self.rest();
            let Some(lt) = rest.find('<') else {
                self.push_text(rest);
                self.pos = self.src.len();
                break;
            };
            self.push_text(&rest[..lt]);
            self.pos += lt;
            self.markup()?;
        }
        while self.stack.len() > 1 {
            let tag = self.stack.last().map(|o| o.node.tag.clone()).unwrap_or_default();
            self.warnings.push(format!("<{tag}> not closed before end of input"));
            self.close_top();
        }
        let root = self.stack.pop().expect("root").finish();
        Ok(DomTree {
            root,
            warnings: self.warnings,
        })
    }

    /// Handles the construct starting at `<`.
    fn markup(&mut self) -> Result<(), HtmlError> {
        let start = self.pos;
        let rest = self.rest();
        if let Some(body) = rest.strip_prefix("<!--") {
            let end = body
                .find("-->")
                .ok_or_else(|| self.err(start, "unterminated comment"))?;
            self.pos += 4 + end + 3;
            return Ok(());
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            let end = rest
                .find('>')
                .ok_or_else(|| self.err(start, "unterminated declaration"))?;
            self.pos += end + 1;
            return Ok(());
        }
        if let Some(after) = rest.strip_prefix("</") {
            if !after.starts_with(|c: char| c.is_ascii_alphabetic()) {
                return Err(self.err(start, "malformed end tag"));
            }
            let end = after
                .find('>')
                .ok_or_else(|| self.err(start, "unterminated end tag"))?;
            let name = after[..end].trim().to_ascii_lowercase();
            self.pos += 2 + end + 1;
            self.end_tag(&name, start);
            return Ok(());
        }
        if !rest[1..].starts_with(|c: char| c.is_ascii_alphabetic()) {
            // A bare '<' is literal text.
            self.push_text("<");
            self.pos += 1;
            return Ok(());
        }
        self.start_tag(start)
    }

    fn end_tag(&mut self, name: &str, at: usize) {
        match self.stack.iter().rposition(|o| o.node.tag == name) {
            Some(0) | None => {
                let line = self.line_at(at);
                self.warnings
                    .push(format!("line {line}: stray </{name}> ignored"));
            }
            Some(idx) => {
                while self.stack.len() > idx + 1 {
                    let tag = self.stack.last().map(|o| o.node.tag.clone()).unwrap_or_default();
                    let line = self.line_at(at);
                    self.warnings
                        .push(format!("line {line}: <{tag}> implicitly closed by </{name}>"));
                    self.close_top();
                }
                self.close_top();
            }
        }
    }

    fn start_tag(&mut self, start: usize) -> Result<(), HtmlError> {
        let bytes = self.src.as_bytes();
        let mut i = self.pos + 1;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' && bytes[i] != b'/'
        {
            i += 1;
        }
        let tag = self.src[self.pos + 1..i].to_ascii_lowercase();
        let mut node = DomNode::element(&tag);
        let mut self_closing = false;

        loop {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i >= bytes.len() {
                return Err(self.err(start, format!("unterminated <{tag}> tag")));
            }
            match bytes[i] {
                b'>' => {
                    i += 1;
                    break;
                }
                b'/' => {
                    self_closing = true;
                    i += 1;
                    continue;
                }
                _ => {}
            }
            self_closing = false;
            let name_start = i;
            while i < bytes.len()
                && !bytes[i].is_ascii_whitespace()
                && !matches!(bytes[i], b'=' | b'>' | b'/')
            {
                i += 1;
            }
            let name = self.src[name_start..i].to_ascii_lowercase();
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            let mut value = String::new();
            if i < bytes.len() && bytes[i] == b'=' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                    let quote = bytes[i] as char;
                    let close = self.src[i + 1..].find(quote).ok_or_else(|| {
                        self.err(start, format!("unterminated attribute value in <{tag}>"))
                    })?;
                    value = self.src[i + 1..i + 1 + close].to_string();
                    i += close + 2;
                } else {
                    let v_start = i;
                    while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' {
                        i += 1;
                    }
                    value = self.src[v_start..i].to_string();
                }
            }
            if !name.is_empty() {
                node.attrs.entry(name).or_insert(value);
            }
        }
        self.pos = i;

        if VOID.contains(&tag.as_str()) || self_closing {
            self.stack.last_mut().expect("root").node.children.push(node);
            return Ok(());
        }
        if RAW_TEXT.contains(&tag.as_str()) {
            let closing = format!("</{tag}");
            let lower = self.rest().to_ascii_lowercase();
            let end = lower
                .find(&closing)
                .ok_or_else(|| self.err(start, format!("unterminated <{tag}> element")))?;
            let after = self.pos + end;
            let gt = self.src[after..]
                .find('>')
                .ok_or_else(|| self.err(after, format!("unterminated </{tag}> tag")))?;
            self.pos = after + gt + 1;
            // Content is dropped; the element is kept so callers can see it existed.
            self.stack.last_mut().expect("root").node.children.push(node);
            return Ok(());
        }
        self.stack.push(Open::new(node));
        Ok(())
    }
}

/// Parses `text` into a tree under a synthetic `#document` root.
///
/// Stray end tags and elements left open at end of input are recovered from
/// with a warning. Unterminated tags, comments, quoted attribute values and
/// raw-text elements are errors.
pub fn parse_canonical_html(text: &str) -> Result<DomTree, HtmlError> {
    Parser {
        src: text,
        pos: 0,
        stack: vec![Open::new(DomNode::element("#document"))],
        warnings: Vec::new(),
    }
    .run()
}
