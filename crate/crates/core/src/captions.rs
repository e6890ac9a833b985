//! Template captions with the literal `<OBJ>`/`</OBJ>` and `<BG>`/`</BG>`
//! tokens, and a strict grammar check for them.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OBJ_OPEN: &str = "<OBJ>";
pub const OBJ_CLOSE: &str = "</OBJ>";
pub const BG_OPEN: &str = "<BG>";
pub const BG_CLOSE: &str = "</BG>";

/// Largest object count covered by the built-in template library.
pub const BUILTIN_MAX_OBJECTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionTemplate {
    pub id: String,
    pub style: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placeholder {
    Obj(usize),
    Bg,
    Extra,
}

/// Splits a body into literal text and placeholders.
fn parse_body(body: &str) -> Result<Vec<(String, Option<Placeholder>)>> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| Error::arg(format!("unterminated placeholder in `{body}`")))?;
        let name = &rest[open + 1..close];
        let ph = match name {
            "bg" => Placeholder::Bg,
            "extra" => Placeholder::Extra,
            _ => match name.strip_prefix("obj_").and_then(|n| n.parse::<usize>().ok()) {
                Some(i) if i >= 1 => Placeholder::Obj(i),
                _ => return Err(Error::arg(format!("unknown placeholder `{{{name}}}`"))),
            },
        };
        out.push((rest[..open].to_string(), Some(ph)));
        rest = &rest[close + 1..];
    }
    out.push((rest.to_string(), None));
    Ok(out)
}

impl CaptionTemplate {
    /// Number of `{obj_i}` slots; also checks the body is well formed.
    pub fn object_slots(&self) -> Result<usize> {
        let parts = parse_body(&self.body)?;
        let mut idx: Vec<usize> = parts
            .iter()
            .filter_map(|(_, p)| match p {
                Some(Placeholder::Obj(i)) => Some(*i),
                _ => None,
            })
            .collect();
        idx.sort_unstable();
        for (n, &i) in idx.iter().enumerate() {
            if i != n + 1 {
                return Err(Error::arg(format!(
                    "template `{}`: object placeholders must be {{obj_1}}..{{obj_n}} used once each",
                    self.id
                )));
            }
        }
        let bgs = parts
            .iter()
            .filter(|(_, p)| *p == Some(Placeholder::Bg))
            .count();
        if bgs > 1 {
            return Err(Error::arg(format!("template `{}`: {{bg}} used {bgs} times", self.id)));
        }
        Ok(idx.len())
    }

    pub fn has_bg_slot(&self) -> bool {
        self.body.contains("{bg}")
    }
}

/// What goes into a caption, already ordered for the conditioning images.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaptionDirectives {
    /// Descriptions wrapped in `<OBJ>` blocks, in conditioning order.
    pub wrapped: Vec<String>,
    pub background: Option<String>,
    /// Text-only objects, emitted outside any token block.
    pub extras: Vec<String>,
    /// Sentence describing a replacement edit.
    pub edit: Option<String>,
}

fn list_phrase(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [a] => a.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn render_caption(template: &CaptionTemplate, d: &CaptionDirectives) -> Result<String> {
    let slots = template.object_slots()?;
    if slots != d.wrapped.len() {
        return Err(Error::invariant(format!(
            "template `{}` has {slots} object placeholders but {} object descriptions were given",
            template.id,
            d.wrapped.len()
        )));
    }
    for (what, text) in d
        .wrapped
        .iter()
        .map(|t| ("object", t))
        .chain(d.background.iter().map(|t| ("background", t)))
    {
        if text.trim().is_empty() {
            return Err(Error::arg(format!("empty {what} description")));
        }
        if [OBJ_OPEN, OBJ_CLOSE, BG_OPEN, BG_CLOSE].iter().any(|t| text.contains(t)) {
            return Err(Error::arg(format!("{what} description contains a reserved token: `{text}`")));
        }
    }
    let mut extra = String::new();
    if !d.extras.is_empty() {
        extra = format!("Also featuring {}.", list_phrase(&d.extras));
    }
    if let Some(edit) = &d.edit {
        extra = format!("{extra} {edit}");
    }
    let mut out = String::new();
    for (text, ph) in parse_body(&template.body)? {
        out.push_str(&text);
        match ph {
            Some(Placeholder::Obj(i)) => {
                out.push(' ');
                out.push_str(OBJ_OPEN);
                out.push_str(d.wrapped[i - 1].trim());
                out.push_str(OBJ_CLOSE);
                out.push(' ');
            }
            Some(Placeholder::Bg) => {
                if let Some(bg) = &d.background {
                    out.push(' ');
                    out.push_str(BG_OPEN);
                    out.push_str(bg.trim());
                    out.push_str(BG_CLOSE);
                    out.push(' ');
                }
            }
            Some(Placeholder::Extra) => {
                out.push(' ');
                out.push_str(&extra);
                out.push(' ');
            }
            None => {}
        }
    }
    let mut out = collapse_ws(&out);
    // punctuation directly after a block
    for p in [" .", " ,"] {
        out = out.replace(p, &p[1..]);
    }
    Ok(out)
}

/// Built-in template library: styles `studio` and `scene` for 0..=8 objects,
/// with ids like `studio/2`.
pub fn builtin_templates() -> Vec<CaptionTemplate> {
    let mut out = Vec::new();
    for n in 0..=BUILTIN_MAX_OBJECTS {
        let slots: Vec<String> = (1..=n).map(|i| format!("{{obj_{i}}}")).collect();
        let list = list_phrase(&slots);
        let studio = if n == 0 {
            "A product photo of {bg}. {extra}".to_string()
        } else {
            format!("A product photo of {list} on {{bg}}. {{extra}}")
        };
        let scene = if n == 0 {
            "An empty scene showing {bg}. {extra}".to_string()
        } else {
            format!("{list} placed together in {{bg}}. {{extra}}")
        };
        out.push(CaptionTemplate {
            id: format!("studio/{n}"),
            style: "studio".into(),
            body: studio,
        });
        out.push(CaptionTemplate {
            id: format!("scene/{n}"),
            style: "scene".into(),
            body: scene,
        });
    }
    out
}

pub fn load_templates(path: &Path) -> Result<Vec<CaptionTemplate>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let templates: Vec<CaptionTemplate> =
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
    for t in &templates {
        t.object_slots()?;
    }
    Ok(templates)
}

/// Finds the template for `id` with `n_wrapped` object slots: the exact id
/// if its slot count matches, otherwise a template of the same style (the
/// part of `id` before `/`) with the right count.
pub fn resolve_template<'a>(
    templates: &'a [CaptionTemplate],
    id: &str,
    n_wrapped: usize,
) -> Result<&'a CaptionTemplate> {
    if let Some(t) = templates.iter().find(|t| t.id == id) {
        if t.object_slots()? == n_wrapped {
            return Ok(t);
        }
    }
    let style = id.split('/').next().unwrap_or(id);
    for t in templates.iter().filter(|t| t.style == style) {
        if t.object_slots()? == n_wrapped {
            return Ok(t);
        }
    }
    Err(Error::invariant(format!(
        "no caption template of style `{style}` with {n_wrapped} object placeholders"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Obj,
    Bg,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenKind::Obj => "OBJ",
            TokenKind::Bg => "BG",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// An opening token inside an open block.
    Nested { kind: TokenKind, at: usize },
    /// A closing token with no matching open block.
    Unbalanced { kind: TokenKind, at: usize },
    /// A block still open at the end of the caption.
    Unclosed { kind: TokenKind },
    EmptyBlock { kind: TokenKind, at: usize },
    CountMismatch {
        kind: TokenKind,
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Nested { kind, at } => write!(f, "nested {kind} at byte {at}"),
            Violation::Unbalanced { kind, at } => {
                write!(f, "unbalanced {kind}: stray closing token at byte {at}")
            }
            Violation::Unclosed { kind } => write!(f, "unclosed {kind} block"),
            Violation::EmptyBlock { kind, at } => write!(f, "empty {kind} block at byte {at}"),
            Violation::CountMismatch {
                kind,
                expected,
                found,
            } => write!(f, "count mismatch: expected {expected} {kind} blocks, found {found}"),
        }
    }
}

fn next_token(s: &str, from: usize) -> Option<(usize, TokenKind, bool, usize)> {
    let mut i = from;
    while let Some(off) = s[i..].find('<') {
        let at = i + off;
        let rest = &s[at..];
        for (tok, kind, open) in [
            (OBJ_OPEN, TokenKind::Obj, true),
            (OBJ_CLOSE, TokenKind::Obj, false),
            (BG_OPEN, TokenKind::Bg, true),
            (BG_CLOSE, TokenKind::Bg, false),
        ] {
            if rest.starts_with(tok) {
                return Some((at, kind, open, tok.len()));
            }
        }
        i = at + 1;
    }
    None
}

/// Checks token grammar; an empty list means the caption is valid.
pub fn validate_caption(caption: &str, n_wrapped: usize, has_bg: bool) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut open: Option<(TokenKind, usize, usize)> = None;
    let mut counts = [0usize; 2];
    let mut pos = 0;
    while let Some((at, kind, is_open, len)) = next_token(caption, pos) {
        pos = at + len;
        if is_open {
            if open.is_some() {
                v.push(Violation::Nested { kind, at });
            }
            open = Some((kind, at, pos));
        } else {
            match open {
                Some((k, start, body)) if k == kind => {
                    if caption[body..at].trim().is_empty() {
                        v.push(Violation::EmptyBlock { kind, at: start });
                    }
                    counts[kind as usize] += 1;
                    open = None;
                }
                _ => v.push(Violation::Unbalanced { kind, at }),
            }
        }
    }
    if let Some((kind, _, _)) = open {
        v.push(Violation::Unclosed { kind });
    }
    for (kind, expected) in [(TokenKind::Obj, n_wrapped), (TokenKind::Bg, has_bg as usize)] {
        let found = counts[kind as usize];
        if found != expected {
            v.push(Violation::CountMismatch {
                kind,
                expected,
                found,
            });
        }
    }
    v
}
