use super::Message;

/// Info string that marks a fenced block as a problem document.
pub const DSL_FENCE_TAG: &str = "mechagents-dsl";

const DSL_TAGS: [&str; 3] = [DSL_FENCE_TAG, "dsl", "json"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FenceScan {
    pub blocks: Vec<String>,
    /// Set when a fence was opened and never closed.
    pub lint: Option<String>,
}

/// Scans markdown-style ``` fences. Blocks whose info string is a DSL tag
/// are returned in order. An unterminated fence voids the whole scan: we
/// report it rather than guess where the document ends.
pub fn scan_fences(content: &str) -> FenceScan {
    let mut blocks = Vec::new();
    let mut open: Option<(usize, bool, Vec<&str>)> = None;
    for (lineno, line) in content.lines().enumerate() {
        let trimmed = line.trim_start();
        match open.as_mut() {
            None => {
                if let Some(info) = trimmed.strip_prefix("```") {
                    let tag = info.trim().to_ascii_lowercase();
                    open = Some((lineno + 1, DSL_TAGS.contains(&tag.as_str()), Vec::new()));
                }
            }
            Some((_, is_dsl, body)) => {
                if trimmed.trim_end() == "```" {
                    if *is_dsl {
                        blocks.push(body.join("\n"));
                    }
                    open = None;
                } else {
                    body.push(line);
                }
            }
        }
    }
    match open {
        Some((line, _, _)) => FenceScan {
            blocks: Vec::new(),
            lint: Some(format!("unterminated code fence opened on line {line}; no document was extracted")),
        },
        None => FenceScan { blocks, lint: None },
    }
}

pub fn extract_dsl_blocks(m: &Message) -> Vec<String> {
    scan_fences(&m.content).blocks
}

/// True iff `TERMINATE` appears as a standalone token.
pub fn detect_termination(m: &Message) -> bool {
    m.content.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|t| t == "TERMINATE")
}
