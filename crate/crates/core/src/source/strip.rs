use super::lexer::scan_comments;
use super::{strip_terminator, SourceFile};

/// Returns a copy of `file` with every `//` and `/* */` comment removed.
///
/// Lines that held only comments disappear. On lines that mix code and
/// comments, the original indentation is kept, the code fragments are
/// joined by single spaces and trailing whitespace is dropped. Lines
/// without comments are copied unchanged.
pub fn strip_comments(file: &SourceFile) -> SourceFile {
    let comments = scan_comments(file.text());
    if comments.is_empty() {
        return file.clone();
    }

    let text = file.text();
    let mut out = String::with_capacity(text.len());
    let mut next = 0;

    for line in 1..=file.line_count() {
        let raw = file.line_range(line);
        let content_end = raw.start + strip_terminator(&text[raw.clone()]).len();
        let terminator = &text[content_end..raw.end];

        while next < comments.len() && comments[next].range.end <= raw.start {
            next += 1;
        }
        // Code fragments of this line that fall outside every comment.
        let mut fragments: Vec<(usize, usize)> = Vec::new();
        let mut cursor = raw.start;
        let mut touched = false;
        let mut k = next;
        while k < comments.len() && comments[k].range.start < content_end {
            let c = &comments[k].range;
            if c.end > raw.start {
                touched = true;
                if c.start > cursor {
                    fragments.push((cursor, c.start));
                }
                cursor = cursor.max(c.end);
            }
            k += 1;
        }
        if !touched {
            out.push_str(&text[raw]);
            continue;
        }
        if cursor < content_end {
            fragments.push((cursor, content_end));
        }

        let pieces: Vec<&str> = fragments
            .iter()
            .map(|&(a, b)| text[a..b].trim_matches([' ', '\t']))
            .filter(|p| !p.is_empty())
            .collect();
        if pieces.is_empty() {
            continue;
        }
        if let Some(&(first, _)) = fragments.first() {
            if first == raw.start {
                out.push_str(file.indentation(line));
            }
        }
        out.push_str(&pieces.join(" "));
        out.push_str(terminator);
    }

    SourceFile::from_text(file.path(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineClass {
    Blank,
    /// Only comment text (and whitespace) on the line.
    Comment,
    Code,
}

/// Classifies every line of `file`; index 0 is line 1.
pub fn line_classes(file: &SourceFile) -> Vec<LineClass> {
    let text = file.text();
    let mut in_comment = vec![false; text.len()];
    for c in scan_comments(text) {
        in_comment[c.range].fill(true);
    }
    (1..=file.line_count())
        .map(|line| {
            let raw = file.line_range(line);
            let mut class = LineClass::Blank;
            for i in raw {
                let b = text.as_bytes()[i];
                if in_comment[i] {
                    if !b.is_ascii_whitespace() {
                        class = LineClass::Comment;
                    }
                } else if !b.is_ascii_whitespace() {
                    return LineClass::Code;
                }
            }
            class
        })
        .collect()
}
