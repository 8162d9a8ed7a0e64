//! Word-level tokenization and masked-variant construction.
//!
//! A word is a maximal run of non-whitespace; punctuation stays attached
//! (`Tyres'`, `UPM-Kymmene`, `5.5`). Masked variants are rebuilt with single
//! spaces, so original spacing is not preserved.

use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Byte range in the source string.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedText {
    pub source: String,
    pub tokens: Vec<Token>,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Tokens joined with single spaces.
    pub fn normalized(&self) -> String {
        self.words().collect::<Vec<_>>().join(" ")
    }
}

pub fn tokenize(text: &str) -> TokenizedText {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(Token {
                    text: text[s..i].to_string(),
                    span: s..i,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: text[s..].to_string(),
            span: s..text.len(),
        });
    }
    TokenizedText {
        source: text.to_string(),
        tokens,
    }
}

/// The text with only the token at `position` replaced by `mask_token`.
pub fn mask_variant(tok: &TokenizedText, position: usize, mask_token: &str) -> Result<String> {
    if position >= tok.len() {
        return Err(Error::invalid(format!(
            "mask position {position} out of range for {} tokens",
            tok.len()
        )));
    }
    Ok(join_with_mask(tok, position, mask_token))
}

fn join_with_mask(tok: &TokenizedText, position: usize, mask_token: &str) -> String {
    let mut out = String::with_capacity(tok.source.len() + mask_token.len());
    for (i, word) in tok.words().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(if i == position { mask_token } else { word });
    }
    out
}

/// One masked variant per token position, in position order.
pub fn variants_all(tok: &TokenizedText, mask_token: &str) -> Result<Vec<String>> {
    if tok.is_empty() {
        return Err(Error::degenerate("cannot mask a text with zero tokens"));
    }
    Ok((0..tok.len())
        .map(|i| join_with_mask(tok, i, mask_token))
        .collect())
}
