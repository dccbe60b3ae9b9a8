//! Line-oriented scenario scripts.
//!
//! Each non-blank line is a verb followed by words and `key=value` pairs.
//! Values may be double-quoted (with `\"` and `\\` escapes) to include
//! spaces. `#` starts a comment outside quotes. Keys may repeat; their
//! values are kept in order.
//!
//! ```text
//! deploy as=maker code=thing-stub name=stub arg=str:TH-1 arg="str:temperature sensor"
//! assert last thing=thing-17 eq=21.000   # positional word after the verb
//! ```

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    /// 1-based source line.
    pub line: usize,
    pub verb: String,
    pub words: Vec<String>,
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl Step {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn all<'s>(&'s self, key: &'s str) -> impl Iterator<Item = &'s str> {
        self.pairs
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn word(&self, i: usize) -> Option<&str> {
        self.words.get(i).map(String::as_str)
    }
}

fn tokenize(text: &str, line: usize) -> Result<Vec<String>, ParseError> {
    let err = |msg: &str| ParseError {
        line,
        msg: msg.to_string(),
    };
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.peek() {
            None | Some('#') => break,
            _ => {}
        }
        let mut tok = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() {
                break;
            }
            chars.next();
            if c != '"' {
                tok.push(c);
                continue;
            }
            loop {
                match chars.next() {
                    None => return Err(err("unterminated quote")),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(e @ ('"' | '\\')) => tok.push(e),
                        Some('n') => tok.push('\n'),
                        _ => return Err(err("bad escape")),
                    },
                    Some(c) => tok.push(c),
                }
            }
        }
        tokens.push(tok);
    }
    Ok(tokens)
}

pub fn parse(text: &str) -> Result<Vec<Step>, ParseError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut tokens = tokenize(raw, line)?.into_iter();
        let Some(verb) = tokens.next() else {
            continue;
        };
        if verb.contains('=') {
            return Err(ParseError {
                line,
                msg: format!("expected a verb, found {verb:?}"),
            });
        }
        let mut step = Step {
            line,
            verb,
            words: Vec::new(),
            pairs: Vec::new(),
        };
        for tok in tokens {
            match tok.split_once('=') {
                Some(("", _)) => {
                    return Err(ParseError {
                        line,
                        msg: format!("empty key in {tok:?}"),
                    })
                }
                Some((k, v)) => step.pairs.push((k.to_string(), v.to_string())),
                None if step.pairs.is_empty() => step.words.push(tok),
                None => {
                    return Err(ParseError {
                        line,
                        msg: format!("word {tok:?} after key=value pairs"),
                    })
                }
            }
        }
        steps.push(step);
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_words_pairs_quotes_and_comments() {
        let steps = parse(
            "# header\n\
             \n\
             deploy as=maker arg=str:a arg=\"str:b c\" # trailing\n\
             assert last thing=t eq=21.000\n\
             publish payload=\"say \\\"hi\\\"\"\n",
        )
        .unwrap();
        assert_eq!(steps.len(), 3);
        assert_eq!(steps[0].line, 3);
        assert_eq!(steps[0].all("arg").collect::<Vec<_>>(), ["str:a", "str:b c"]);
        assert_eq!(steps[1].word(0), Some("last"));
        assert_eq!(steps[1].get("eq"), Some("21.000"));
        assert_eq!(steps[2].get("payload"), Some("say \"hi\""));
    }

    #[test]
    fn reports_line_numbers() {
        assert_eq!(parse("seal\nx=1").unwrap_err().line, 2);
        assert_eq!(parse("seal\n\ncall a=\"open").unwrap_err().line, 3);
        assert!(parse("call a=1 stray").is_err());
        assert!(parse("call =1").is_err());
    }
}
