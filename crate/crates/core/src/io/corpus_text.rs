//! Plain-text corpus format.
//!
//! ```text
//! [vocab]
//! apple
//! banana
//! [image] 28 28 1        (optional: width height channels)
//! [docs]
//! d0 0:3 1:1
//! d1 fruit 1:2           (optional label before the counts)
//! ```
//!
//! Word ids index the vocabulary section; counts are positive integers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{BagOfWords, Corpus};
use crate::error::{Error, Result};

#[derive(PartialEq)]
enum Section {
    None,
    Vocab,
    Docs,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut section = Section::None;
    let mut vocab: Vec<String> = Vec::new();
    let mut docs = Vec::new();
    let mut doc_ids = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut image_shape = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            let (head, rest) = line.split_once(']').ok_or_else(|| parse_err(line_no, "unterminated section header"))?;
            match &head[1..] {
                "vocab" => section = Section::Vocab,
                "docs" => section = Section::Docs,
                "image" => {
                    let dims: Vec<usize> = rest
                        .split_whitespace()
                        .map(|s| s.parse().map_err(|_| parse_err(line_no, format!("bad image dimension {s:?}"))))
                        .collect::<Result<_>>()?;
                    if dims.len() != 3 || dims.iter().any(|d| *d == 0) {
                        return Err(parse_err(line_no, "image header needs positive width, height and channels"));
                    }
                    image_shape = Some((dims[0], dims[1], dims[2]));
                    section = Section::None;
                }
                other => return Err(parse_err(line_no, format!("unknown section [{other}]"))),
            }
            continue;
        }
        match section {
            Section::None => return Err(parse_err(line_no, "content outside [vocab] or [docs]")),
            Section::Vocab => {
                if line.split_whitespace().count() != 1 {
                    return Err(parse_err(line_no, format!("vocabulary entry {line:?} contains whitespace")));
                }
                vocab.push(line.to_string());
            }
            Section::Docs => {
                let mut parts = line.split_whitespace();
                let id = parts.next().expect("line is not empty").to_string();
                let mut label = None;
                let mut counts = Vec::new();
                for (k, tok) in parts.enumerate() {
                    match tok.split_once(':') {
                        Some((w, c)) => {
                            let w: usize = w.parse().map_err(|_| parse_err(line_no, format!("bad word id {w:?}")))?;
                            let c: u64 = c.parse().map_err(|_| parse_err(line_no, format!("bad count {c:?}")))?;
                            if c == 0 {
                                return Err(parse_err(line_no, "counts must be positive"));
                            }
                            if w >= vocab.len() {
                                return Err(parse_err(line_no, format!("word id {w} outside vocabulary of {}", vocab.len())));
                            }
                            counts.push((w, c as f64));
                        }
                        None if k == 0 => {
                            let next = label_names.len();
                            let id = *label_ids.entry(tok.to_string()).or_insert(next);
                            if id == next {
                                label_names.push(tok.to_string());
                            }
                            label = Some(id);
                        }
                        None => return Err(parse_err(line_no, format!("expected word:count, got {tok:?}"))),
                    }
                }
                docs.push(BagOfWords::from_counts(counts));
                doc_ids.push(id);
                labels.push(label);
            }
        }
    }
    let labels = if labels.iter().all(Option::is_some) && !labels.is_empty() {
        Some(labels.into_iter().map(|l| l.expect("checked")).collect())
    } else if labels.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::Parse {
            line: 0,
            msg: "either every document or none must carry a label".into(),
        });
    };
    if let Some((w, h, c)) = image_shape {
        if w * h * c != vocab.len() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("image {w}x{h}x{c} does not match vocabulary of {}", vocab.len()),
            });
        }
    }
    let corpus = Corpus {
        vocab,
        docs,
        doc_ids,
        labels,
        label_names,
        image_shape,
    };
    corpus.validate()?;
    Ok(corpus)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

/// Serializes a corpus; counts are rounded to integers.
pub fn format_corpus(corpus: &Corpus) -> String {
    let mut out = String::from("[vocab]\n");
    for w in &corpus.vocab {
        out.push_str(w);
        out.push('\n');
    }
    if let Some((w, h, c)) = corpus.image_shape {
        let _ = writeln!(out, "[image] {w} {h} {c}");
    }
    out.push_str("[docs]\n");
    for (t, d) in corpus.docs.iter().enumerate() {
        out.push_str(&corpus.doc_ids[t]);
        if let Some(l) = &corpus.labels {
            out.push(' ');
            out.push_str(&corpus.label_names[l[t]]);
        }
        for (w, c) in d.entries() {
            let c = c.round() as u64;
            if c > 0 {
                let _ = write!(out, " {w}:{c}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_corpus(corpus))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "[vocab]\napple\nbanana\ncherry\n[docs]\nd0 fruit 0:3 2:1\nd1 veg 1:2\nd2 fruit 0:1 0:1\n";

    #[test]
    fn parses_labels_and_merges_repeats() {
        let c = parse_corpus(SAMPLE).unwrap();
        assert_eq!(c.vocab_size(), 3);
        assert_eq!(c.labels, Some(vec![0, 1, 0]));
        assert_eq!(c.label_names, vec!["fruit", "veg"]);
        assert_eq!(c.docs[2].entries(), &[(0, 2.0)]);
    }

    #[test]
    fn round_trips() {
        let c = parse_corpus(SAMPLE).unwrap();
        let again = parse_corpus(&format_corpus(&c)).unwrap();
        assert_eq!(again, c);
        let img = "[vocab]\np0\np1\np2\np3\n[image] 2 2 1\n[docs]\na 0:5 3:1\n";
        let c = parse_corpus(img).unwrap();
        assert_eq!(c.image_shape, Some((2, 2, 1)));
        assert_eq!(parse_corpus(&format_corpus(&c)).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "[vocab]\na\n[docs]\nd0 1:1\n",
            "[vocab]\na\n[docs]\nd0 0:0\n",
            "[vocab]\na\n[docs]\nd0 0:1.5\n",
            "[vocab]\na\n[docs]\nd0 x 0:1\nd1 0:1\n",
            "stray\n",
            "[vocab]\na b\n",
            "[vocab]\na\n[image] 2 2 1\n[docs]\n",
        ] {
            assert!(parse_corpus(bad).is_err(), "{bad:?}");
        }
    }
}
