use std::fmt;
use std::ops::Range;

use chrono::NaiveTime;

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Word(String),
    Num(f64),
    Time(NaiveTime),
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match self {
            Token::Word(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_word(&self, w: &str) -> bool {
        self.word() == Some(w)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::Num(n) => write!(f, "NUM({n})"),
            Token::Time(t) => write!(f, "TIME({})", t.format("%H:%M")),
        }
    }
}

/// A token with the byte range of the utterance it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub span: Range<usize>,
}

// Raw pieces: runs of letters/digits/apostrophes, keeping ':' and '.' only
// when they sit between two digits.
fn pieces(s: &str) -> Vec<(String, Range<usize>)> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let flush = |cur: &mut String, start: usize, end: usize, out: &mut Vec<_>| {
        let w: String = cur.chars().filter(|c| *c != '\'').collect();
        if !w.is_empty() {
            out.push((w, start..end));
        }
        cur.clear();
    };
    for (i, &(pos, c)) in chars.iter().enumerate() {
        let between_digits = i > 0
            && chars[i - 1].1.is_ascii_digit()
            && chars.get(i + 1).is_some_and(|(_, n)| n.is_ascii_digit());
        if c.is_alphanumeric() || c == '\'' || ((c == ':' || c == '.') && between_digits) {
            if cur.is_empty() {
                start = pos;
            }
            cur.extend(c.to_lowercase());
        } else {
            flush(&mut cur, start, pos, &mut out);
        }
    }
    flush(&mut cur, start, s.len(), &mut out);
    out
}

fn clock(h: u32, m: u32, meridiem: Option<&str>) -> Option<NaiveTime> {
    let h = match meridiem {
        Some("am") if (1..=12).contains(&h) => h % 12,
        Some("pm") if (1..=12).contains(&h) => h % 12 + 12,
        Some(_) => return None,
        None => h,
    };
    NaiveTime::from_hms_opt(h, m, 0)
}

fn parse_hm(s: &str) -> Option<(u32, u32)> {
    let (h, m) = s.split_once(':')?;
    if m.len() != 2 {
        return None;
    }
    Some((h.parse().ok()?, m.parse().ok()?))
}

/// Splits `8am` into `8` + `am` and `5min` into `5` + `min`.
fn split_alnum(piece: String, span: Range<usize>) -> Vec<(String, Range<usize>)> {
    let digits = piece
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || *c == ':' || *c == '.'))
        .map(|(i, _)| i);
    match digits {
        Some(i) if i > 0 && piece[i..].chars().all(|c| c.is_alphabetic()) => {
            let mid = span.start + i;
            vec![
                (piece[..i].to_string(), span.start..mid),
                (piece[i..].to_string(), mid..span.end),
            ]
        }
        _ => vec![(piece, span)],
    }
}

pub fn tokenize_spanned(utterance: &str) -> Vec<Spanned> {
    let raw: Vec<(String, Range<usize>)> = pieces(utterance)
        .into_iter()
        .flat_map(|(p, s)| split_alnum(p, s))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let (p, span) = &raw[i];
        // meridiem may be "pm" or "p" "m" (from "p.m.")
        let meridiem = |j: usize| -> Option<(&'static str, usize)> {
            match raw.get(j).map(|(w, _)| w.as_str()) {
                Some("am") => Some(("am", 1)),
                Some("pm") => Some(("pm", 1)),
                Some(x @ ("a" | "p")) if raw.get(j + 1).is_some_and(|(w, _)| w == "m") => {
                    Some((if x == "a" { "am" } else { "pm" }, 2))
                }
                _ => None,
            }
        };
        let first = p.chars().next().unwrap_or(' ');
        if first.is_ascii_digit() {
            let hm = parse_hm(p);
            let whole: Option<u32> = p.parse().ok();
            if let Some((mer, n)) = meridiem(i + 1) {
                let (h, m) = hm.or(whole.map(|h| (h, 0))).unwrap_or((99, 0));
                if let Some(t) = clock(h, m, Some(mer)) {
                    let end = raw[i + n].1.end;
                    out.push(Spanned {
                        token: Token::Time(t),
                        span: span.start..end,
                    });
                    i += 1 + n;
                    continue;
                }
            }
            if let Some(t) = hm.and_then(|(h, m)| clock(h, m, None)) {
                out.push(Spanned {
                    token: Token::Time(t),
                    span: span.clone(),
                });
                i += 1;
                continue;
            }
            if let Ok(n) = p.parse::<f64>() {
                out.push(Spanned {
                    token: Token::Num(n),
                    span: span.clone(),
                });
                i += 1;
                continue;
            }
        }
        out.push(Spanned {
            token: Token::Word(p.clone()),
            span: span.clone(),
        });
        i += 1;
    }
    out
}

pub fn tokenize(utterance: &str) -> Vec<Token> {
    tokenize_spanned(utterance)
        .into_iter()
        .map(|s| s.token)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Token {
        Token::Word(s.into())
    }

    fn time(h: u32, m: u32) -> Token {
        Token::Time(NaiveTime::from_hms_opt(h, m, 0).unwrap())
    }

    #[test]
    fn delay_phrase() {
        assert_eq!(
            tokenize("Turn on the light in 5 minutes"),
            vec![w("turn"), w("on"), w("the"), w("light"), w("in"), Token::Num(5.0), w("minutes")]
        );
    }

    #[test]
    fn empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ?! ").is_empty());
    }

    #[test]
    fn clock_times_fold() {
        assert_eq!(
            tokenize("change it to 7:50 AM."),
            vec![w("change"), w("it"), w("to"), time(7, 50)]
        );
        assert_eq!(tokenize("4pm"), vec![time(16, 0)]);
        assert_eq!(tokenize("5 pm"), vec![time(17, 0)]);
        assert_eq!(tokenize("17:00"), vec![time(17, 0)]);
        assert_eq!(tokenize("10am"), vec![time(10, 0)]);
        assert_eq!(tokenize("12 am"), vec![time(0, 0)]);
        assert_eq!(tokenize("12pm"), vec![time(12, 0)]);
        assert_eq!(tokenize("9 a.m."), vec![time(9, 0)]);
    }

    #[test]
    fn invalid_meridiem_stays_number() {
        assert_eq!(tokenize("13 pm"), vec![Token::Num(13.0), w("pm")]);
    }

    #[test]
    fn punctuation_and_apostrophes() {
        assert_eq!(
            tokenize("What's up, Doc?"),
            vec![w("whats"), w("up"), w("doc")]
        );
        assert_eq!(tokenize("21.5"), vec![Token::Num(21.5)]);
    }

    #[test]
    fn spans_are_substrings() {
        let u = "Turn on the Bedroom light at 7:50 AM, please";
        let toks = tokenize_spanned(u);
        assert_eq!(&u[toks[3].span.clone()], "Bedroom");
        let t = toks.iter().find(|s| matches!(s.token, Token::Time(_))).unwrap();
        assert_eq!(&u[t.span.clone()], "7:50 AM");
    }

    proptest::proptest! {
        #[test]
        fn never_panics_and_spans_valid(s in "\\PC{0,40}") {
            for t in tokenize_spanned(&s) {
                proptest::prop_assert!(s.get(t.span.clone()).is_some());
            }
        }
    }
}
