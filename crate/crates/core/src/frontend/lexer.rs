use crate::ast::Span;

use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Num(i64),
    /// `.decl`, `.input`, `.output`
    Directive(String),
    ChoiceDomain,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    ColonDash,
    Colon,
    Semi,
    Bang,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Dollar,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Num(n) => format!("number {n}"),
            Tok::Directive(d) => format!("`.{d}`"),
            Tok::ChoiceDomain => "`choice-domain`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::ColonDash => "`:-`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Dollar => "`$`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

const DIRECTIVES: &[&str] = &["decl", "input", "output"];

pub(crate) fn tokenize(source: &str) -> Result<Vec<(Tok, Span)>, SyntaxError> {
    Lexer {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
    }
    .run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Lexer {
    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }

    fn error(&self, span: Span, expected: &str, found: String) -> SyntaxError {
        SyntaxError {
            span,
            expected: vec![expected.to_string()],
            found,
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek_at(0) {
            if !is_ident_char(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn skip_trivia(&mut self) -> Result<(), SyntaxError> {
        loop {
            match (self.peek_at(0), self.peek_at(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    while let Some(c) = self.peek_at(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let start = self.span();
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek_at(0), self.peek_at(1)) {
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => {
                                return Err(self.error(start, "`*/`", "end of input".into()))
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn run(mut self) -> Result<Vec<(Tok, Span)>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let span = self.span();
            let Some(c) = self.peek_at(0) else {
                out.push((Tok::Eof, span));
                return Ok(out);
            };
            let tok = match c {
                '(' => self.single(Tok::LParen),
                ')' => self.single(Tok::RParen),
                '{' => self.single(Tok::LBrace),
                '}' => self.single(Tok::RBrace),
                ',' => self.single(Tok::Comma),
                ';' => self.single(Tok::Semi),
                '+' => self.single(Tok::Plus),
                '-' => self.single(Tok::Minus),
                '$' => self.single(Tok::Dollar),
                '=' => self.single(Tok::Eq),
                ':' => {
                    self.bump();
                    if self.peek_at(0) == Some('-') {
                        self.bump();
                        Tok::ColonDash
                    } else {
                        Tok::Colon
                    }
                }
                '!' => {
                    self.bump();
                    if self.peek_at(0) == Some('=') {
                        self.bump();
                        Tok::Ne
                    } else {
                        Tok::Bang
                    }
                }
                '<' => {
                    self.bump();
                    if self.peek_at(0) == Some('=') {
                        self.bump();
                        Tok::Le
                    } else {
                        Tok::Lt
                    }
                }
                '>' => {
                    self.bump();
                    if self.peek_at(0) == Some('=') {
                        self.bump();
                        Tok::Ge
                    } else {
                        Tok::Gt
                    }
                }
                '.' => self.dot(),
                '"' => self.string(span)?,
                c if c.is_ascii_digit() => self.number(span)?,
                c if is_ident_start(c) => self.ident(),
                other => {
                    return Err(self.error(span, "a token", format!("character `{other}`")));
                }
            };
            out.push((tok, span));
        }
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.bump();
        tok
    }

    fn dot(&mut self) -> Tok {
        self.bump();
        if self.peek_at(0).is_some_and(is_ident_start) {
            let save = (self.pos, self.line, self.col);
            let w = self.word();
            if DIRECTIVES.contains(&w.as_str()) {
                return Tok::Directive(w);
            }
            (self.pos, self.line, self.col) = save;
        }
        Tok::Dot
    }

    fn string(&mut self, span: Span) -> Result<Tok, SyntaxError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') if self.peek_at(0) == Some('"') => {
                    self.bump();
                    s.push('"');
                }
                Some('\n') | None => {
                    return Err(self.error(span, "closing `\"`", "end of line".into()));
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn number(&mut self, span: Span) -> Result<Tok, SyntaxError> {
        let mut s = String::new();
        while let Some(c) = self.peek_at(0) {
            if !c.is_ascii_digit() {
                break;
            }
            s.push(c);
            self.bump();
        }
        s.parse::<i64>()
            .map(Tok::Num)
            .map_err(|_| self.error(span, "a 64-bit integer", format!("`{s}`")))
    }

    fn ident(&mut self) -> Tok {
        let w = self.word();
        if w == "choice" && self.chars[self.pos..].starts_with(&['-', 'd', 'o', 'm', 'a', 'i', 'n']) {
            for _ in 0..7 {
                self.bump();
            }
            return Tok::ChoiceDomain;
        }
        Tok::Ident(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|(t, _)| t).collect()
    }

    #[test]
    fn directives_and_keywords() {
        assert_eq!(
            toks(".decl a(x:number) choice-domain x"),
            vec![
                Tok::Directive("decl".into()),
                Tok::Ident("a".into()),
                Tok::LParen,
                Tok::Ident("x".into()),
                Tok::Colon,
                Tok::Ident("number".into()),
                Tok::RParen,
                Tok::ChoiceDomain,
                Tok::Ident("x".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            toks("/* block\n comment */ a // line\n :- !="),
            vec![Tok::Ident("a".into()), Tok::ColonDash, Tok::Ne, Tok::Eof]
        );
    }

    #[test]
    fn clause_dot_is_not_a_directive() {
        assert_eq!(
            toks("a(1).b(2)."),
            vec![
                Tok::Ident("a".into()),
                Tok::LParen,
                Tok::Num(1),
                Tok::RParen,
                Tok::Dot,
                Tok::Ident("b".into()),
                Tok::LParen,
                Tok::Num(2),
                Tok::RParen,
                Tok::Dot,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn string_escapes_quote_only() {
        assert_eq!(toks(r#""a\"b""#), vec![Tok::Str("a\"b".into()), Tok::Eof]);
        assert!(tokenize("\"open").is_err());
    }

    #[test]
    fn spans_track_lines() {
        let t = tokenize("a\n  b").unwrap();
        assert_eq!(t[1].1, Span::new(2, 3));
    }
}
