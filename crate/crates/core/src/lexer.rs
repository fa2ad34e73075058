//! Tokenizer shared by the Turtle-star reader, the query dialect and the
//! rule-document wrapper.
//!
//! The token set is the union of what the three grammars need. Comments run
//! from `#` or `//` to the end of the line.

use std::fmt;

/// 1-based line/column of a token or error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Position {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// `<...>`, content without the brackets.
    IriRef(String),
    PrefixedName { prefix: String, local: String },
    Var(String),
    /// Unescaped string content, whatever the quoting style.
    Str(String),
    Integer(String),
    Decimal(String),
    /// Bare word: keywords, `a`, `true`/`false`, time units.
    Name(String),
    /// `@` on its own (timestamp annotation).
    At,
    /// `@prefix`, `@time`, ...
    AtKeyword(String),
    QuotedOpen,
    QuotedClose,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Semicolon,
    Comma,
    Slash,
    Star,
    Plus,
    Minus,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    Not,
    AndAnd,
    OrOr,
    Eof,
}

impl TokenKind {
    /// Short human description used in "expected ..." messages.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::IriRef(i) => format!("<{i}>"),
            TokenKind::PrefixedName { prefix, local } => format!("{prefix}:{local}"),
            TokenKind::Var(v) => format!("?{v}"),
            TokenKind::Str(s) => format!("string {s:?}"),
            TokenKind::Integer(n) | TokenKind::Decimal(n) => n.clone(),
            TokenKind::Name(n) => n.clone(),
            TokenKind::At => "'@'".into(),
            TokenKind::AtKeyword(k) => format!("@{k}"),
            TokenKind::QuotedOpen => "'<<'".into(),
            TokenKind::QuotedClose => "'>>'".into(),
            TokenKind::LBrace => "'{'".into(),
            TokenKind::RBrace => "'}'".into(),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::LBracket => "'['".into(),
            TokenKind::RBracket => "']'".into(),
            TokenKind::Dot => "'.'".into(),
            TokenKind::Semicolon => "';'".into(),
            TokenKind::Comma => "','".into(),
            TokenKind::Slash => "'/'".into(),
            TokenKind::Star => "'*'".into(),
            TokenKind::Plus => "'+'".into(),
            TokenKind::Minus => "'-'".into(),
            TokenKind::Lt => "'<'".into(),
            TokenKind::Gt => "'>'".into(),
            TokenKind::Le => "'<='".into(),
            TokenKind::Ge => "'>='".into(),
            TokenKind::Eq => "'='".into(),
            TokenKind::Ne => "'!='".into(),
            TokenKind::Not => "'!'".into(),
            TokenKind::AndAnd => "'&&'".into(),
            TokenKind::OrOr => "'||'".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }

    /// Case-insensitive keyword test on bare words.
    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self, TokenKind::Name(n) if n.eq_ignore_ascii_case(kw))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: String,
    pub pos: Position,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

impl std::error::Error for LexError {}

struct Cursor<'a> {
    chars: Vec<char>,
    idx: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().collect(),
            idx: 0,
            line: 1,
            col: 1,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.idx + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.idx).copied()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Position {
        Position {
            line: self.line,
            col: self.col,
        }
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars()
            .enumerate()
            .all(|(i, c)| self.peek_at(i) == Some(c))
    }
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

fn is_iri_char(c: char) -> bool {
    !(c.is_whitespace() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\'))
}

/// Tokenizes `src`. The returned vector always ends with an `Eof` token.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor::new(src);
    let mut out = Vec::new();
    loop {
        skip_trivia(&mut cur);
        let pos = cur.pos();
        let Some(c) = cur.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                pos,
            });
            return Ok(out);
        };
        let kind = match c {
            '<' => lex_angle(&mut cur),
            '>' => {
                cur.bump();
                match cur.peek() {
                    Some('>') => {
                        cur.bump();
                        TokenKind::QuotedClose
                    }
                    Some('=') => {
                        cur.bump();
                        TokenKind::Ge
                    }
                    _ => TokenKind::Gt,
                }
            }
            '?' | '$' => {
                cur.bump();
                let name = take_while(&mut cur, |c| c.is_alphanumeric() || c == '_');
                if name.is_empty() {
                    return Err(LexError {
                        message: "empty variable name".into(),
                        pos,
                    });
                }
                TokenKind::Var(name)
            }
            '"' | '\'' => lex_string(&mut cur, pos)?,
            '0'..='9' => lex_number(&mut cur),
            '@' => {
                cur.bump();
                if cur.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
                    TokenKind::AtKeyword(take_while(&mut cur, |c| c.is_ascii_alphanumeric()))
                } else {
                    TokenKind::At
                }
            }
            ':' => {
                cur.bump();
                TokenKind::PrefixedName {
                    prefix: String::new(),
                    local: lex_local(&mut cur),
                }
            }
            c if is_name_start(c) => {
                let word = take_while(&mut cur, is_name_char);
                if cur.peek() == Some(':') {
                    cur.bump();
                    TokenKind::PrefixedName {
                        prefix: word,
                        local: lex_local(&mut cur),
                    }
                } else {
                    TokenKind::Name(word)
                }
            }
            '{' => single(&mut cur, TokenKind::LBrace),
            '}' => single(&mut cur, TokenKind::RBrace),
            '(' => single(&mut cur, TokenKind::LParen),
            ')' => single(&mut cur, TokenKind::RParen),
            '[' => single(&mut cur, TokenKind::LBracket),
            ']' => single(&mut cur, TokenKind::RBracket),
            '.' => single(&mut cur, TokenKind::Dot),
            ';' => single(&mut cur, TokenKind::Semicolon),
            ',' => single(&mut cur, TokenKind::Comma),
            '/' => single(&mut cur, TokenKind::Slash),
            '*' => single(&mut cur, TokenKind::Star),
            '+' => single(&mut cur, TokenKind::Plus),
            '-' => single(&mut cur, TokenKind::Minus),
            '=' => single(&mut cur, TokenKind::Eq),
            '!' => {
                cur.bump();
                if cur.peek() == Some('=') {
                    cur.bump();
                    TokenKind::Ne
                } else {
                    TokenKind::Not
                }
            }
            '&' if cur.peek_at(1) == Some('&') => {
                cur.bump();
                cur.bump();
                TokenKind::AndAnd
            }
            '|' if cur.peek_at(1) == Some('|') => {
                cur.bump();
                cur.bump();
                TokenKind::OrOr
            }
            other => {
                return Err(LexError {
                    message: format!("unexpected character {other:?}"),
                    pos,
                })
            }
        };
        out.push(Token { kind, pos });
    }
}

fn single(cur: &mut Cursor<'_>, kind: TokenKind) -> TokenKind {
    cur.bump();
    kind
}

fn take_while(cur: &mut Cursor<'_>, pred: impl Fn(char) -> bool) -> String {
    let mut s = String::new();
    while let Some(c) = cur.peek() {
        if !pred(c) {
            break;
        }
        s.push(c);
        cur.bump();
    }
    s
}

fn skip_trivia(cur: &mut Cursor<'_>) {
    loop {
        match cur.peek() {
            Some(c) if c.is_whitespace() => {
                cur.bump();
            }
            Some('#') => skip_line(cur),
            Some('/') if cur.peek_at(1) == Some('/') => skip_line(cur),
            _ => return,
        }
    }
}

fn skip_line(cur: &mut Cursor<'_>) {
    while let Some(c) = cur.bump() {
        if c == '\n' {
            return;
        }
    }
}

/// Local part of a prefixed name. Dots are allowed inside but never trailing,
/// so `:b1.` ends a statement.
fn lex_local(cur: &mut Cursor<'_>) -> String {
    let mut s = String::new();
    loop {
        match cur.peek() {
            Some(c) if is_name_char(c) => {
                s.push(c);
                cur.bump();
            }
            Some('.') if cur.peek_at(1).is_some_and(is_name_char) && !s.is_empty() => {
                s.push('.');
                cur.bump();
            }
            _ => return s,
        }
    }
}

fn lex_angle(cur: &mut Cursor<'_>) -> TokenKind {
    if cur.starts_with("<<") {
        cur.bump();
        cur.bump();
        return TokenKind::QuotedOpen;
    }
    // An IRI reference needs a closing '>' before any whitespace.
    let mut off = 1;
    while let Some(c) = cur.peek_at(off) {
        if c == '>' {
            if off > 1 {
                cur.bump();
                let mut iri = String::new();
                for _ in 1..off {
                    iri.push(cur.bump().unwrap_or_default());
                }
                cur.bump();
                return TokenKind::IriRef(iri);
            }
            break;
        }
        if !is_iri_char(c) {
            break;
        }
        off += 1;
    }
    cur.bump();
    if cur.peek() == Some('=') {
        cur.bump();
        TokenKind::Le
    } else {
        TokenKind::Lt
    }
}

fn lex_number(cur: &mut Cursor<'_>) -> TokenKind {
    let mut s = take_while(cur, |c| c.is_ascii_digit());
    if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
        s.push('.');
        s.push_str(&take_while(cur, |c| c.is_ascii_digit()));
        TokenKind::Decimal(s)
    } else {
        TokenKind::Integer(s)
    }
}

fn lex_string(cur: &mut Cursor<'_>, pos: Position) -> Result<TokenKind, LexError> {
    let q = cur.bump().unwrap_or('"');
    let long = cur.peek() == Some(q) && cur.peek_at(1) == Some(q);
    if long {
        cur.bump();
        cur.bump();
    } else if cur.peek() == Some(q) {
        // empty short string
        cur.bump();
        return Ok(TokenKind::Str(String::new()));
    }
    let mut s = String::new();
    loop {
        let Some(c) = cur.bump() else {
            return Err(LexError {
                message: "unterminated string literal".into(),
                pos,
            });
        };
        if c == q {
            if !long {
                return Ok(TokenKind::Str(s));
            }
            if cur.peek() == Some(q) && cur.peek_at(1) == Some(q) {
                cur.bump();
                cur.bump();
                return Ok(TokenKind::Str(s));
            }
            s.push(c);
            continue;
        }
        if c == '\n' && !long {
            return Err(LexError {
                message: "newline in short string literal".into(),
                pos,
            });
        }
        if c == '\\' {
            let esc = cur.bump().ok_or_else(|| LexError {
                message: "unterminated escape".into(),
                pos,
            })?;
            s.push(match esc {
                'n' => '\n',
                't' => '\t',
                'r' => '\r',
                '"' => '"',
                '\'' => '\'',
                '\\' => '\\',
                other => {
                    return Err(LexError {
                        message: format!("unknown escape \\{other}"),
                        pos: cur.pos(),
                    })
                }
            });
            continue;
        }
        s.push(c);
    }
}

/// Escapes `s` for a double-quoted short string.
pub fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Random-access cursor over a token vector, shared by the recursive-descent
/// parsers.
#[derive(Debug, Clone)]
pub struct TokenCursor {
    toks: Vec<Token>,
    idx: usize,
}

impl TokenCursor {
    pub fn new(toks: Vec<Token>) -> Self {
        debug_assert!(matches!(toks.last().map(|t| &t.kind), Some(TokenKind::Eof)));
        TokenCursor { toks, idx: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.idx.min(self.toks.len() - 1)]
    }

    pub fn peek_kind(&self) -> &TokenKind {
        &self.peek().kind
    }

    pub fn peek_nth(&self, n: usize) -> &TokenKind {
        &self.toks[(self.idx + n).min(self.toks.len() - 1)].kind
    }

    pub fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.idx < self.toks.len() - 1 {
            self.idx += 1;
        }
        t
    }

    pub fn at(&self, kind: &TokenKind) -> bool {
        self.peek_kind() == kind
    }

    pub fn at_keyword(&self, kw: &str) -> bool {
        self.peek_kind().is_keyword(kw)
    }

    /// Consumes the next token when it equals `kind`.
    pub fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn is_eof(&self) -> bool {
        self.at(&TokenKind::Eof)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn quoted_triple_and_prefixed_names() {
        let k = kinds("<<:det1 :det :b1>> :score '0.8'.");
        assert_eq!(k[0], TokenKind::QuotedOpen);
        assert_eq!(
            k[1],
            TokenKind::PrefixedName {
                prefix: "".into(),
                local: "det1".into()
            }
        );
        assert_eq!(k[4], TokenKind::QuotedClose);
        assert_eq!(k[6], TokenKind::Str("0.8".into()));
        assert_eq!(k[7], TokenKind::Dot);
    }

    #[test]
    fn trailing_dot_is_not_part_of_local_name_or_number() {
        let k = kinds("sosa:resultTime 2.\n:a :b :c.d.");
        assert_eq!(k[1], TokenKind::Integer("2".into()));
        assert_eq!(k[2], TokenKind::Dot);
        assert_eq!(
            k[5],
            TokenKind::PrefixedName {
                prefix: "".into(),
                local: "c.d".into()
            }
        );
        assert_eq!(k[6], TokenKind::Dot);
    }

    #[test]
    fn comparison_versus_iri() {
        let k = kinds("?S < 0.8 && ?x <= 1 || <http://a/b> >= 2");
        assert!(k.contains(&TokenKind::Lt));
        assert!(k.contains(&TokenKind::Le));
        assert!(k.contains(&TokenKind::IriRef("http://a/b".into())));
        assert!(k.contains(&TokenKind::Ge));
    }

    #[test]
    fn comments_and_long_strings() {
        let k = kinds("// header\n# other\n\"\"\"a \"b\"\nc\"\"\" ;");
        assert_eq!(k[0], TokenKind::Str("a \"b\"\nc".into()));
        assert_eq!(k[1], TokenKind::Semicolon);
    }

    #[test]
    fn path_slash_is_not_a_comment() {
        let k = kinds("prov:wasGeneratedBy/a");
        assert_eq!(k[1], TokenKind::Slash);
        assert_eq!(k[2], TokenKind::Name("a".into()));
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("a\n  b").unwrap();
        assert_eq!(t[1].pos, Position { line: 2, col: 3 });
    }

    #[test]
    fn unterminated_string_is_positioned() {
        let e = tokenize("\n  'abc").unwrap_err();
        assert_eq!(e.pos, Position { line: 2, col: 3 });
    }
}
