use super::{AppIdentifier, AqlError, PostOp, QueryAst, QueryMode, Reference, Subject};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Str(String),
    Arrow,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Question,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Arrow => "`->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Question => "`?`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    offset: usize,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    src: &'a str,
    offset: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn pos(&self) -> Pos {
        Pos { offset: self.offset, line: self.line, column: self.column }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, AqlError> {
        let mut out = Vec::new();
        loop {
            while self.peek_char().is_some_and(char::is_whitespace) {
                self.bump();
            }
            let start = self.pos();
            let Some(c) = self.bump() else {
                out.push((Tok::Eof, start));
                return Ok(out);
            };
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '?' => Tok::Question,
                '-' if self.peek_char() == Some('>') => {
                    self.bump();
                    Tok::Arrow
                }
                '\'' => {
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('\'') => break,
                            Some('\\') => match self.bump() {
                                Some(escaped) => s.push(escaped),
                                None => return Err(unterminated(start)),
                            },
                            Some(other) => s.push(other),
                            None => return Err(unterminated(start)),
                        }
                    }
                    Tok::Str(s)
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut w = c.to_string();
                    while let Some(n) = self.peek_char().filter(|n| n.is_ascii_alphanumeric() || *n == '_') {
                        w.push(n);
                        self.bump();
                    }
                    Tok::Word(w)
                }
                other => {
                    return Err(syntax(start, &["keyword", "string", "`->`", "`(`", "`)`", "`[`", "`]`", "`?`"], format!("`{other}`")))
                }
            };
            out.push((tok, start));
        }
    }
}

fn syntax(pos: Pos, expected: &[&str], found: String) -> AqlError {
    AqlError::Syntax {
        line: pos.line,
        column: pos.column,
        offset: pos.offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    }
}

fn unterminated(pos: Pos) -> AqlError {
    syntax(pos, &["`'`"], "unterminated string".into())
}

const SUBJECTS: [&str; 4] = ["Flows", "Intents", "IntentFilters", "Permissions"];
const PARTS: [&str; 4] = ["Statement", "Method", "Class", "App"];

struct Parser {
    toks: Vec<(Tok, Pos)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, Pos) {
        &self.toks[self.idx.min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.peek().clone();
        if self.idx < self.toks.len() - 1 {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, label: &str) -> Result<Pos, AqlError> {
        let (tok, pos) = self.next();
        if tok == want {
            Ok(pos)
        } else {
            Err(syntax(pos, &[label], tok.describe()))
        }
    }

    fn query(&mut self) -> Result<QueryAst, AqlError> {
        let (tok, pos) = self.next();
        let subject = match &tok {
            Tok::Word(w) => Subject::from_keyword(w),
            _ => None,
        }
        .ok_or_else(|| syntax(pos, &SUBJECTS, tok.describe()))?;

        let (tok, pos) = self.next();
        let mode = match &tok {
            Tok::Word(w) if w == "IN" => QueryMode::In(self.reference()?),
            Tok::Word(w) if w == "FROM" => {
                if subject != Subject::Flows {
                    return Err(AqlError::Semantic {
                        line: pos.line,
                        column: pos.column,
                        message: format!("FROM ... TO is only valid for Flows, not {subject}"),
                    });
                }
                let from = self.reference()?;
                let (tok, pos) = self.next();
                if tok != Tok::Word("TO".into()) {
                    return Err(syntax(pos, &["TO"], tok.describe()));
                }
                let to = self.reference()?;
                QueryMode::FromTo { from, to }
            }
            _ => return Err(syntax(pos, &["IN", "FROM"], tok.describe())),
        };

        let mut post_ops = Vec::new();
        loop {
            let (tok, pos) = self.next();
            match &tok {
                Tok::Question => break,
                Tok::Word(w) if w == "FILTER" => post_ops.push(PostOp::Filter(self.reference()?)),
                Tok::Word(w) if w == "UNIFY" => {
                    self.expect(Tok::LBracket, "`[`")?;
                    let inner = self.query()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    post_ops.push(PostOp::Unify(Box::new(inner)));
                }
                _ => return Err(syntax(pos, &["FILTER", "UNIFY", "`?`"], tok.describe())),
            }
        }
        Ok(QueryAst { subject, mode, post_ops })
    }

    fn reference(&mut self) -> Result<Reference, AqlError> {
        let mut levels: [Option<String>; 3] = [None, None, None];
        let mut next_level = 0;
        loop {
            let (tok, pos) = self.next();
            let level = match &tok {
                Tok::Word(w) => PARTS.iter().position(|p| p == w).filter(|l| *l >= next_level),
                _ => None,
            }
            .ok_or_else(|| syntax(pos, &PARTS[next_level..], tok.describe()))?;
            self.expect(Tok::LParen, "`(`")?;
            let (tok, pos) = self.next();
            let Tok::Str(value) = tok else {
                return Err(syntax(pos, &["string"], tok.describe()));
            };
            self.expect(Tok::RParen, "`)`")?;
            if level == 3 {
                let [statement, method, classname] = levels;
                return Ok(Reference::new(
                    statement.as_deref(),
                    method.as_deref(),
                    classname.as_deref(),
                    AppIdentifier::file(value),
                ));
            }
            levels[level] = Some(value);
            next_level = level + 1;
            self.expect(Tok::Arrow, "`->`")?;
        }
    }
}

pub fn parse_query(text: &str) -> Result<QueryAst, AqlError> {
    let toks = Lexer { src: text, offset: 0, line: 1, column: 1 }.tokens()?;
    let mut parser = Parser { toks, idx: 0 };
    let ast = parser.query()?;
    let (tok, pos) = parser.next();
    if tok != Tok::Eof {
        return Err(syntax(pos, &["end of input"], tok.describe()));
    }
    Ok(ast)
}
