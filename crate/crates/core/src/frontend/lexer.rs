use std::fmt;

use super::FrontendError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Identifier,
    IntLiteral,
    Operator,
    Punctuation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub column: u32,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    /// Value of an integer literal. The lexer has already range-checked it.
    pub fn int_value(&self) -> Option<i32> {
        match self.kind {
            TokenKind::IntLiteral => self.text.parse().ok(),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`", self.text)
    }
}

pub const KEYWORDS: &[&str] = &[
    "int", "bool", "_Bool", "void", "if", "else", "while", "do", "for", "switch", "case",
    "default", "break", "continue", "goto", "return", "extern", "static", "const", "volatile",
    "true", "false", "struct", "union", "enum", "typedef", "float", "double", "char", "long",
    "short", "unsigned", "signed",
];

// Longest first so that maximal munch picks `<=` over `<`.
const OPERATORS: &[&str] = &[
    "&&", "||", "<=", ">=", "==", "!=", "++", "--", "+=", "-=", "*=", "/=", "%=", "->", "+", "-",
    "*", "/", "%", "<", ">", "=", "!", "&", "?",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', ';', ',', ':', '[', ']', '.'];

/// Splits `source` into tokens, dropping whitespace and `//`, `/* */` comments.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest().chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn bump_n(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }

    fn error(&self, line: u32, column: u32, message: impl Into<String>) -> FrontendError {
        FrontendError::Lex {
            line,
            column,
            message: message.into(),
        }
    }

    fn run(mut self) -> Result<Vec<Token>, FrontendError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia()?;
            let (line, column) = (self.line, self.column);
            let Some(c) = self.rest().chars().next() else {
                return Ok(tokens);
            };
            let start = self.pos;
            let kind = if c.is_ascii_alphabetic() || c == '_' {
                while self
                    .rest()
                    .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
                {
                    self.bump();
                }
                if KEYWORDS.contains(&&self.src[start..self.pos]) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                }
            } else if c.is_ascii_digit() {
                self.lex_number(line, column)?;
                TokenKind::IntLiteral
            } else if let Some(op) = OPERATORS.iter().find(|op| self.rest().starts_with(**op)) {
                self.bump_n(op.len());
                TokenKind::Operator
            } else if PUNCTUATION.contains(&c) {
                self.bump();
                TokenKind::Punctuation
            } else if c == '"' || c == '\'' {
                return Err(FrontendError::Unsupported {
                    feature: "string and character literals".into(),
                    line,
                    column,
                });
            } else if c == '#' {
                return Err(self.error(line, column, "preprocessor directives are not supported"));
            } else {
                return Err(self.error(line, column, format!("unexpected character `{c}`")));
            };
            tokens.push(Token {
                kind,
                text: self.src[start..self.pos].to_string(),
                line,
                column,
            });
        }
    }

    fn lex_number(&mut self, line: u32, column: u32) -> Result<(), FrontendError> {
        let start = self.pos;
        while self.rest().starts_with(|c: char| c.is_ascii_digit()) {
            self.bump();
        }
        if self
            .rest()
            .starts_with(['.', 'e', 'E'])
        {
            return Err(FrontendError::Unsupported {
                feature: "floating-point types".into(),
                line,
                column,
            });
        }
        if self
            .rest()
            .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
        {
            return Err(self.error(line, column, "malformed integer literal"));
        }
        let text = &self.src[start..self.pos];
        if text.len() > 1 && text.starts_with('0') {
            return Err(self.error(line, column, "octal literals are not supported"));
        }
        if text.parse::<i32>().is_err() {
            return Err(FrontendError::Overflow {
                literal: text.to_string(),
                line,
                column,
            });
        }
        Ok(())
    }

    fn skip_trivia(&mut self) -> Result<(), FrontendError> {
        loop {
            let rest = self.rest();
            if rest.starts_with(|c: char| c.is_whitespace()) {
                self.bump();
            } else if rest.starts_with("//") {
                while !matches!(self.rest().chars().next(), None | Some('\n')) {
                    self.bump();
                }
            } else if rest.starts_with("/*") {
                let (line, column) = (self.line, self.column);
                self.bump_n(2);
                loop {
                    if self.rest().starts_with("*/") {
                        self.bump_n(2);
                        break;
                    }
                    if self.bump().is_none() {
                        return Err(self.error(line, column, "unterminated block comment"));
                    }
                }
            } else {
                return Ok(());
            }
        }
    }
}
