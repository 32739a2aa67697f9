//! Recursive-descent parser for MiniLang, a small brace/colon-delimited
//! Python-like language. It exists so trees can be produced hermetically;
//! real-language corpora enter through pre-parsed tree objects instead.
//!
//! Grammar sketch:
//!
//! ```text
//! program := stmt*
//! stmt    := "def" IDENT "(" params? ")" ":" block
//!          | IDENT ("." IDENT)* "=" expr
//!          | "for" IDENT "in" expr ":" block
//!          | "while" expr ":" block
//!          | "if" expr ":" block ("else" ":" block)?
//!          | "return" expr?
//!          | expr
//! block   := "{" stmt* "}" | stmt
//! params  := IDENT ("," IDENT)*
//! expr    := atom (BINOP atom)*
//! atom    := IDENT ("." IDENT)* ("(" args? ")")? | NUMBER | STRING
//! ```
//!
//! Nonterminal labels are grammar rule names; terminals carry their source
//! text, including keywords and punctuation. Blocks attach their statements
//! (and the brace tokens, when present) directly to the owning statement
//! node.

use super::{NodeId, NodeKind, Tree, TreeBuilder};
use crate::error::{Error, Result};

const KEYWORDS: &[&str] = &["def", "for", "in", "while", "if", "else", "return"];
const BINOPS: &[&str] = &[
    "+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==", "!=",
];

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Ident(String),
    Number(String),
    Str(String),
    Keyword(&'static str),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    line: usize,
    column: usize,
}

impl Token {
    fn text(&self) -> &str {
        match &self.kind {
            TokenKind::Ident(s) | TokenKind::Number(s) | TokenKind::Str(s) => s,
            TokenKind::Keyword(s) | TokenKind::Punct(s) => s,
            TokenKind::Eof => "end of input",
        }
    }
}

fn lex(source: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut column = 1;

    let two_char: &[&str] = &["==", "!=", "<=", ">="];
    let one_char = "+-*/%<>=(){}:,.";

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let start_line = line;
        let start_col = column;
        if c.is_alphabetic() || c == '_' {
            let mut word = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                word.push(chars[i]);
                i += 1;
                column += 1;
            }
            let kind = match KEYWORDS.iter().find(|&&k| k == word) {
                Some(&k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(word),
            };
            tokens.push(Token { kind, line: start_line, column: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let mut num = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                num.push(chars[i]);
                i += 1;
                column += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                num.push('.');
                i += 1;
                column += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    num.push(chars[i]);
                    i += 1;
                    column += 1;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number(num),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            let mut text = String::new();
            text.push(quote);
            i += 1;
            column += 1;
            let mut closed = false;
            while i < chars.len() {
                let ch = chars[i];
                if ch == '\n' {
                    break;
                }
                text.push(ch);
                i += 1;
                column += 1;
                if ch == '\\' && i < chars.len() {
                    text.push(chars[i]);
                    i += 1;
                    column += 1;
                    continue;
                }
                if ch == quote {
                    closed = true;
                    break;
                }
            }
            if !closed {
                return Err(Error::Syntax {
                    line: start_line,
                    column: start_col,
                    found: "unterminated string".into(),
                    expected: vec![format!("closing {quote}")],
                });
            }
            tokens.push(Token {
                kind: TokenKind::Str(text),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if i + 1 < chars.len() {
            let pair: String = [chars[i], chars[i + 1]].iter().collect();
            if let Some(&op) = two_char.iter().find(|&&p| p == pair) {
                tokens.push(Token {
                    kind: TokenKind::Punct(op),
                    line: start_line,
                    column: start_col,
                });
                i += 2;
                column += 2;
                continue;
            }
        }
        if let Some(pos) = one_char.find(c) {
            let op = &one_char[pos..pos + c.len_utf8()];
            // index back into the static str so Punct can hold &'static str
            tokens.push(Token {
                kind: TokenKind::Punct(op),
                line: start_line,
                column: start_col,
            });
            i += 1;
            column += 1;
            continue;
        }
        return Err(Error::Syntax {
            line: start_line,
            column: start_col,
            found: format!("character {c:?}"),
            expected: vec!["a MiniLang token".into()],
        });
    }
    tokens.push(Token { kind: TokenKind::Eof, line, column });
    Ok(tokens)
}

/// Parse MiniLang source into an AST. Deterministic: identical source
/// yields an identical tree.
pub fn parse_minilang(source: &str) -> Result<Tree> {
    let tokens = lex(source)?;
    let parser = Parser {
        tokens,
        pos: 0,
        builder: TreeBuilder::new(),
    };
    parser.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    builder: TreeBuilder,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> Error {
        let t = self.peek();
        Error::Syntax {
            line: t.line,
            column: t.column,
            found: t.text().to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn is_punct(&self, at: usize, op: &str) -> bool {
        matches!(&self.tokens[at.min(self.tokens.len() - 1)].kind, TokenKind::Punct(p) if *p == op)
    }

    fn eat_punct(&mut self, op: &'static str, parent: NodeId) -> Result<()> {
        if self.is_punct(self.pos, op) {
            let t = self.bump();
            self.builder.add(Some(parent), t.text(), NodeKind::Terminal);
            Ok(())
        } else {
            Err(self.error(&[&format!("\"{op}\"")]))
        }
    }

    fn eat_ident(&mut self, parent: NodeId) -> Result<()> {
        match self.peek_kind() {
            TokenKind::Ident(_) => {
                let t = self.bump();
                self.builder.add(Some(parent), t.text(), NodeKind::Terminal);
                Ok(())
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn add_keyword(&mut self, parent: NodeId) {
        let t = self.bump();
        self.builder.add(Some(parent), t.text(), NodeKind::Terminal);
    }

    fn program(mut self) -> Result<Tree> {
        let root = self.builder.add(None, "module", NodeKind::Nonterminal);
        while !matches!(self.peek_kind(), TokenKind::Eof) {
            self.stmt(root)?;
        }
        Ok(self.builder.finish())
    }

    fn stmt(&mut self, parent: NodeId) -> Result<()> {
        match self.peek_kind() {
            TokenKind::Keyword("def") => self.function_definition(parent),
            TokenKind::Keyword("for") => self.for_statement(parent),
            TokenKind::Keyword("while") => self.while_statement(parent),
            TokenKind::Keyword("if") => self.if_statement(parent),
            TokenKind::Keyword("return") => self.return_statement(parent),
            TokenKind::Ident(_) => {
                let end = self.scan_path_end(self.pos);
                if self.is_punct(end, "=") {
                    self.assignment(parent)
                } else {
                    self.expression_statement(parent)
                }
            }
            TokenKind::Number(_) | TokenKind::Str(_) => self.expression_statement(parent),
            _ => Err(self.error(&["statement"])),
        }
    }

    fn function_definition(&mut self, parent: NodeId) -> Result<()> {
        let node = self.builder.add(Some(parent), "function_definition", NodeKind::Nonterminal);
        self.add_keyword(node); // def
        self.eat_ident(node)?;
        self.eat_punct("(", node)?;
        if matches!(self.peek_kind(), TokenKind::Ident(_)) {
            let params = self.builder.add(Some(node), "parameters", NodeKind::Nonterminal);
            self.eat_ident(params)?;
            while self.is_punct(self.pos, ",") {
                self.eat_punct(",", params)?;
                self.eat_ident(params)?;
            }
        }
        self.eat_punct(")", node)?;
        self.eat_punct(":", node)?;
        self.block(node)
    }

    fn for_statement(&mut self, parent: NodeId) -> Result<()> {
        let node = self.builder.add(Some(parent), "for_statement", NodeKind::Nonterminal);
        self.add_keyword(node); // for
        self.eat_ident(node)?;
        match self.peek_kind() {
            TokenKind::Keyword("in") => self.add_keyword(node),
            _ => return Err(self.error(&["\"in\""])),
        }
        self.expr(node)?;
        self.eat_punct(":", node)?;
        self.block(node)
    }

    fn while_statement(&mut self, parent: NodeId) -> Result<()> {
        let node = self.builder.add(Some(parent), "while_statement", NodeKind::Nonterminal);
        self.add_keyword(node); // while
        self.expr(node)?;
        self.eat_punct(":", node)?;
        self.block(node)
    }

    fn if_statement(&mut self, parent: NodeId) -> Result<()> {
        let node = self.builder.add(Some(parent), "if_statement", NodeKind::Nonterminal);
        self.add_keyword(node); // if
        self.expr(node)?;
        self.eat_punct(":", node)?;
        self.block(node)?;
        if matches!(self.peek_kind(), TokenKind::Keyword("else")) {
            self.add_keyword(node); // else
            self.eat_punct(":", node)?;
            self.block(node)?;
        }
        Ok(())
    }

    fn return_statement(&mut self, parent: NodeId) -> Result<()> {
        let node = self.builder.add(Some(parent), "return_statement", NodeKind::Nonterminal);
        self.add_keyword(node); // return
        if matches!(
            self.peek_kind(),
            TokenKind::Ident(_) | TokenKind::Number(_) | TokenKind::Str(_)
        ) {
            self.expr(node)?;
        }
        Ok(())
    }

    fn assignment(&mut self, parent: NodeId) -> Result<()> {
        let node = self.builder.add(Some(parent), "assignment", NodeKind::Nonterminal);
        self.path(node)?;
        self.eat_punct("=", node)?;
        self.expr(node)
    }

    fn expression_statement(&mut self, parent: NodeId) -> Result<()> {
        let node = self.builder.add(Some(parent), "expression_statement", NodeKind::Nonterminal);
        self.expr(node)
    }

    fn block(&mut self, parent: NodeId) -> Result<()> {
        if self.is_punct(self.pos, "{") {
            self.eat_punct("{", parent)?;
            while !self.is_punct(self.pos, "}") {
                if matches!(self.peek_kind(), TokenKind::Eof) {
                    return Err(self.error(&["\"}\"", "statement"]));
                }
                self.stmt(parent)?;
            }
            self.eat_punct("}", parent)
        } else {
            self.stmt(parent)
        }
    }

    fn expr(&mut self, parent: NodeId) -> Result<()> {
        let end = self.scan_atom_end(self.pos)?;
        let has_binop = matches!(&self.tokens[end].kind, TokenKind::Punct(p) if BINOPS.contains(p));
        if !has_binop {
            return self.atom(parent);
        }
        let node = self.builder.add(Some(parent), "binary_op", NodeKind::Nonterminal);
        self.atom(node)?;
        while matches!(self.peek_kind(), TokenKind::Punct(p) if BINOPS.contains(p)) {
            let t = self.bump();
            self.builder.add(Some(node), t.text(), NodeKind::Terminal);
            self.atom(node)?;
        }
        Ok(())
    }

    fn atom(&mut self, parent: NodeId) -> Result<()> {
        match self.peek_kind() {
            TokenKind::Number(_) | TokenKind::Str(_) => {
                let t = self.bump();
                self.builder.add(Some(parent), t.text(), NodeKind::Terminal);
                Ok(())
            }
            TokenKind::Ident(_) => {
                let path_end = self.scan_path_end(self.pos);
                if self.is_punct(path_end, "(") {
                    let node = self.builder.add(Some(parent), "call", NodeKind::Nonterminal);
                    self.path(node)?;
                    self.eat_punct("(", node)?;
                    if !self.is_punct(self.pos, ")") {
                        self.expr(node)?;
                        while self.is_punct(self.pos, ",") {
                            self.eat_punct(",", node)?;
                            self.expr(node)?;
                        }
                    }
                    self.eat_punct(")", node)
                } else {
                    self.path(parent)
                }
            }
            _ => Err(self.error(&["identifier", "number", "string"])),
        }
    }

    /// IDENT ("." IDENT)*: a bare identifier terminal, or an `attribute`
    /// node when dotted.
    fn path(&mut self, parent: NodeId) -> Result<()> {
        let end = self.scan_path_end(self.pos);
        if end > self.pos + 1 {
            let node = self.builder.add(Some(parent), "attribute", NodeKind::Nonterminal);
            self.eat_ident(node)?;
            while self.is_punct(self.pos, ".") {
                self.eat_punct(".", node)?;
                self.eat_ident(node)?;
            }
            Ok(())
        } else {
            self.eat_ident(parent)
        }
    }

    /// Token index just past `IDENT ("." IDENT)*` starting at `i`.
    fn scan_path_end(&self, i: usize) -> usize {
        let mut j = i;
        if !matches!(&self.tokens[j].kind, TokenKind::Ident(_)) {
            return j;
        }
        j += 1;
        while self.is_punct(j, ".")
            && matches!(self.tokens.get(j + 1).map(|t| &t.kind), Some(TokenKind::Ident(_)))
        {
            j += 2;
        }
        j
    }

    /// Token index just past one atom starting at `i`.
    fn scan_atom_end(&self, i: usize) -> Result<usize> {
        match &self.tokens[i].kind {
            TokenKind::Number(_) | TokenKind::Str(_) => Ok(i + 1),
            TokenKind::Ident(_) => {
                let mut j = self.scan_path_end(i);
                if self.is_punct(j, "(") {
                    let mut depth = 0usize;
                    loop {
                        match &self.tokens[j].kind {
                            TokenKind::Punct("(") => depth += 1,
                            TokenKind::Punct(")") => {
                                depth -= 1;
                                if depth == 0 {
                                    j += 1;
                                    break;
                                }
                            }
                            TokenKind::Eof => break,
                            _ => {}
                        }
                        j += 1;
                    }
                }
                Ok(j)
            }
            _ => Err(self.error(&["identifier", "number", "string"])),
        }
    }
}
