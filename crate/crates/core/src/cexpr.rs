//! Integer C expressions as emitted by the code generator: literals,
//! identifiers, `+ - * / %`, comparisons, `&&`, `||` and parentheses.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("unexpected `{0}` in expression")]
    Unexpected(String),
    #[error("unexpected end of expression")]
    End,
    #[error("unknown identifier `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    Op(&'static str),
}

const OPS: [&str; 17] = [
    "&&", "||", "<=", ">=", "==", "!=", "<", ">", "+", "-", "*", "/", "%", "(", ")", "!", "=",
];

fn lex(text: &str) -> Result<Vec<Tok>, ExprError> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c.is_whitespace() {
            rest = &rest[c.len_utf8()..];
        } else if c.is_ascii_digit() {
            let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
            let value = rest[..end]
                .parse()
                .map_err(|_| ExprError::Unexpected(rest[..end].to_string()))?;
            out.push(Tok::Int(value));
            rest = &rest[end..];
        } else if c.is_ascii_alphabetic() || c == '_' {
            let end = rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(rest.len());
            out.push(Tok::Ident(rest[..end].to_string()));
            rest = &rest[end..];
        } else {
            let op = OPS
                .iter()
                .find(|op| rest.starts_with(*op))
                .ok_or_else(|| ExprError::Unexpected(c.to_string()))?;
            out.push(Tok::Op(op));
            rest = &rest[op.len()..];
        }
    }
    Ok(out)
}

fn binop(op: &str) -> Option<(BinOp, u8)> {
    Some(match op {
        "||" => (BinOp::Or, 1),
        "&&" => (BinOp::And, 2),
        "==" => (BinOp::Eq, 3),
        "!=" => (BinOp::Ne, 3),
        "<" => (BinOp::Lt, 4),
        "<=" => (BinOp::Le, 4),
        ">" => (BinOp::Gt, 4),
        ">=" => (BinOp::Ge, 4),
        "+" => (BinOp::Add, 5),
        "-" => (BinOp::Sub, 5),
        "*" => (BinOp::Mul, 6),
        "/" => (BinOp::Div, 6),
        "%" => (BinOp::Rem, 6),
        _ => return None,
    })
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok, ExprError> {
        let tok = self.toks.get(self.pos).cloned().ok_or(ExprError::End)?;
        self.pos += 1;
        Ok(tok)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.next()? {
            Tok::Int(v) => Ok(Expr::Int(v)),
            Tok::Ident(name) => Ok(Expr::Var(name)),
            Tok::Op("-") => Ok(Expr::Neg(Box::new(self.primary()?))),
            Tok::Op("(") => {
                let e = self.binary(0)?;
                match self.next()? {
                    Tok::Op(")") => Ok(e),
                    other => Err(ExprError::Unexpected(format!("{other:?}"))),
                }
            }
            Tok::Op(op) => Err(ExprError::Unexpected(op.to_string())),
        }
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ExprError> {
        let mut lhs = self.primary()?;
        while let Some(Tok::Op(op)) = self.peek() {
            let Some((bin, prec)) = binop(op) else { break };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Bin(bin, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { toks: lex(text)?, pos: 0 };
        let e = p.binary(0)?;
        match p.peek() {
            None => Ok(e),
            Some(tok) => Err(ExprError::Unexpected(format!("{tok:?}"))),
        }
    }

    /// Evaluates with C semantics (truncating division, booleans as 0/1).
    pub fn eval(&self, env: &HashMap<String, i64>) -> Result<i64, ExprError> {
        Ok(match self {
            Expr::Int(v) => *v,
            Expr::Var(name) => *env.get(name).ok_or_else(|| ExprError::Unbound(name.clone()))?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(env)?;
                if *op == BinOp::And && a == 0 {
                    return Ok(0);
                }
                if *op == BinOp::Or && a != 0 {
                    return Ok(1);
                }
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div | BinOp::Rem if b == 0 => return Err(ExprError::DivZero),
                    BinOp::Div => a / b,
                    BinOp::Rem => a % b,
                    BinOp::Lt => (a < b) as i64,
                    BinOp::Le => (a <= b) as i64,
                    BinOp::Gt => (a > b) as i64,
                    BinOp::Ge => (a >= b) as i64,
                    BinOp::Eq => (a == b) as i64,
                    BinOp::Ne => (a != b) as i64,
                    BinOp::And | BinOp::Or => (b != 0) as i64,
                }
            }
        })
    }

    pub fn as_const(&self) -> Option<i64> {
        self.eval(&HashMap::new()).ok()
    }

    /// Identifiers the expression reads.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(name) => out.push(name.clone()),
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, vars: &[(&str, i64)]) -> i64 {
        let env = vars.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Expr::parse(text).unwrap().eval(&env).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[]), 7);
        assert_eq!(eval("10 - 4 - 3", &[]), 3);
        assert_eq!(eval("(I + 12) / 25 % 5", &[("I", 40)]), 2);
        assert_eq!(eval("100 / 10 / 5", &[]), 2);
        assert_eq!(eval("-3 + 675*i", &[("i", 1)]), 672);
    }

    #[test]
    fn conditions() {
        assert_eq!(eval("i > 0 && j == 0", &[("i", 1), ("j", 0)]), 1);
        assert_eq!(eval("(I >= 0 && I <= 9) || (I >= 20 && I <= 21)", &[("I", 15)]), 0);
        assert_eq!(eval("(I >= 0 && I <= 9) || (I >= 20 && I <= 21)", &[("I", 21)]), 1);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
        assert_eq!(Expr::parse("n").unwrap().as_const(), None);
        assert_eq!(Expr::parse("8 - 1").unwrap().as_const(), Some(7));
    }
}
