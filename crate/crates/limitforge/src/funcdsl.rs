//! Expression language for functions of a single variable `t`.
//!
//! The grammar is deliberately small: arithmetic, a constant-only power
//! operator, and the four unary functions `ln`, `exp`, `sin`, `sqrt`.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := factor (('*' | '/') factor)*
//! factor   := '-' factor | atom ('^' exponent)?
//! atom     := number | 't' | ident '(' expr ')' | '(' expr ')'
//! exponent := '-'? number | '(' '-'? number ')'
//! ```
//!
//! `^` does not chain (`2^3^2` is a syntax error) and its exponent must be a
//! numeric literal; `t^t` is rejected as a non-constant exponent. Whitespace
//! is insignificant, names are case-sensitive.
//!
//! Evaluation is tree-walking IEEE `f64`. Domain violations (log of a
//! non-positive value, division by exactly zero, square root of a negative,
//! fractional powers of negatives, negative powers of zero) are reported as
//! [`EvalError`] with the offending subexpression rendered back to text.

use std::fmt;

/// Unary function names accepted by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Ln,
    Exp,
    Sin,
    Sqrt,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Ln => "ln",
            UnaryFn::Exp => "exp",
            UnaryFn::Sin => "sin",
            UnaryFn::Sqrt => "sqrt",
        }
    }
}

/// Parsed syntax tree. `Pow` stores its exponent as a plain `f64` because the
/// grammar only admits constant exponents.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Call(UnaryFn, Box<Node>),
}

/// A parsed expression together with the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

/// Multiplicative power shape `coeff * t^exponent`, when an expression
/// reduces to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerForm {
    pub coeff: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    /// Input was empty or all whitespace.
    Empty,
    /// Unexpected character (or end of input) at a byte offset.
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    /// An identifier that is neither `t` nor a known function.
    UnknownIdentifier { offset: usize, name: String },
    /// Something other than a numeric literal after `^`.
    NonConstantExponent { offset: usize },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Empty => write!(f, "empty expression"),
            ParseError::Syntax {
                offset,
                expected,
                found,
            } => {
                let exp = expected
                    .iter()
                    .map(|e| format!("`{e}`"))
                    .collect::<Vec<_>>()
                    .join(" or ");
                if found == "end of input" {
                    write!(f, "syntax error at byte {offset}: expected {exp}, found end of input")
                } else {
                    write!(f, "syntax error at byte {offset}: expected {exp}, found `{found}`")
                }
            }
            ParseError::UnknownIdentifier { offset, name } => write!(
                f,
                "unknown identifier `{name}` at byte {offset} (functions: ln, exp, sin, sqrt; variable: t)"
            ),
            ParseError::NonConstantExponent { offset } => {
                write!(f, "exponent at byte {offset} must be a numeric constant")
            }
        }
    }
}

impl std::error::Error for ParseError {}

/// Domain failure during evaluation: what went wrong, the rendered
/// subexpression it happened in, and the `t` it happened at.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub what: &'static str,
    pub subexpr: String,
    pub t: f64,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in `{}` at t = {}", self.what, self.subexpr, self.t)
    }
}

impl std::error::Error for EvalError {}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn syntax(&self, expected: Vec<&'static str>) -> ParseError {
        // pos always sits on a char boundary: the parser only steps over ASCII.
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(_) => self.text[self.pos..].chars().next().unwrap().to_string(),
        };
        ParseError::Syntax {
            offset: self.pos,
            expected,
            found,
        }
    }

    fn parse_expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                let rhs = self.parse_term()?;
                lhs = Node::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.parse_term()?;
                lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_factor()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                let rhs = self.parse_factor()?;
                lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.parse_factor()?;
                lhs = Node::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        if self.eat(b'-') {
            let inner = self.parse_factor()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        let base = self.parse_atom()?;
        self.skip_ws();
        if self.eat(b'^') {
            let e = self.parse_exponent()?;
            return Ok(Node::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        const ATOM: &[&str] = &["number", "t", "function", "("];
        match self.peek() {
            None => Err(self.syntax(ATOM.to_vec())),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.syntax(vec![")"]));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Node::Const(self.parse_number()?)),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.scan_ident();
                if name == "t" {
                    return Ok(Node::Var);
                }
                let func = match name {
                    "ln" => UnaryFn::Ln,
                    "exp" => UnaryFn::Exp,
                    "sin" => UnaryFn::Sin,
                    "sqrt" => UnaryFn::Sqrt,
                    _ => {
                        return Err(ParseError::UnknownIdentifier {
                            offset: start,
                            name: name.to_string(),
                        })
                    }
                };
                self.skip_ws();
                if !self.eat(b'(') {
                    return Err(self.syntax(vec!["("]));
                }
                let arg = self.parse_expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.syntax(vec![")"]));
                }
                Ok(Node::Call(func, Box::new(arg)))
            }
            Some(_) => Err(self.syntax(ATOM.to_vec())),
        }
    }

    fn parse_exponent(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        if self.eat(b'(') {
            self.skip_ws();
            let neg = self.eat(b'-');
            let val = self.exponent_number()?;
            self.skip_ws();
            if !self.eat(b')') {
                return Err(self.syntax(vec![")"]));
            }
            Ok(if neg { -val } else { val })
        } else {
            let neg = self.eat(b'-');
            let val = self.exponent_number()?;
            Ok(if neg { -val } else { val })
        }
    }

    fn exponent_number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' || c == b'(' => {
                Err(ParseError::NonConstantExponent { offset: self.pos })
            }
            _ => Err(self.syntax(vec!["number"])),
        }
    }

    fn scan_ident(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn parse_number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.eat(b'.') {
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        // Consume an exponent marker only when it is actually followed by
        // digits, so `2e` leaves the `e` for the caller to complain about.
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mut probe = self.pos + 1;
            if matches!(self.bytes.get(probe), Some(b'+' | b'-')) {
                probe += 1;
            }
            if matches!(self.bytes.get(probe), Some(c) if c.is_ascii_digit()) {
                self.pos = probe;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let slice = &self.text[start..self.pos];
        slice.parse::<f64>().map_err(|_| ParseError::Syntax {
            offset: start,
            expected: vec!["number"],
            found: slice.to_string(),
        })
    }
}

/// Parse `src` into an [`Expr`].
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        text: src,
        bytes: src.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    if p.pos == p.bytes.len() {
        return Err(ParseError::Empty);
    }
    let root = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.syntax(vec!["+", "-", "*", "/", "end of input"]));
    }
    Ok(Expr {
        root,
        source: src.to_string(),
    })
}

impl Expr {
    /// Build an expression directly from a syntax tree; the source text is
    /// the rendered form.
    pub fn from_root(root: Node) -> Expr {
        let source = render_node(&root);
        Expr { root, source }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// The text this expression was parsed from (rendered form when built
    /// via [`Expr::from_root`]).
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Canonical text form. Parsing the rendering yields an equivalent tree.
    pub fn render(&self) -> String {
        render_node(&self.root)
    }

    /// `1 / self`, as a new expression.
    pub fn reciprocal(&self) -> Expr {
        Expr::from_root(Node::Div(
            Box::new(Node::Const(1.0)),
            Box::new(self.root.clone()),
        ))
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        eval_node(&self.root, t)
    }

    /// Recognize `coeff * t^exponent` through products, quotients, powers,
    /// negation and `sqrt`. `None` when the expression does not reduce.
    pub fn power_form(&self) -> Option<PowerForm> {
        power_form_node(&self.root)
    }

    /// Exactly `exp(t)`.
    pub fn is_exp_of_var(&self) -> bool {
        matches!(&self.root, Node::Call(UnaryFn::Exp, a) if **a == Node::Var)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Evaluate a parsed expression at `t`.
pub fn evaluate(expr: &Expr, t: f64) -> Result<f64, EvalError> {
    expr.eval(t)
}

fn eval_node(node: &Node, t: f64) -> Result<f64, EvalError> {
    match node {
        Node::Const(c) => Ok(*c),
        Node::Var => Ok(t),
        Node::Neg(x) => Ok(-eval_node(x, t)?),
        Node::Add(a, b) => Ok(eval_node(a, t)? + eval_node(b, t)?),
        Node::Sub(a, b) => Ok(eval_node(a, t)? - eval_node(b, t)?),
        Node::Mul(a, b) => Ok(eval_node(a, t)? * eval_node(b, t)?),
        Node::Div(a, b) => {
            let num = eval_node(a, t)?;
            let den = eval_node(b, t)?;
            if den == 0.0 {
                return Err(domain("division by zero", node, t));
            }
            Ok(num / den)
        }
        Node::Pow(base, e) => {
            let v = eval_node(base, t)?;
            if v < 0.0 && e.fract() != 0.0 {
                return Err(domain("fractional power of a negative base", node, t));
            }
            if v == 0.0 && *e < 0.0 {
                return Err(domain("negative power of zero", node, t));
            }
            Ok(v.powf(*e))
        }
        Node::Call(func, arg) => {
            let v = eval_node(arg, t)?;
            match func {
                UnaryFn::Ln => {
                    if v <= 0.0 {
                        return Err(domain("logarithm of a non-positive value", node, t));
                    }
                    Ok(v.ln())
                }
                UnaryFn::Exp => Ok(v.exp()),
                UnaryFn::Sin => Ok(v.sin()),
                UnaryFn::Sqrt => {
                    if v < 0.0 {
                        return Err(domain("square root of a negative value", node, t));
                    }
                    Ok(v.sqrt())
                }
            }
        }
    }
}

fn domain(what: &'static str, node: &Node, t: f64) -> EvalError {
    EvalError {
        what,
        subexpr: render_node(node),
        t,
    }
}

// Precedence classes for rendering. Higher binds tighter; 5 never needs
// parentheses. Negative constants get the precedence of unary minus because
// their Display form starts with `-`.
fn prec(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        Node::Const(c) if *c < 0.0 => 3,
        Node::Const(..) | Node::Var | Node::Call(..) => 5,
    }
}

fn wrapped(node: &Node, wrap: bool) -> String {
    let s = render_node(node);
    if wrap {
        format!("({s})")
    } else {
        s
    }
}

fn render_node(node: &Node) -> String {
    match node {
        Node::Const(c) => format!("{c}"),
        Node::Var => "t".to_string(),
        Node::Neg(x) => format!("-{}", wrapped(x, prec(x) <= 3)),
        Node::Add(a, b) => format!("{} + {}", render_node(a), wrapped(b, prec(b) == 1)),
        Node::Sub(a, b) => format!("{} - {}", render_node(a), wrapped(b, prec(b) == 1)),
        Node::Mul(a, b) => format!(
            "{} * {}",
            wrapped(a, prec(a) == 1),
            wrapped(b, matches!(prec(b), 1 | 2))
        ),
        Node::Div(a, b) => format!(
            "{} / {}",
            wrapped(a, prec(a) == 1),
            wrapped(b, matches!(prec(b), 1 | 2))
        ),
        Node::Pow(base, e) => format!("{}^{}", wrapped(base, prec(base) != 5), e),
        Node::Call(func, arg) => format!("{}({})", func.name(), render_node(arg)),
    }
}

fn power_form_node(node: &Node) -> Option<PowerForm> {
    match node {
        Node::Const(c) => Some(PowerForm {
            coeff: *c,
            exponent: 0.0,
        }),
        Node::Var => Some(PowerForm {
            coeff: 1.0,
            exponent: 1.0,
        }),
        Node::Neg(x) => {
            let p = power_form_node(x)?;
            Some(PowerForm {
                coeff: -p.coeff,
                exponent: p.exponent,
            })
        }
        Node::Mul(a, b) => {
            let pa = power_form_node(a)?;
            let pb = power_form_node(b)?;
            Some(PowerForm {
                coeff: pa.coeff * pb.coeff,
                exponent: pa.exponent + pb.exponent,
            })
        }
        Node::Div(a, b) => {
            let pa = power_form_node(a)?;
            let pb = power_form_node(b)?;
            if pb.coeff == 0.0 {
                return None;
            }
            Some(PowerForm {
                coeff: pa.coeff / pb.coeff,
                exponent: pa.exponent - pb.exponent,
            })
        }
        Node::Pow(base, e) => {
            let p = power_form_node(base)?;
            if p.coeff <= 0.0 && e.fract() != 0.0 {
                return None;
            }
            Some(PowerForm {
                coeff: p.coeff.powf(*e),
                exponent: p.exponent * e,
            })
        }
        Node::Call(UnaryFn::Sqrt, arg) => {
            let p = power_form_node(arg)?;
            if p.coeff < 0.0 {
                return None;
            }
            Some(PowerForm {
                coeff: p.coeff.sqrt(),
                exponent: p.exponent / 2.0,
            })
        }
        _ => None,
    }
}

/// Outcome of sampling an expression on a geometric grid.
///
/// `non_increasing_from` is the first grid point past the last increasing
/// adjacent pair, i.e. the sampled evidence that the function eventually
/// decreases; `None` when the increase persists into the final sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityVerdict {
    pub positive_on_samples: bool,
    pub non_decreasing_on_samples: bool,
    pub non_increasing_from: Option<f64>,
    pub samples_used: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
}

/// Sample `f` on a geometric grid of `n` points over `[lo, hi]` and report
/// positivity and monotonicity of the samples. A non-positive `lo` is
/// replaced by `hi * 1e-12`. Evaluation errors on the grid propagate.
pub fn check_hypotheses(
    f: &Expr,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<MonotonicityVerdict, EvalError> {
    let n = n.max(2);
    let lo_eff = if lo <= 0.0 { hi * 1e-12 } else { lo };
    let (ln_lo, ln_hi) = (lo_eff.ln(), hi.ln());
    let mut xs = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    for i in 0..n {
        let x = if i == n - 1 {
            hi
        } else {
            (ln_lo + (ln_hi - ln_lo) * i as f64 / (n - 1) as f64).exp()
        };
        xs.push(x);
        vs.push(f.eval(x)?);
    }

    let positive = vs.iter().all(|&v| v > 0.0);
    let non_decreasing = vs.windows(2).all(|w| w[1] >= w[0]);
    let mut last_increase: Option<usize> = None;
    for (i, w) in vs.windows(2).enumerate() {
        if w[1] > w[0] {
            last_increase = Some(i);
        }
    }
    let non_increasing_from = match last_increase {
        None => Some(xs[0]),
        Some(i) if i + 1 <= n - 2 => Some(xs[i + 1]),
        Some(_) => None,
    };

    Ok(MonotonicityVerdict {
        positive_on_samples: positive,
        non_decreasing_on_samples: non_decreasing,
        non_increasing_from,
        samples_used: n,
        grid_lo: lo_eff,
        grid_hi: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, t: f64) -> f64 {
        evaluate(&parse(src).unwrap(), t).unwrap()
    }

    #[test]
    fn precedence_and_arithmetic() {
        assert_eq!(ev("1+2*3", 0.0), 7.0);
        assert_eq!(ev("(1+2)*3", 0.0), 9.0);
        assert_eq!(ev("2*t^2", 3.0), 18.0);
        assert_eq!(ev("-t^2", 2.0), -4.0);
        assert_eq!(ev("2^-2", 0.0), 0.25);
        assert_eq!(ev("t^(-0.5)", 4.0), 0.5);
        assert_eq!(ev("t^(0.5)", 9.0), 3.0);
        assert_eq!(ev("10-2-3", 0.0), 5.0);
        assert_eq!(ev("16/4/2", 0.0), 2.0);
        assert_eq!(ev(" 1 + 2 * t ", 3.0), 7.0);
        assert_eq!(ev("2.5e2", 0.0), 250.0);
        assert_eq!(ev("sqrt(t)*sqrt(t)", 2.0), 2.0000000000000004);
    }

    #[test]
    fn functions_evaluate() {
        assert_eq!(ev("ln(t)", 1.0), 0.0);
        assert_eq!(ev("exp(t)", 0.0), 1.0);
        assert!((ev("sin(t)", std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
        assert_eq!(ev("sqrt(t)", 9.0), 3.0);
    }

    #[test]
    fn unterminated_exponent_reports_offset_and_expectation() {
        let err = parse("t^(0.5").unwrap_err();
        match err {
            ParseError::Syntax {
                offset,
                expected,
                found,
            } => {
                assert_eq!(offset, 6);
                assert_eq!(expected, vec![")"]);
                assert_eq!(found, "end of input");
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn power_does_not_chain() {
        let err = parse("2^3^2").unwrap_err();
        match err {
            ParseError::Syntax { offset, .. } => assert_eq!(offset, 3),
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn non_constant_exponent_rejected() {
        assert_eq!(
            parse("t^t").unwrap_err(),
            ParseError::NonConstantExponent { offset: 2 }
        );
        assert_eq!(
            parse("2^(t)").unwrap_err(),
            ParseError::NonConstantExponent { offset: 3 }
        );
        assert_eq!(
            parse("t^ln(2)").unwrap_err(),
            ParseError::NonConstantExponent { offset: 2 }
        );
    }

    #[test]
    fn unknown_identifier_carries_name_and_offset() {
        assert_eq!(
            parse("foo(t)").unwrap_err(),
            ParseError::UnknownIdentifier {
                offset: 0,
                name: "foo".to_string()
            }
        );
        assert_eq!(
            parse("1 + tan(t)").unwrap_err(),
            ParseError::UnknownIdentifier {
                offset: 4,
                name: "tan".to_string()
            }
        );
    }

    #[test]
    fn case_sensitivity_and_empty_input() {
        assert!(matches!(
            parse("Ln(t)").unwrap_err(),
            ParseError::UnknownIdentifier { .. }
        ));
        assert_eq!(parse("").unwrap_err(), ParseError::Empty);
        assert_eq!(parse("   ").unwrap_err(), ParseError::Empty);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = parse("ln(t - 2)").unwrap();
        let err = evaluate(&e, 1.0).unwrap_err();
        assert_eq!(err.what, "logarithm of a non-positive value");
        assert_eq!(err.subexpr, "ln(t - 2)");
        assert_eq!(err.t, 1.0);

        let err = evaluate(&parse("1/(t-1)").unwrap(), 1.0).unwrap_err();
        assert_eq!(err.what, "division by zero");

        let err = evaluate(&parse("sqrt(t)").unwrap(), -1.0).unwrap_err();
        assert_eq!(err.what, "square root of a negative value");

        let err = evaluate(&parse("t^0.5").unwrap(), -4.0).unwrap_err();
        assert_eq!(err.what, "fractional power of a negative base");

        let err = evaluate(&parse("t^-1").unwrap(), 0.0).unwrap_err();
        assert_eq!(err.what, "negative power of zero");
    }

    #[test]
    fn integer_powers_of_negatives_are_fine() {
        assert_eq!(ev("t^3", -2.0), -8.0);
        assert_eq!(ev("t^2", -2.0), 4.0);
    }

    #[test]
    fn render_round_trips() {
        let corpus = [
            "1+2*3",
            "t^2 - t",
            "-(t + 1)",
            "-t^2",
            "2*(t+1)^2",
            "ln(t)/t",
            "exp(-t)",
            "1/(2*t)",
            "t - (1 - t)",
            "sqrt(t + 1) * sin(t)",
            "t^-2",
            "t^(0.5)",
            "3/t/t",
            "t*(t*t)",
        ];
        for src in corpus {
            let e1 = parse(src).unwrap();
            let r1 = e1.render();
            let e2 = parse(&r1).unwrap();
            assert_eq!(e1.root(), e2.root(), "tree changed for {src} -> {r1}");
            assert_eq!(r1, e2.render(), "render not stable for {src}");
        }
    }

    #[test]
    fn power_form_recognition() {
        let pf = |s: &str| parse(s).unwrap().power_form();
        assert_eq!(
            pf("3*t^2"),
            Some(PowerForm {
                coeff: 3.0,
                exponent: 2.0
            })
        );
        assert_eq!(
            pf("t"),
            Some(PowerForm {
                coeff: 1.0,
                exponent: 1.0
            })
        );
        assert_eq!(
            pf("2*t/t^(0.5)"),
            Some(PowerForm {
                coeff: 2.0,
                exponent: 0.5
            })
        );
        assert_eq!(
            pf("sqrt(t)"),
            Some(PowerForm {
                coeff: 1.0,
                exponent: 0.5
            })
        );
        assert_eq!(
            pf("1/t"),
            Some(PowerForm {
                coeff: 1.0,
                exponent: -1.0
            })
        );
        assert_eq!(pf("ln(t)"), None);
        assert_eq!(pf("t + 1"), None);
        assert_eq!(pf("exp(t)"), None);
        assert!(parse("exp(t)").unwrap().is_exp_of_var());
        assert!(!parse("exp(2*t)").unwrap().is_exp_of_var());
    }

    #[test]
    fn hypotheses_on_increasing_function() {
        let f = parse("t").unwrap();
        let v = check_hypotheses(&f, 1.0, 100.0, 64).unwrap();
        assert!(v.positive_on_samples);
        assert!(v.non_decreasing_on_samples);
        assert_eq!(v.non_increasing_from, None);
        assert_eq!(v.samples_used, 64);
        assert_eq!(v.grid_hi, 100.0);
    }

    #[test]
    fn hypotheses_on_decreasing_function() {
        let f = parse("1/t").unwrap();
        let v = check_hypotheses(&f, 1.0, 100.0, 64).unwrap();
        assert!(v.positive_on_samples);
        assert!(!v.non_decreasing_on_samples);
        assert_eq!(v.non_increasing_from, Some(1.0));
    }

    #[test]
    fn hypotheses_locate_the_hump() {
        // ln(t)/t peaks at t = e; the sampled turn should land nearby.
        let f = parse("ln(t)/t").unwrap();
        let v = check_hypotheses(&f, 2.0, 1000.0, 256).unwrap();
        assert!(v.positive_on_samples);
        let from = v.non_increasing_from.unwrap();
        assert!((2.3..3.2).contains(&from), "turn at {from}");
    }

    #[test]
    fn hypotheses_nonpositive_lo_is_nudged() {
        let f = parse("t").unwrap();
        let v = check_hypotheses(&f, 0.0, 1e6, 16).unwrap();
        assert!((v.grid_lo - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn hypotheses_propagate_domain_errors() {
        let f = parse("ln(t - 500)").unwrap();
        assert!(check_hypotheses(&f, 1.0, 1000.0, 32).is_err());
    }
}
