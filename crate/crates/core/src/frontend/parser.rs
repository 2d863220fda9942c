use crate::ast::*;

use super::lexer::{tokenize, Tok};
use super::SyntaxError;

/// Parses dialect source text into a [`Program`].
pub fn parse(source: &str) -> Result<Program, SyntaxError> {
    let toks = tokenize(source)?;
    Parser {
        toks,
        pos: 0,
        fresh: 0,
    }
    .program()
}

/// Either a plain term or an aggregate appearing as one side of a comparison.
enum Operand {
    Term(Term),
    Agg {
        func: AggregateFn,
        value: Option<String>,
        target: Atom,
    },
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    /// Counter for aggregate result variables introduced by desugaring.
    fresh: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(SyntaxError {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.err(&[what])
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if s != "_" => {
                self.advance();
                Ok(s)
            }
            _ => self.err(&[what]),
        }
    }

    fn program(mut self) -> PResult<Program> {
        let mut program = Program::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(program),
                Tok::Directive(d) => {
                    let span = self.span();
                    self.advance();
                    match d.as_str() {
                        "decl" => {
                            let mut decl = self.decl()?;
                            decl.span = span;
                            program.decls.push(decl);
                        }
                        "input" | "output" => {
                            let kind = if d == "input" {
                                IoKind::Input
                            } else {
                                IoKind::Output
                            };
                            for relation in self.io_names()? {
                                program.io.push(IoDirective {
                                    relation,
                                    kind,
                                    span,
                                });
                            }
                        }
                        _ => unreachable!("lexer only emits known directives"),
                    }
                }
                Tok::Ident(_) => self.clause(&mut program)?,
                _ => return self.err(&["a directive", "a clause"]),
            }
        }
    }

    fn decl(&mut self) -> PResult<RelationDecl> {
        let name = self.ident("relation name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut attrs = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let attr = self.ident("attribute name")?;
                let ty = if self.eat(&Tok::Colon) {
                    match self.peek().clone() {
                        Tok::Ident(t) if t == "symbol" => {
                            self.advance();
                            AttrType::Symbol
                        }
                        Tok::Ident(t) if t == "number" => {
                            self.advance();
                            AttrType::Number
                        }
                        _ => return self.err(&["`symbol`", "`number`"]),
                    }
                } else {
                    AttrType::Number
                };
                attrs.push(Attribute::new(attr, ty));
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        let mut decl = RelationDecl::new(name, attrs);
        if self.eat(&Tok::ChoiceDomain) {
            loop {
                let span = self.span();
                let attrs = if self.eat(&Tok::LParen) {
                    let mut names = vec![self.ident("attribute name")?];
                    while self.eat(&Tok::Comma) {
                        names.push(self.ident("attribute name")?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    names
                } else {
                    vec![self.ident("attribute name or `(`")?]
                };
                decl.choice_domains.push(DomainSpec { attrs, span });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.eat(&Tok::Dot);
        Ok(decl)
    }

    fn io_names(&mut self) -> PResult<Vec<String>> {
        let mut names = Vec::new();
        loop {
            names.push(self.ident("relation name")?);
            if self.eat(&Tok::LParen) {
                self.expect(Tok::RParen, "`)`")?;
            }
            if !self.eat(&Tok::Comma) {
                return Ok(names);
            }
        }
    }

    fn clause(&mut self, program: &mut Program) -> PResult<()> {
        let span = self.span();
        self.fresh = 0;
        let head = self.atom()?;
        if self.eat(&Tok::Dot) {
            for (i, arg) in head.args.iter().enumerate() {
                if !arg.is_constant() {
                    return Err(SyntaxError {
                        span: head.span,
                        expected: vec!["a constant fact argument".into()],
                        found: format!("non-constant argument {} of `{}`", i + 1, head.relation),
                    });
                }
            }
            program.facts.push(Fact { atom: head });
            return Ok(());
        }
        self.expect(Tok::ColonDash, "`.` or `:-`")?;
        let branches = self.disjunction()?;
        self.expect(Tok::Dot, "`,`, `;` or `.`")?;
        let body = if branches.len() == 1 {
            branches.into_iter().next().unwrap()
        } else {
            vec![Literal::Disjunction(branches)]
        };
        program.rules.push(Rule { head, body, span });
        Ok(())
    }

    fn atom(&mut self) -> PResult<Atom> {
        let span = self.span();
        let relation = self.ident("relation name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        Ok(Atom {
            relation,
            args,
            span,
        })
    }

    fn disjunction(&mut self) -> PResult<Vec<Vec<Literal>>> {
        let mut branches = vec![self.conjunction()?];
        while self.eat(&Tok::Semi) {
            branches.push(self.conjunction()?);
        }
        Ok(branches)
    }

    fn conjunction(&mut self) -> PResult<Vec<Literal>> {
        let mut lits = self.literal()?;
        while self.eat(&Tok::Comma) {
            lits.extend(self.literal()?);
        }
        Ok(lits)
    }

    /// One body literal. A parenthesized group may expand to several.
    fn literal(&mut self) -> PResult<Vec<Literal>> {
        match self.peek().clone() {
            Tok::Bang => {
                self.advance();
                Ok(vec![Literal::Negated(self.atom()?)])
            }
            Tok::Ident(name)
                if name == "choice"
                    && *self.peek_at(1) == Tok::LParen
                    && *self.peek_at(2) == Tok::LParen =>
            {
                self.advance();
                self.advance();
                let domain = self.var_group()?;
                self.expect(Tok::Comma, "`,`")?;
                let dependent = self.var_group()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(vec![Literal::Choice { domain, dependent }])
            }
            Tok::Ident(name) if name != "_" && *self.peek_at(1) == Tok::LParen => {
                Ok(vec![Literal::Positive(self.atom()?)])
            }
            Tok::LParen => {
                let save = (self.pos, self.fresh);
                self.advance();
                let group = self.disjunction().and_then(|b| {
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(b)
                });
                match group {
                    Ok(branches) if !self.at_operator() => {
                        if branches.len() == 1 {
                            Ok(branches.into_iter().next().unwrap())
                        } else {
                            Ok(vec![Literal::Disjunction(branches)])
                        }
                    }
                    _ => {
                        (self.pos, self.fresh) = save;
                        self.comparison()
                    }
                }
            }
            _ => self.comparison(),
        }
    }

    fn at_operator(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::Plus | Tok::Minus
        )
    }

    fn var_group(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut vars = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                vars.push(self.ident("variable")?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        Ok(vars)
    }

    fn cmp_op(&mut self) -> PResult<CmpOp> {
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return self.err(&["a comparison operator"]),
        };
        self.advance();
        Ok(op)
    }

    fn comparison(&mut self) -> PResult<Vec<Literal>> {
        let lhs = self.operand()?;
        let op = self.cmp_op()?;
        let rhs = self.operand()?;
        match (lhs, rhs) {
            (Operand::Term(Term::Var(v)), Operand::Agg { func, value, target })
            | (Operand::Agg { func, value, target }, Operand::Term(Term::Var(v)))
                if op == CmpOp::Eq =>
            {
                Ok(vec![Literal::Aggregate(Aggregate {
                    func,
                    value,
                    target,
                    result: v,
                })])
            }
            (lhs, rhs) => {
                let mut out = Vec::new();
                let lhs = self.bind_operand(lhs, &mut out);
                let rhs = self.bind_operand(rhs, &mut out);
                out.push(Literal::Compare { op, lhs, rhs });
                Ok(out)
            }
        }
    }

    fn bind_operand(&mut self, operand: Operand, out: &mut Vec<Literal>) -> Term {
        match operand {
            Operand::Term(t) => t,
            Operand::Agg {
                func,
                value,
                target,
            } => {
                let result = format!("_agg{}", self.fresh);
                self.fresh += 1;
                out.push(Literal::Aggregate(Aggregate {
                    func,
                    value,
                    target,
                    result: result.clone(),
                }));
                Term::Var(result)
            }
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        if let Tok::Ident(name) = self.peek().clone() {
            let func = match name.as_str() {
                "count" if *self.peek_at(1) == Tok::Colon => Some(AggregateFn::Count),
                "min" | "max"
                    if matches!(self.peek_at(1), Tok::Ident(_)) && *self.peek_at(2) == Tok::Colon =>
                {
                    Some(if name == "min" {
                        AggregateFn::Min
                    } else {
                        AggregateFn::Max
                    })
                }
                _ => None,
            };
            if let Some(func) = func {
                self.advance();
                let value = if func == AggregateFn::Count {
                    None
                } else {
                    Some(self.ident("aggregated variable")?)
                };
                self.expect(Tok::Colon, "`:`")?;
                let braced = self.eat(&Tok::LBrace);
                let target = self.atom()?;
                if braced {
                    self.expect(Tok::RBrace, "`}`")?;
                }
                return Ok(Operand::Agg {
                    func,
                    value,
                    target,
                });
            }
        }
        Ok(Operand::Term(self.term()?))
    }

    fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.primary()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.primary()?;
            lhs = Term::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn primary(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "_" => {
                self.advance();
                Ok(Term::Wildcard)
            }
            Tok::Ident(s) => {
                self.advance();
                Ok(Term::Var(s))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Term::Sym(s))
            }
            Tok::Num(n) => {
                self.advance();
                Ok(Term::Num(n))
            }
            Tok::Minus => {
                self.advance();
                match self.peek().clone() {
                    Tok::Num(n) => {
                        self.advance();
                        Ok(Term::Num(-n))
                    }
                    _ => self.err(&["a number"]),
                }
            }
            Tok::Dollar => {
                self.advance();
                Ok(Term::Counter)
            }
            Tok::LParen => {
                self.advance();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => self.err(&["a term"]),
        }
    }
}
