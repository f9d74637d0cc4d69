use super::{CoordinateFrame, Expr, Func, ParseError, Variable};

/// Parses `text` against the coordinate names of `frame`.
pub fn parse(text: &str, frame: &CoordinateFrame) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, frame };
    p.skip_ws();
    if p.at_end() {
        return Err(ParseError::Empty);
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    frame: &'a CoordinateFrame,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { pos: self.pos, message: message.into() }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else if self.at_end() {
            Err(self.syntax(format!("expected `{}` but input ended", c as char)))
        } else {
            Err(self.syntax(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let n = self.integer()?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let negative = self.eat(b'-');
        let mut parens = false;
        if !negative && self.eat(b'(') {
            parens = true;
        }
        let neg_in_parens = parens && self.eat(b'-');
        self.skip_ws();
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            self.pos = start;
            return Err(self.syntax("exponent must be an integer literal"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'.' | b'e' | b'E') {
            return Err(self.syntax("exponent must be an integer literal"));
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).expect("ascii digits");
        let mut n: i32 = text.parse().map_err(|_| self.syntax("exponent out of range"))?;
        if parens {
            self.expect(b')')?;
        }
        if negative || neg_in_parens {
            n = -n;
        }
        Ok(n)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.syntax("malformed exponent in number"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError::Syntax { pos: start, message: "malformed number".into() })
    }

    fn name(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii name");
        if self.peek() == Some(b'(') {
            let func = Func::from_name(name)
                .ok_or_else(|| ParseError::UnknownFunction { name: name.to_owned(), pos: start })?;
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        match self.frame.lookup(name) {
            Some(Variable::Coord(i)) => Ok(Expr::Var(i)),
            Some(Variable::Time) => Ok(Expr::Time),
            None if name == "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            None => Err(ParseError::UnknownIdentifier { name: name.to_owned(), pos: start }),
        }
    }
}
