//! Line-oriented text format for algebras, r-matrices and twists.
//!
//! ```text
//! algebra
//! dim 3
//! basis e h f
//! bracket h e -> (2, e)
//! bracket h f -> (-2, f)
//! bracket e f -> (1, h)
//! h_indices h
//! mode reductive
//! end
//!
//! rmatrix
//! truncation 2
//! 1 * e^f * 1
//! 1 * e^f * h
//! 1/2 hbar^1 * e^f * h.h
//! end
//!
//! twist
//! order 1
//! hbar 0
//!   1 * 1 ⊗ 1 ⊗ 1
//! hbar 1
//!   1/2 * e ⊗ f ⊗ 1
//! end
//! ```
//!
//! Indices and names are interchangeable wherever a basis element is
//! expected. Monomials are `.`-joined in PBW order, `1` is the empty one.
//! `⊗` may be written `(x)`. A `formal` block has the same shape as
//! `twist`, with an S𝔥 monomial in the last slot, and a `gauge` block
//! holds an arity-1 element of U𝔤⊗U𝔥.

use std::fmt::Write as _;

use crate::element::{Key, Mono, SparseElement, Space};
use crate::error::{Error, Result};
use crate::hseries::{HSeries, Q};
use crate::lie::{Idx, LieData, Mode};

#[derive(Clone, Debug)]
struct Line<'a> {
    no: usize,
    text: &'a str,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Schema { line, msg: msg.into() }
}

fn lines(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| Line { no: i + 1, text: l.split('#').next().unwrap_or("").trim() })
        .filter(|l| !l.text.is_empty())
        .collect()
}

/// Body lines of the first block called `name`, or `None` if absent.
fn block<'a>(all: &[Line<'a>], name: &str) -> Result<Option<(usize, Vec<Line<'a>>)>> {
    let Some(start) = all.iter().position(|l| l.text == name) else {
        return Ok(None);
    };
    let body: Vec<Line> = all[start + 1..].iter().take_while(|l| l.text != "end").cloned().collect();
    if start + 1 + body.len() == all.len() {
        return Err(err(all[start].no, format!("block `{name}` has no `end`")));
    }
    Ok(Some((all[start].no, body)))
}

fn rational(tok: &str, line: usize) -> Result<Q> {
    tok.parse::<Q>().map_err(|_| err(line, format!("`{tok}` is not a rational number")))
}

fn index(names: &[String], tok: &str, line: usize) -> Result<usize> {
    if let Some(i) = names.iter().position(|n| n == tok) {
        return Ok(i);
    }
    match tok.parse::<usize>() {
        Ok(i) if i < names.len() => Ok(i),
        _ => Err(err(line, format!("unknown basis element `{tok}`"))),
    }
}

fn parse_pairs(s: &str, names: &[String], line: usize) -> Result<Vec<(Q, usize)>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let open = rest.strip_prefix('(').ok_or_else(|| err(line, "expected `(coeff, k)`"))?;
        let close = open.find(')').ok_or_else(|| err(line, "unclosed `(`"))?;
        let (c, k) = open[..close].split_once(',').ok_or_else(|| err(line, "expected `(coeff, k)`"))?;
        out.push((rational(c.trim(), line)?, index(names, k.trim(), line)?));
        rest = open[close + 1..].trim();
    }
    Ok(out)
}

/// Parse the `algebra` block.
pub fn parse_algebra(text: &str) -> Result<LieData> {
    let all = lines(text);
    let (at, body) = block(&all, "algebra")?.ok_or_else(|| err(0, "no `algebra` block"))?;
    let mut names: Option<Vec<String>> = None;
    let mut dim = None;
    let mut brackets = Vec::new();
    let mut h_tokens: Vec<(String, usize)> = Vec::new();
    let mut mode = Mode::Reductive;
    for l in &body {
        let (head, rest) = l.text.split_once(char::is_whitespace).unwrap_or((l.text, ""));
        match head {
            "dim" => dim = Some(rest.trim().parse::<usize>().map_err(|_| err(l.no, "bad dimension"))?),
            "basis" => names = Some(rest.split_whitespace().map(String::from).collect()),
            "bracket" => {
                let names = names.as_ref().ok_or_else(|| err(l.no, "`basis` must precede brackets"))?;
                let (lhs, rhs) = rest.split_once("->").ok_or_else(|| err(l.no, "expected `i j -> (c, k)...`"))?;
                let ij: Vec<&str> = lhs.split_whitespace().collect();
                if ij.len() != 2 {
                    return Err(err(l.no, "a bracket needs two arguments"));
                }
                let (i, j) = (index(names, ij[0], l.no)?, index(names, ij[1], l.no)?);
                for (c, k) in parse_pairs(rhs, names, l.no)? {
                    brackets.push((i, j, k, c));
                }
            }
            "h_indices" => h_tokens = rest.split_whitespace().map(|t| (t.to_string(), l.no)).collect(),
            "mode" => mode = rest.trim().parse().map_err(|e: String| err(l.no, e))?,
            other => return Err(err(l.no, format!("unknown algebra field `{other}`"))),
        }
    }
    let names = names.ok_or_else(|| err(at, "missing `basis`"))?;
    if let Some(d) = dim {
        if d != names.len() {
            return Err(err(at, format!("dim {d} but {} basis names", names.len())));
        }
    }
    let h: Vec<usize> = h_tokens.iter().map(|(t, no)| index(&names, t, *no)).collect::<Result<_>>()?;
    LieData::new(names, &brackets, &h, mode)
}

fn mono(lie: &LieData, tok: &str, sep: char, line: usize) -> Result<Mono> {
    if tok == "1" {
        return Ok(Vec::new());
    }
    tok.split(sep).map(|t| index(lie.names(), t, line).map(|i| i as Idx)).collect()
}

fn pbw_mono(lie: &LieData, tok: &str, line: usize) -> Result<Mono> {
    let m = mono(lie, tok, '.', line)?;
    if m.windows(2).any(|w| w[0] > w[1]) {
        return Err(err(line, format!("monomial `{tok}` is not in PBW order")));
    }
    Ok(m)
}

/// `coeff [hbar^k]` in front of the first `*`.
fn coefficient(s: &str, line: usize) -> Result<HSeries> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    let (c, power) = match toks.as_slice() {
        [c] => (rational(c, line)?, 0),
        [c, h] => {
            let p = match *h {
                "hbar" => 1,
                _ => h
                    .strip_prefix("hbar^")
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| err(line, format!("expected `hbar^k`, got `{h}`")))?,
            };
            (rational(c, line)?, p)
        }
        _ => return Err(err(line, "expected `coeff [hbar^k] * ...`")),
    };
    Ok(HSeries::monomial(c, power))
}

/// Parse the `rmatrix` block into a `WedgeSym` body and its truncation
/// degree (absent: the largest S𝔥-degree present).
pub fn parse_rmatrix(text: &str, lie: &LieData) -> Result<(SparseElement, Option<usize>)> {
    let all = lines(text);
    let (_, body) = block(&all, "rmatrix")?.ok_or_else(|| err(0, "no `rmatrix` block"))?;
    let mut out = SparseElement::zero(Space::WedgeSym);
    let mut truncation = None;
    for l in &body {
        if let Some(d) = l.text.strip_prefix("truncation") {
            truncation = Some(d.trim().parse::<usize>().map_err(|_| err(l.no, "bad truncation"))?);
            continue;
        }
        let parts: Vec<&str> = l.text.split('*').map(str::trim).collect();
        let [c, w, s] = parts.as_slice() else {
            return Err(err(l.no, "expected `coeff * x^y * h-monomial`"));
        };
        let c = coefficient(c, l.no)?;
        let word = mono(lie, w, '^', l.no)?;
        let Some((odd, w)) = crate::element::wedge_canon(&word) else {
            continue;
        };
        let mut s = mono(lie, s, '.', l.no)?;
        if s.iter().any(|&i| !lie.is_h(i)) {
            return Err(err(l.no, "the S(h) monomial uses letters outside h"));
        }
        s.sort_unstable();
        out.add_term(vec![w, s], &if odd { c.scale(&-Q::from_integer(1.into())) } else { c });
    }
    Ok((out, truncation))
}

/// A parsed twist document.
#[derive(Clone, Debug)]
pub struct TwistDoc {
    pub order: Option<usize>,
    /// K in U𝔤⊗U𝔤⊗U𝔥, from the `twist` block
    pub k: Option<SparseElement>,
    /// J in U𝔤⊗U𝔤⊗S𝔥, from the `formal` block
    pub j: Option<SparseElement>,
    /// arity-1 Q from the `gauge` block
    pub gauge: Option<SparseElement>,
}

fn parse_layered(body: &[Line], lie: &LieData, space: Space, slots: usize) -> Result<(Option<usize>, SparseElement)> {
    let mut out = SparseElement::zero(space);
    let mut order = None;
    let mut layer: Option<usize> = None;
    for l in body {
        if let Some(n) = l.text.strip_prefix("order") {
            order = Some(n.trim().parse().map_err(|_| err(l.no, "bad order"))?);
            continue;
        }
        if let Some(n) = l.text.strip_prefix("hbar") {
            layer = Some(n.trim().parse().map_err(|_| err(l.no, "bad hbar layer"))?);
            continue;
        }
        let layer = layer.ok_or_else(|| err(l.no, "term before any `hbar n` line"))?;
        let (c, rest) = l.text.split_once('*').ok_or_else(|| err(l.no, "expected `coeff * a ⊗ b ⊗ c`"))?;
        let c = rational(c.trim(), l.no)?;
        let rest = rest.replace("(x)", "⊗");
        let toks: Vec<&str> = rest.split('⊗').map(str::trim).collect();
        if toks.len() != slots {
            return Err(err(l.no, format!("expected {slots} tensor slots, got {}", toks.len())));
        }
        let mut key: Key = Vec::with_capacity(slots);
        for (i, t) in toks.iter().enumerate() {
            let m = pbw_mono(lie, t, l.no)?;
            if i + 1 == slots && m.iter().any(|&x| !lie.is_h(x)) {
                return Err(err(l.no, "the last slot uses letters outside h"));
            }
            key.push(m);
        }
        out.add_term(key, &HSeries::monomial(c, layer));
    }
    Ok((order, out))
}

/// Parse `twist`, `formal` and `gauge` blocks; each is optional.
pub fn parse_twist(text: &str, lie: &LieData) -> Result<TwistDoc> {
    let all = lines(text);
    let mut doc = TwistDoc { order: None, k: None, j: None, gauge: None };
    for (name, space, slots) in [("twist", Space::Adt, 3), ("formal", Space::Formal, 3), ("gauge", Space::Adt, 2)] {
        if let Some((_, body)) = block(&all, name)? {
            let (order, e) = parse_layered(&body, lie, space, slots)?;
            doc.order = doc.order.or(order);
            match name {
                "twist" => doc.k = Some(e),
                "formal" => doc.j = Some(e),
                _ => doc.gauge = Some(e),
            }
        }
    }
    if doc.k.is_none() && doc.j.is_none() && doc.gauge.is_none() {
        return Err(err(0, "no `twist`, `formal` or `gauge` block"));
    }
    Ok(doc)
}

fn fmt_mono(lie: &LieData, m: &[Idx], sep: &str) -> String {
    if m.is_empty() {
        return "1".into();
    }
    m.iter().map(|&i| lie.name(i)).collect::<Vec<_>>().join(sep)
}

pub fn write_algebra(lie: &LieData) -> String {
    let mut s = String::from("algebra\n");
    let names = lie.names();
    writeln!(s, "dim {}", names.len()).unwrap();
    writeln!(s, "basis {}", names.join(" ")).unwrap();
    for i in 0..names.len() as Idx {
        for j in i + 1..names.len() as Idx {
            let b = lie.bracket(i, j);
            if b.is_empty() {
                continue;
            }
            let pairs: Vec<String> = b.iter().map(|(k, c)| format!("({c}, {})", lie.name(*k))).collect();
            writeln!(s, "bracket {} {} -> {}", lie.name(i), lie.name(j), pairs.join(" ")).unwrap();
        }
    }
    let hs: Vec<&str> = lie.h_indices().iter().map(|&i| lie.name(i)).collect();
    writeln!(s, "h_indices {}", hs.join(" ")).unwrap();
    writeln!(s, "mode {}\nend", lie.mode().name()).unwrap();
    s
}

pub fn write_rmatrix(lie: &LieData, body: &SparseElement, truncation: usize) -> String {
    let mut s = format!("rmatrix\ntruncation {truncation}\n");
    for (k, c) in body.terms() {
        for (p, x) in c.coeffs().iter().enumerate() {
            if num_traits::Zero::is_zero(x) {
                continue;
            }
            let h = if p == 0 { String::new() } else { format!(" hbar^{p}") };
            writeln!(s, "{x}{h} * {} * {}", fmt_mono(lie, &k[0], "^"), fmt_mono(lie, &k[1], ".")).unwrap();
        }
    }
    s.push_str("end\n");
    s
}

/// One layered block (`twist`, `formal` or `gauge`) up to ħ-order `n`.
pub fn write_layered(lie: &LieData, name: &str, e: &SparseElement, n: usize) -> String {
    let mut s = format!("{name}\norder {n}\n");
    for layer in 0..=n {
        let part = e.hbar_layer(layer);
        if part.is_zero() {
            continue;
        }
        writeln!(s, "hbar {layer}").unwrap();
        for (k, c) in part.terms() {
            let slots: Vec<String> = k.iter().map(|m| fmt_mono(lie, m, ".")).collect();
            writeln!(s, "  {} * {}", c.coeff(0), slots.join(" ⊗ ")).unwrap();
        }
    }
    s.push_str("end\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hseries::{q, qf};

    const SL2: &str = "
        # sl2 with its Cartan subalgebra
        algebra
        dim 3
        basis e h f
        bracket h e -> (2, e)
        bracket 1 2 -> (-2, 2)
        bracket e f -> (1, h)
        h_indices h
        mode reductive
        end
        rmatrix
        truncation 1
        1 * e^f * 1
        -1/2 hbar^2 * f^e * h
        end
    ";

    #[test]
    fn algebra_round_trip() {
        let lie = parse_algebra(SL2).unwrap();
        assert_eq!(lie.names(), ["e", "h", "f"]);
        assert_eq!(lie.bracket(0, 2), &[(1, q(1))]);
        let again = parse_algebra(&write_algebra(&lie)).unwrap();
        assert_eq!(write_algebra(&again), write_algebra(&lie));
    }

    #[test]
    fn rmatrix_terms() {
        let lie = parse_algebra(SL2).unwrap();
        let (r, d) = parse_rmatrix(SL2, &lie).unwrap();
        assert_eq!(d, Some(1));
        assert_eq!(r.coeff(&[vec![0, 2], vec![]]), HSeries::monomial(q(1), 0));
        assert_eq!(r.coeff(&[vec![0, 2], vec![1]]), HSeries::monomial(qf(1, 2), 2));
        let (again, _) = parse_rmatrix(&write_rmatrix(&lie, &r, 1), &lie).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn twist_round_trip() {
        let lie = parse_algebra(SL2).unwrap();
        let mut k = SparseElement::unit(Space::Adt, 3);
        k.add_term(vec![vec![0], vec![2], vec![]], &HSeries::monomial(qf(1, 2), 1));
        k.add_term(vec![vec![0, 1], vec![2], vec![1, 1]], &HSeries::monomial(q(-3), 2));
        let text = write_layered(&lie, "twist", &k, 2);
        let doc = parse_twist(&text.replace('⊗', "(x)"), &lie).unwrap();
        assert_eq!(doc.order, Some(2));
        assert_eq!(doc.k.unwrap(), k);
    }

    #[test]
    fn schema_errors_carry_lines() {
        let lie = parse_algebra(SL2).unwrap();
        let bad = "twist\norder 1\nhbar 1\n  1 * f.e ⊗ 1 ⊗ 1\nend\n";
        assert!(matches!(parse_twist(bad, &lie), Err(Error::Schema { line: 4, .. })));
        assert!(matches!(parse_algebra("algebra\nbasis a\nbracket a b -> (1, a)\nend"), Err(Error::Schema { line: 3, .. })));
        assert!(matches!(parse_twist("twist\nhbar 0\n", &lie), Err(Error::Schema { line: 1, .. })));
        let leg = "twist\nhbar 1\n  1 * e ⊗ f ⊗ e\nend\n";
        assert!(matches!(parse_twist(leg, &lie), Err(Error::Schema { line: 3, .. })));
    }
}
